#include "kgen/ir.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace kgen {

std::string_view dtype_name(DType t) {
  switch (t) {
    case DType::I32: return "int32";
    case DType::I64: return "int64";
    case DType::F32: return "float32";
    case DType::F64: return "float64";
    case DType::Runtime: return "<runtime>";
  }
  return "<runtime>";
}

std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "f32" || s == "float32" || s == "float") return DType::F32;
  if (s == "f64" || s == "float64" || s == "double") return DType::F64;
  if (s == "i32" || s == "int32" || s == "int") return DType::I32;
  if (s == "i64" || s == "int64" || s == "long") return DType::I64;
  if (s == "<runtime>" || s == "runtime") return DType::Runtime;
  return std::nullopt;
}

bool is_float(DType t) { return t == DType::F32 || t == DType::F64; }

DType join(DType a, DType b) {
  if (a == DType::Runtime) return b;
  if (b == DType::Runtime) return a;
  return static_cast<int>(a) > static_cast<int>(b) ? a : b;
}

std::string DimTag::to_string() const {
  switch (kind) {
    case Kind::Stride:
      if (stride) return "stride:" + stride->to_string();
      if (order >= 0) return "N" + std::to_string(order);
      return "stride:auto";
    case Kind::Vec: return "vec";
    case Kind::Sep: return "sep";
  }
  return "";
}

DimTag parse_dim_tag(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text == "vec") return DimTag::vec();
  if (text == "sep") return DimTag::sep();
  if (text == "c" || text == "stride:auto" || text == "auto") return DimTag::auto_stride();
  if (text.size() >= 2 && text[0] == 'N' &&
      std::all_of(text.begin() + 1, text.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return DimTag::auto_stride(std::stoi(std::string(text.substr(1))));
  if (text.substr(0, 7) == "stride:") return DimTag::stride_of(parse_affine(text.substr(7)));
  throw SyntaxError(0, "unknown dim tag '" + std::string(text) + "'");
}

std::string InameTag::to_string() const {
  switch (kind) {
    case Kind::None: return "";
    case Kind::Unroll: return "unr";
    case Kind::ILP: return "ilp";
    case Kind::Vec: return "vec";
    case Kind::Group: return "g." + std::to_string(axis);
    case Kind::Local: return "l." + std::to_string(axis);
  }
  return "";
}

InameTag parse_iname_tag(std::string_view text) {
  if (text.empty() || text == "None" || text == "none" || text == "for") return {};
  if (text == "unr") return {InameTag::Kind::Unroll, 0};
  if (text == "ilp") return {InameTag::Kind::ILP, 0};
  if (text == "vec") return {InameTag::Kind::Vec, 0};
  if (text.size() >= 3 && (text[0] == 'g' || text[0] == 'l') && text[1] == '.') {
    const auto digits = text.substr(2);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      return {text[0] == 'g' ? InameTag::Kind::Group : InameTag::Kind::Local, std::stoi(std::string(digits))};
  }
  throw SyntaxError(0, "unknown iname tag '" + std::string(text) + "'");
}

// {{{ Kernel accessors

const ArgSpec* Kernel::find_arg(const std::string& n) const {
  for (const auto& a : args)
    if (a.name == n) return &a;
  return nullptr;
}

ArgSpec* Kernel::find_arg(const std::string& n) {
  for (auto& a : args)
    if (a.name == n) return &a;
  return nullptr;
}

const Instruction* Kernel::find_insn(const std::string& id) const {
  for (const auto& i : instructions)
    if (i.id == id) return &i;
  return nullptr;
}

Instruction* Kernel::find_insn(const std::string& id) {
  for (auto& i : instructions)
    if (i.id == id) return &i;
  return nullptr;
}

InameTag Kernel::tag_of(const std::string& iname) const {
  auto it = iname_tags.find(iname);
  return it == iname_tags.end() ? InameTag{} : it->second;
}

std::vector<std::string> Kernel::value_args() const {
  std::vector<std::string> r;
  for (const auto& a : args)
    if (a.kind == ArgSpec::Kind::Value) r.push_back(a.name);
  return r;
}

PolySet Kernel::full_domain() const { return intersect(domain, assumptions); }

std::set<std::string> Kernel::all_inames_of(const Instruction& insn) const {
  std::set<std::string> r = insn.within_inames;
  for (const auto& n : reduction_inames(insn.rhs)) r.insert(n);
  return r;
}

// }}}

// {{{ validate

namespace {

const std::set<std::string>& builtin_functions() {
  static const std::set<std::string> names = {"sqrt", "exp",  "log",  "sin",  "cos",  "tan",   "fabs",
                                              "abs",  "fmin", "fmax", "pow",  "floor", "ceil", "min",
                                              "max",  "tanh", "atan", "asin", "acos",  "rsqrt"};
  return names;
}

}  // namespace

std::vector<Diagnostic> validate(const Kernel& k) {
  std::vector<Diagnostic> diags;
  auto add = [&](Errc c, const std::string& subj, const std::string& msg) { diags.push_back({c, subj, msg}); };

  std::set<std::string> ids;
  for (const auto& insn : k.instructions)
    if (!ids.insert(insn.id).second) add(Errc::DuplicateId, insn.id, "duplicate instruction id '" + insn.id + "'");

  for (const auto& insn : k.instructions) {
    for (const auto& n : insn.within_inames)
      if (!k.is_iname(n)) add(Errc::UnknownIname, insn.id, "instruction '" + insn.id + "' uses undeclared iname '" + n + "'");
    for (const auto& n : reduction_inames(insn.rhs)) {
      if (!k.is_iname(n)) add(Errc::UnknownIname, insn.id, "reduction over undeclared iname '" + n + "'");
      if (insn.within_inames.count(n))
        add(Errc::InvalidKernel, insn.id, "reduction iname '" + n + "' is also active at '" + insn.id + "'");
    }
    for (const auto& d : insn.depends_on)
      if (!ids.count(d)) add(Errc::InvalidKernel, insn.id, "dependency on unknown instruction '" + d + "'");

    auto check_names = [&](const ExprPtr& e) {
      for (const auto& n : free_variables(e)) {
        if (k.is_iname(n) || k.find_arg(n) || k.temps.count(n) || k.domain.has_param(n)) continue;
        if (k.assumptions.has_param(n)) continue;
        add(Errc::UnknownParameter, insn.id, "unknown name '" + n + "' in '" + insn.id + "'");
      }
      visit(e, [&](const ExprPtr& x) {
        if (const auto* s = x->as<Subscript>()) {
          const ArgSpec* a = k.find_arg(s->array);
          auto t = k.temps.find(s->array);
          if (!a && t == k.temps.end()) {
            add(Errc::UnknownArray, insn.id, "unknown array '" + s->array + "'");
          } else if (a && a->kind == ArgSpec::Kind::Value) {
            add(Errc::AmbiguousName, insn.id, "'" + s->array + "' is a value argument but is subscripted");
          } else {
            std::size_t rank = a ? (a->shape ? a->shape->size() : s->index.size()) : t->second.shape.size();
            if (rank != s->index.size())
              add(Errc::RankMismatch, insn.id,
                  "'" + s->array + "' has rank " + std::to_string(rank) + " but is indexed with " +
                      std::to_string(s->index.size()) + " indices");
          }
        } else if (const auto* c = x->as<Call>()) {
          if (!k.rules.count(c->function) && !builtin_functions().count(c->function))
            add(Errc::UnknownRule, insn.id, "unknown function or rule '" + c->function + "'");
        }
      });
    };
    check_names(insn.assignee);
    check_names(insn.rhs);
    if (k.rules.count(insn.target()))
      add(Errc::NameCollision, insn.id, "'" + insn.target() + "' is both a rule and an assignee");

    // At most one iname per parallel axis within one instruction.
    std::map<std::string, std::string> axis_owner;
    for (const auto& n : k.all_inames_of(insn)) {
      const InameTag t = k.tag_of(n);
      if (!t.is_parallel()) continue;
      const std::string key = t.to_string();
      auto [it, fresh] = axis_owner.emplace(key, n);
      if (!fresh)
        add(Errc::AxisConflict, insn.id, "inames '" + it->second + "' and '" + n + "' share axis " + key);
    }
  }

  for (const auto& [name, tag] : k.iname_tags)
    if (!k.is_iname(name)) add(Errc::UnknownIname, name, "tag on undeclared iname '" + name + "'");

  for (const auto& [name, t] : k.temps) {
    if (t.space != AddressSpace::Local) continue;
    bool has_local = std::any_of(k.iname_tags.begin(), k.iname_tags.end(),
                                 [](const auto& kv) { return kv.second.kind == InameTag::Kind::Local; });
    if (!has_local) add(Errc::InvalidKernel, name, "local temporary '" + name + "' requires a local-tagged iname");
  }

  // Dependency cycles.
  std::map<std::string, int> state;
  std::vector<std::string> stack;
  std::set<std::string> reported;
  std::function<void(const std::string&)> dfs = [&](const std::string& id) {
    state[id] = 1;
    stack.push_back(id);
    if (const Instruction* insn = k.find_insn(id)) {
      for (const auto& d : insn->depends_on) {
        if (!ids.count(d)) continue;
        if (state[d] == 1) {
          auto from = std::find(stack.begin(), stack.end(), d);
          std::vector<std::string> cyc(from, stack.end());
          std::string key;
          auto sorted = cyc;
          std::sort(sorted.begin(), sorted.end());
          for (const auto& c : sorted) key += c + ",";
          if (reported.insert(key).second) {
            std::string msg = "dependency cycle:";
            for (const auto& c : cyc) msg += " " + c;
            add(Errc::InvalidKernel, cyc.front(), msg);
          }
        } else if (state[d] == 0) {
          dfs(d);
        }
      }
    }
    stack.pop_back();
    state[id] = 2;
  };
  for (const auto& insn : k.instructions)
    if (state[insn.id] == 0) dfs(insn.id);

  return diags;
}

void ensure_valid(const Kernel& k) {
  auto diags = validate(k);
  if (diags.empty()) return;
  std::string msg;
  for (const auto& d : diags) msg += (msg.empty() ? "" : "; ") + d.message;
  throw Error(diags.front().code, msg);
}

// }}}

// {{{ dump

namespace {

const char* const kRule = "------------------------------------------------------";

std::string tuple_text(const std::vector<AffExpr>& xs) {
  std::string s = "(";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + xs[i].to_string();
  return s + ")";
}

}  // namespace

std::string kernel_to_text(const Kernel& k) {
  std::ostringstream os;
  os << kRule << "\nKERNEL: " << k.name << "\n" << kRule << "\nARGUMENTS:\n";
  std::vector<const ArgSpec*> args;
  for (const auto& a : k.args) args.push_back(&a);
  std::sort(args.begin(), args.end(), [](const ArgSpec* x, const ArgSpec* y) { return x->name < y->name; });
  for (const ArgSpec* a : args) {
    if (a->kind == ArgSpec::Kind::Value) {
      os << a->name << ": ValueArg, type: " << dtype_name(a->dtype) << "\n";
      continue;
    }
    os << a->name << ": GlobalArg, type: " << dtype_name(a->dtype) << ", shape: ";
    if (a->shape)
      os << tuple_text(*a->shape);
    else
      os << "auto";
    os << ", dim_tags: ";
    if (a->dim_tags.empty()) {
      os << "auto";
    } else {
      os << "(";
      for (std::size_t i = 0; i < a->dim_tags.size(); ++i) os << (i ? ", " : "") << a->dim_tags[i].to_string();
      os << ")";
    }
    os << "\n";
  }
  os << kRule << "\nDOMAINS:\n" << k.domain.to_string() << "\n";
  if (!k.assumptions.constraints().empty()) os << kRule << "\nASSUMPTIONS:\n" << k.assumptions.to_string() << "\n";
  if (!k.temps.empty()) {
    os << kRule << "\nTEMPORARIES:\n";
    for (const auto& [name, t] : k.temps)
      os << name << ": TemporaryVariable, type: " << dtype_name(t.dtype) << ", shape: " << tuple_text(t.shape)
         << ", scope: " << (t.space == AddressSpace::Local ? "local" : "private")
         << ", base: " << tuple_text(t.base_indices) << "\n";
  }
  if (!k.rules.empty()) {
    os << kRule << "\nSUBSTITUTION RULES:\n";
    for (const auto& [name, r] : k.rules) {
      os << name << "(";
      for (std::size_t i = 0; i < r.params.size(); ++i) os << (i ? ", " : "") << r.params[i];
      os << ") := " << to_text(r.body) << "\n";
    }
  }
  bool any_tag = std::any_of(k.iname_tags.begin(), k.iname_tags.end(),
                             [](const auto& kv) { return kv.second.kind != InameTag::Kind::None; });
  if (any_tag) {
    os << kRule << "\nINAME TAGS:\n";
    for (const auto& [name, t] : k.iname_tags)
      if (t.kind != InameTag::Kind::None) os << name << ": " << t.to_string() << "\n";
  }
  if (!k.loop_priority.empty()) {
    os << kRule << "\nLOOP PRIORITY:\n";
    for (std::size_t i = 0; i < k.loop_priority.size(); ++i) os << (i ? ", " : "") << k.loop_priority[i];
    os << "\n";
  }
  os << kRule << "\nINSTRUCTIONS:\n";
  for (const auto& insn : k.instructions) {
    os << "[";
    bool first = true;
    for (const auto& n : insn.within_inames) {
      os << (first ? "" : ",") << n;
      first = false;
    }
    os << "] " << to_text(insn.assignee) << " <- " << to_text(insn.rhs) << "   # " << insn.id << "\n";
  }
  bool any_dep = std::any_of(k.instructions.begin(), k.instructions.end(),
                             [](const Instruction& i) { return !i.depends_on.empty() || i.deps_exhaustive; });
  if (any_dep) {
    os << kRule << "\nDEPENDENCIES:\n";
    for (const auto& insn : k.instructions) {
      if (insn.depends_on.empty() && !insn.deps_exhaustive) continue;
      os << insn.id << ":";
      std::string sep = " ";
      if (insn.deps_exhaustive) {
        os << " *";
        sep = "";
      }
      for (const auto& d : insn.depends_on) {
        os << sep << d;
        sep = ", ";
      }
      os << "\n";
    }
  }
  os << kRule << "\n";
  return os.str();
}

// }}}

}  // namespace kgen
