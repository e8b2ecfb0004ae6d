#include "kgen/codegen.hpp"

#include <algorithm>
#include <sstream>

#include "kgen/analysis.hpp"

namespace kgen {

std::string_view c_type_name(DType t) {
  switch (t) {
    case DType::I32: return "int";
    case DType::I64: return "long";
    case DType::F32: return "float";
    case DType::F64: return "double";
    case DType::Runtime: break;
  }
  throw Error(Errc::Untypeable, "no concrete type");
}

namespace {

using Lines = std::vector<std::string>;
using Stmts = std::vector<Lines>;

Lines block(const std::string& head, const Stmts& body) {
  Lines out{head};
  if (body.size() == 1) {
    for (const auto& l : body.front()) out.push_back("  " + l);
    return out;
  }
  out.push_back("{");
  for (const auto& s : body)
    for (const auto& l : s) out.push_back("  " + l);
  out.push_back("}");
  return out;
}

std::string paren(const std::string& s) { return "(" + s + ")"; }

std::string lane_name(std::int64_t k) {
  static const char* digits = "0123456789abcdef";
  return std::string(".s") + digits[k];
}

struct Text {
  std::string s;
  int prec;  // 1 additive, 2 multiplicative, 3 unary, 4 atom
};

class Emitter {
 public:
  Emitter(const ScheduledKernel& s, const std::map<std::string, DType>& bindings)
      : s_(s), k_(infer_types(s.kernel, bindings)), full_(k_.full_domain()) {
    for (const auto& insn : k_.instructions) written_.insert(insn.target());
    for (const auto& a : k_.args)
      if (a.dtype == DType::Runtime) throw Error(Errc::Untypeable, "type of argument '" + a.name + "' is unknown");
    for (const auto& [n, t] : k_.temps)
      if (t.dtype == DType::Runtime) throw Error(Errc::Untypeable, "type of temporary '" + n + "' is unknown");
    for (const auto& [n, base] : s.grid_base) {
      const InameTag t = k_.tag_of(n);
      const std::string macro = std::string(t.kind == InameTag::Kind::Local ? "lid(" : "gid(") + std::to_string(t.axis) + ")";
      aff_[n] = base + AffExpr::variable(macro);
      expr_[n] = base.is_constant() && base.constant() == 0 ? make_var(macro)
                                                           : make_binary(BinOp::Add, affine_to_expr(base), make_var(macro));
    }
  }

  std::string generate() {
    std::ostringstream os;
    os << "#define lid(N) ((int) get_local_id(N))\n";
    os << "#define gid(N) ((int) get_group_id(N))\n";
    os << "__kernel void __attribute__ ((reqd_work_group_size(";
    for (int a = 0; a < 3; ++a) {
      auto it = s_.grid_sizes.find("l." + std::to_string(a));
      std::string v = "1";
      if (it != s_.grid_sizes.end()) {
        if (!it->second.is_constant())
          throw Error(Errc::InvalidKernel, "work group size along l." + std::to_string(a) + " is not a constant");
        v = floor_div(it->second.numerator.constant(), it->second.denominator).str();
      }
      os << (a ? ", " : "") << v;
    }
    os << ")))\n";
    os << k_.name << "(" << signature() << ")\n{\n";
    Stmts body = declarations();
    for (auto& st : emit(0, s_.items.size())) body.push_back(std::move(st));
    for (const auto& st : body)
      for (const auto& l : st) os << "  " << l << "\n";
    os << "}\n";
    return os.str();
  }

 private:
  // {{{ signature and declarations

  std::string element_type(const ArgSpec& a) const {
    std::string t(c_type_name(a.dtype));
    for (const auto& d : a.dim_tags)
      if (d.kind == DimTag::Kind::Vec) t += std::to_string(d.width);
    return t;
  }

  std::vector<std::string> sep_names(const ArgSpec& a) const {
    std::vector<std::string> names{a.name};
    bool first = true;
    for (std::size_t d = 0; d < a.dim_tags.size(); ++d) {
      if (a.dim_tags[d].kind != DimTag::Kind::Sep) continue;
      const std::int64_t len = to_i64((*a.shape)[d].constant());
      std::vector<std::string> next;
      for (const auto& n : names)
        for (std::int64_t i = 0; i < len; ++i) next.push_back(n + (first ? "_s" : "_") + std::to_string(i));
      names = std::move(next);
      first = false;
    }
    return names;
  }

  std::string signature() const {
    std::vector<std::pair<std::string, std::string>> params;
    for (const auto& a : k_.args) {
      if (a.kind == ArgSpec::Kind::Value) {
        params.emplace_back(a.name, std::string(c_type_name(a.dtype)) + " const " + a.name);
        continue;
      }
      const std::string t = element_type(a);
      for (const auto& n : sep_names(a))
        params.emplace_back(n, "__global " + t + (written_.count(a.name) ? "" : " const") + " *restrict " + n);
    }
    std::sort(params.begin(), params.end());
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) out += (i ? ", " : "") + params[i].second;
    return out;
  }

  Stmts declarations() const {
    Stmts out;
    for (const auto& [n, t] : k_.temps) {
      std::string line = std::string(t.space == AddressSpace::Local ? "__local " : "") + std::string(c_type_name(t.dtype)) + " " + n;
      for (const auto& e : t.shape) {
        if (!e.is_constant()) throw Error(Errc::InvalidKernel, "temporary '" + n + "' needs a constant shape");
        line += "[" + e.constant().str() + "]";
      }
      out.push_back({line + ";"});
    }
    return out;
  }

  // }}}

  // {{{ expressions

  AffExpr subst_aff(AffExpr e) const {
    for (const auto& [n, v] : aff_)
      if (e.depends_on(n)) e = e.substitute(n, v);
    return e;
  }

  QuasiAff subst_q(const QuasiAff& q) const { return {subst_aff(q.numerator), q.denominator}; }

  std::int64_t constant_of(const QuasiAff& q, const std::string& what) const {
    const QuasiAff s = subst_q(q);
    if (!s.is_constant()) throw Error(Errc::NonConstantTripCount, what + " is not a constant");
    return to_i64(floor_div(s.numerator.constant(), s.denominator));
  }

  // nullopt: never holds; "": always holds.
  std::optional<std::string> condition(const std::vector<Constraint>& guard) const {
    std::string out;
    for (const auto& c : guard) {
      const Constraint g = c.with_expr(subst_aff(c.expr()));
      if (g.expr().is_constant()) {
        if (!g.holds([](const std::string&) { return Int(0); })) return std::nullopt;
        continue;
      }
      out += (out.empty() ? "" : " && ") + render_constraint(g);
    }
    return out;
  }

  std::string literal_int(std::int64_t v, DType lit) const {
    if (lit == DType::F32) return std::to_string(v) + ".0f";
    if (lit == DType::F64) return std::to_string(v) + ".0";
    return std::to_string(v);
  }

  Text render(const ExprPtr& e, DType lit) const {
    if (const auto* v = e->as<Variable>()) {
      auto it = expr_.find(v->name);
      if (it != expr_.end()) return render(it->second, lit);
      return {v->name, 4};
    }
    if (const auto* i = e->as<IntLiteral>()) return {literal_int(i->value, lit), i->value < 0 ? 3 : 4};
    if (const auto* f = e->as<FloatLiteral>()) return {f->text + (lit == DType::F32 ? "f" : ""), f->text[0] == '-' ? 3 : 4};
    if (const auto* n = e->as<Negate>()) {
      const DType t = expression_type(k_, e);
      Text o = render(n->operand, is_float(t) ? t : lit);
      if (o.prec < 3 || o.s[0] == '-') o.s = paren(o.s);
      return {"-" + o.s, 3};
    }
    if (const auto* b = e->as<Binary>()) {
      const DType t = expression_type(k_, e);
      const DType child = is_float(t) ? t : DType::I32;
      const int p = b->op == BinOp::Add || b->op == BinOp::Sub ? 1 : 2;
      Text l = render(b->lhs, child), r = render(b->rhs, child);
      if (l.prec < p) l.s = paren(l.s);
      if (r.prec <= p) r.s = paren(r.s);
      static const char* ops[] = {" + ", " - ", " * ", " / ", " % "};
      return {l.s + ops[static_cast<int>(b->op)] + r.s, p};
    }
    if (const auto* c = e->as<Call>()) {
      const DType t = expression_type(k_, e);
      std::string fn = c->function;
      if (is_float(t) && (fn == "min" || fn == "max")) fn = "f" + fn;
      if (is_float(t) && fn == "abs") fn = "fabs";
      std::string out = fn + "(";
      for (std::size_t i = 0; i < c->args.size(); ++i) out += (i ? ", " : "") + render(c->args[i], t).s;
      return {out + ")", 4};
    }
    if (const auto* s = e->as<Subscript>()) return {subscript(*s), 4};
    throw Error(Errc::InvalidKernel, "reduction left inside an expression");
  }

  std::int64_t literal_index(const ExprPtr& idx, const std::string& array) const {
    auto a = to_affine(substitute(idx, expr_));
    if (!a || !subst_aff(*a).is_constant())
      throw Error(Errc::UnsupportedVecShape, "index '" + to_text(idx) + "' into a vec or separate axis of '" + array +
                                                 "' is not a constant");
    return to_i64(subst_aff(*a).constant());
  }

  std::string subscript(const Subscript& s) const {
    if (k_.temps.count(s.array)) {
      std::string out = s.array;
      for (const auto& i : s.index) out += "[" + render(i, DType::I32).s + "]";
      return out;
    }
    const ArgSpec* a = k_.find_arg(s.array);
    if (!a) throw Error(Errc::UnknownArray, "'" + s.array + "' is not an argument");
    std::string name = s.array, lane;
    bool first_sep = true;
    std::vector<std::string> terms;
    for (std::size_t d = 0; d < s.index.size(); ++d) {
      const DimTag tag = d < a->dim_tags.size() ? a->dim_tags[d] : DimTag::stride_of(AffExpr(1));
      if (tag.kind == DimTag::Kind::Vec) {
        lane = lane_name(literal_index(s.index[d], s.array));
        continue;
      }
      if (tag.kind == DimTag::Kind::Sep) {
        name += (first_sep ? "_s" : "_") + std::to_string(literal_index(s.index[d], s.array));
        first_sep = false;
        continue;
      }
      if (!tag.stride) throw Error(Errc::InvalidKernel, "unresolved stride for '" + s.array + "'");
      Text idx = render(s.index[d], DType::I32);
      if (*tag.stride == AffExpr(1)) {
        terms.push_back(idx.s);
      } else {
        if (idx.prec < 2) idx.s = paren(idx.s);
        terms.push_back(render_affine(*tag.stride) + " * " + idx.s);
      }
    }
    std::string off;
    for (std::size_t i = 0; i < terms.size(); ++i) off += (i ? " + " : "") + terms[i];
    return name + "[" + (off.empty() ? "0" : off) + "]" + lane;
  }

  // }}}

  // {{{ instructions and reductions

  struct ReductionLoop {
    QuasiAff lower, upper;
    std::vector<Constraint> conds;
  };

  ReductionLoop reduction_loop(const std::string& k, const std::vector<std::string>& scope) const {
    std::vector<std::string> vars = scope;
    vars.push_back(k);
    const PolySet p = project_onto(full_, vars).simplified();
    const LoopBounds b = bounds(p, k, scope);
    auto simplest = [](const std::vector<BoundCandidate>& c) {
      const BoundCandidate* best = &c.front();
      for (const auto& x : c)
        if (x.value.numerator.coefficients().size() < best->value.numerator.coefficients().size()) best = &x;
      return *best;
    };
    const BoundCandidate lo = simplest(b.lower), hi = simplest(b.upper);
    std::vector<Constraint> ctx{lo.source, hi.source};
    const PolySet outer = project_onto(full_, scope);
    for (const auto& c : outer.constraints()) ctx.push_back(c);
    for (const auto& c : p.constraints())
      if (!c.involves(k)) ctx.push_back(c);
    ReductionLoop r{lo.value, hi.value, {}};
    if (b.stride > 1) r.conds.push_back(Constraint::div(AffExpr::variable(k) - AffExpr(b.residue), b.stride));
    for (const auto& c : p.constraints())
      if (c.involves(k) && c.kind() != ConstraintKind::Div && !implies(PolySet(p.set_vars(), p.params(), ctx), c))
        r.conds.push_back(c);
    return r;
  }

  std::string combine(ReduceOp op, DType t, const std::string& acc, const std::string& v) const {
    switch (op) {
      case ReduceOp::Sum: return acc + " + " + paren(v);
      case ReduceOp::Product: return acc + " * " + paren(v);
      case ReduceOp::Min: return std::string(is_float(t) ? "fmin(" : "min(") + acc + ", " + v + ")";
      case ReduceOp::Max: return std::string(is_float(t) ? "fmax(" : "max(") + acc + ", " + v + ")";
    }
    return acc;
  }

  Lines reduction_body(const Reduction& r, const std::string& acc, DType t, std::vector<std::string> scope) const {
    const ReductionLoop loop = reduction_loop(r.iname, scope);
    scope.push_back(r.iname);
    Stmts inner;
    const auto* nested = r.body->as<Reduction>();
    if (nested && nested->op == r.op && (r.op == ReduceOp::Sum || r.op == ReduceOp::Product) &&
        expression_type(k_, r.body) == t) {
      inner.push_back(reduction_body(*nested, acc, t, scope));
    } else {
      const ExprPtr body = hoist(r.body, inner, scope);
      inner.push_back({acc + " = " + combine(r.op, t, acc, render(body, t).s) + ";"});
    }
    auto cond = condition(loop.conds);
    if (!cond) return {};
    if (!cond->empty()) inner = {block("if (" + *cond + ")", inner)};
    return block("for (int " + r.iname + " = " + render_bound(subst_q(loop.lower)) + "; " + r.iname +
                     " <= " + render_bound(subst_q(loop.upper)) + "; ++" + r.iname + ")",
                 inner);
  }

  ExprPtr hoist(const ExprPtr& e, Stmts& out, const std::vector<std::string>& scope) const {
    return rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
      const auto* r = x->as<Reduction>();
      if (!r) return nullptr;
      const DType t = expression_type(k_, x);
      const std::string acc = "acc_" + r->iname;
      const std::string type(c_type_name(t));
      if (r->op == ReduceOp::Sum || r->op == ReduceOp::Product) {
        out.push_back({type + " " + acc + " = " + literal_int(r->op == ReduceOp::Sum ? 0 : 1, t) + ";"});
      } else {
        if (!reduction_inames(r->body).empty())
          throw Error(Errc::InvalidKernel, "nested reduction inside " + std::string(reduce_op_name(r->op)));
        const ReductionLoop loop = reduction_loop(r->iname, scope);
        const ExprPtr first = substitute(r->body, {{r->iname, make_var(render_bound(subst_q(loop.lower)))}});
        out.push_back({type + " " + acc + " = " + render(first, t).s + ";"});
      }
      Lines loop = reduction_body(*r, acc, t, scope);
      if (!loop.empty()) out.push_back(std::move(loop));
      return make_var(acc);
    });
  }

  Stmts run_stmts(const std::string& id) const {
    const Instruction& insn = *k_.find_insn(id);
    Stmts out;
    std::vector<std::string> scope(insn.within_inames.begin(), insn.within_inames.end());
    const ExprPtr rhs = hoist(substitute(insn.rhs, expr_), out, scope);
    const ExprPtr lhs = substitute(insn.assignee, expr_);
    DType target = DType::Runtime;
    if (const ArgSpec* a = k_.find_arg(insn.target())) target = a->dtype;
    if (auto it = k_.temps.find(insn.target()); it != k_.temps.end()) target = it->second.dtype;
    out.push_back({render(lhs, target).s + " = " + render(rhs, target).s + ";"});
    return out;
  }

  // }}}

  // {{{ schedule walk

  std::size_t close_of(std::size_t open) const {
    int depth = 0;
    for (std::size_t i = open; i < s_.items.size(); ++i) {
      if (s_.items[i].kind == ScheduleItem::Kind::OpenLoop) ++depth;
      if (s_.items[i].kind == ScheduleItem::Kind::CloseLoop && --depth == 0) return i;
    }
    throw Error(Errc::InvalidKernel, "unbalanced schedule");
  }

  Stmts emit(std::size_t begin, std::size_t end) {
    Stmts out;
    std::size_t i = begin;
    while (i < end) {
      const ScheduleItem& it = s_.items[i];
      switch (it.kind) {
        case ScheduleItem::Kind::OpenLoop: {
          const std::size_t close = close_of(i);
          for (auto& st : loop(i, close)) out.push_back(std::move(st));
          i = close + 1;
          break;
        }
        case ScheduleItem::Kind::Run: {
          const auto cond = condition(it.guard);
          Stmts group;
          std::size_t j = i;
          while (j < end && s_.items[j].kind == ScheduleItem::Kind::Run && condition(s_.items[j].guard) == cond) {
            for (auto& st : run_stmts(s_.items[j].name)) group.push_back(std::move(st));
            ++j;
          }
          if (cond && cond->empty())
            for (auto& st : group) out.push_back(std::move(st));
          else if (cond)
            out.push_back(block("if (" + *cond + ")", group));
          i = j;
          break;
        }
        case ScheduleItem::Kind::Barrier:
          out.push_back({"barrier(CLK_LOCAL_MEM_FENCE);"});
          ++i;
          break;
        case ScheduleItem::Kind::CloseLoop: ++i; break;
      }
    }
    return out;
  }

  Stmts loop(std::size_t open, std::size_t close) {
    const ScheduleItem& it = s_.items[open];
    const auto cond = condition(it.guard);
    if (!cond) return {};
    const std::string& x = it.name;
    Stmts out;
    if (it.loop_kind == LoopKind::Sequential) {
      Stmts body = emit(open + 1, close);
      if (body.empty()) return {};
      std::string lo = render_bound(subst_q(it.range.lower));
      const std::string hi = render_bound(subst_q(it.range.upper));
      std::string step = "++" + x;
      if (it.range.stride > 1) {
        const std::string st = it.range.stride.str(), r = it.range.residue.str();
        if (subst_q(it.range.lower).is_constant()) {
          const Int l = floor_div(subst_q(it.range.lower).numerator.constant(), it.range.lower.denominator);
          lo = (l + mod_floor(it.range.residue - l, it.range.stride)).str();
        } else {
          lo = "(" + lo + " + ((" + st + " + " + r + " - " + lo + " % " + st + ") % " + st + "))";
        }
        step = x + " += " + st;
      }
      out.push_back(block("for (int " + x + " = " + lo + "; " + x + " <= " + hi + "; " + step + ")", body));
    } else {
      std::int64_t lo = constant_of(it.range.lower, "lower bound of '" + x + "'");
      const std::int64_t hi = constant_of(it.range.upper, "upper bound of '" + x + "'");
      const std::int64_t stride = to_i64(it.range.stride);
      if (stride > 1) lo += to_i64(mod_floor(it.range.residue - lo, it.range.stride));
      for (std::int64_t v = lo; v <= hi; v += stride) {
        aff_[x] = AffExpr(v);
        expr_[x] = make_int(v);
        for (auto& st : emit(open + 1, close)) out.push_back(std::move(st));
      }
      aff_.erase(x);
      expr_.erase(x);
    }
    if (!cond->empty() && !out.empty()) return {block("if (" + *cond + ")", out)};
    return out;
  }

  // }}}

  const ScheduledKernel& s_;
  Kernel k_;
  PolySet full_;
  std::set<std::string> written_;
  std::map<std::string, AffExpr> aff_;
  std::map<std::string, ExprPtr> expr_;
};

}  // namespace

std::string generate_code(const ScheduledKernel& s, const std::map<std::string, DType>& bindings) {
  return Emitter(s, bindings).generate();
}

}  // namespace kgen
