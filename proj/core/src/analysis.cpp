#include "kgen/analysis.hpp"

#include <algorithm>
#include <sstream>

namespace kgen {

// {{{ helpers

namespace {

ExprPtr expand_rules_depth(const Kernel& k, const ExprPtr& e, int depth) {
  if (depth > 64) throw Error(Errc::InvalidKernel, "substitution rules expand recursively without end");
  return rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
    const auto* c = x->as<Call>();
    if (!c) return nullptr;
    auto it = k.rules.find(c->function);
    if (it == k.rules.end()) return nullptr;
    const SubstitutionRule& r = it->second;
    if (r.params.size() != c->args.size())
      throw Error(Errc::InvalidKernel, "rule '" + r.name + "' expects " + std::to_string(r.params.size()) +
                                           " arguments, got " + std::to_string(c->args.size()));
    std::map<std::string, ExprPtr> values;
    for (std::size_t i = 0; i < r.params.size(); ++i) values[r.params[i]] = expand_rules_depth(k, c->args[i], depth + 1);
    return expand_rules_depth(k, substitute(r.body, values), depth + 1);
  });
}

}  // namespace

ExprPtr expand_rules(const Kernel& k, const ExprPtr& e) {
  if (k.rules.empty()) return e;
  return expand_rules_depth(k, e, 0);
}

std::set<std::string> names_read(const Kernel& k, const Instruction& insn) {
  std::set<std::string> out;
  auto collect = [&](const ExprPtr& e) {
    for (const auto& n : free_variables(e)) out.insert(n);
    for (const Subscript* s : subscripts(e)) out.insert(s->array);
  };
  collect(expand_rules(k, insn.rhs));
  if (const auto* s = insn.assignee->as<Subscript>())
    for (const auto& idx : s->index) collect(expand_rules(k, idx));
  return out;
}

std::set<std::string> referenced_inames(const Kernel& k, const Instruction& insn) {
  std::set<std::string> out;
  for (const ExprPtr& e : {expand_rules(k, insn.assignee), expand_rules(k, insn.rhs)})
    for (const auto& n : free_variables(e))
      if (k.is_iname(n)) out.insert(n);
  return out;
}

PolySet instruction_domain(const Kernel& k, const Instruction& insn) {
  const auto inames = k.all_inames_of(insn);
  return project_onto(k.full_domain(), std::vector<std::string>(inames.begin(), inames.end()));
}

std::vector<std::string> topological_order(const Kernel& k) {
  std::map<std::string, std::size_t> pending;
  for (const auto& insn : k.instructions) {
    std::size_t n = 0;
    for (const auto& d : insn.depends_on)
      if (k.find_insn(d)) ++n;
    pending[insn.id] = n;
  }
  std::vector<std::string> order;
  std::set<std::string> done;
  while (order.size() < k.instructions.size()) {
    bool progressed = false;
    for (const auto& insn : k.instructions) {
      if (done.count(insn.id) || pending[insn.id] != 0) continue;
      order.push_back(insn.id);
      done.insert(insn.id);
      for (const auto& other : k.instructions)
        if (other.depends_on.count(insn.id)) --pending[other.id];
      progressed = true;
      break;
    }
    if (!progressed) throw Error(Errc::InvalidKernel, "dependency graph has a cycle");
  }
  return order;
}

// }}}

// {{{ dependencies and active inames

Kernel infer_dependencies(const Kernel& k) {
  Kernel r = k;
  std::map<std::string, std::vector<std::string>> writers;
  for (const auto& insn : k.instructions) writers[insn.target()].push_back(insn.id);
  for (auto& insn : r.instructions) {
    if (insn.deps_exhaustive) continue;
    for (const auto& name : names_read(k, insn)) {
      auto it = writers.find(name);
      if (it == writers.end() || it->second.size() != 1) continue;
      const std::string& w = it->second.front();
      // A read of the instruction's own output is not an ordering edge.
      if (w == insn.id) continue;
      if (insn.depends_on.insert(w).second) insn.heuristic_deps.insert(w);
    }
  }
  return r;
}

namespace {

std::set<std::string> assignee_index_inames(const Kernel& k, const Instruction& insn) {
  std::set<std::string> out;
  if (const auto* s = insn.assignee->as<Subscript>())
    for (const auto& idx : s->index)
      for (const auto& n : free_variables(idx))
        if (k.is_iname(n)) out.insert(n);
  return out;
}

}  // namespace

Kernel compute_active_inames(const Kernel& k) {
  Kernel r = k;
  std::map<std::string, std::set<std::string>> within, exported, binders;
  for (const auto& insn : r.instructions) {
    auto& w = within[insn.id];
    w = insn.within_inames;
    for (const auto& n : referenced_inames(k, insn)) w.insert(n);
    binders[insn.id] = reduction_inames(expand_rules(k, insn.rhs));
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& insn : r.instructions) {
      const auto own_index = assignee_index_inames(k, insn);
      auto& ex = exported[insn.id];
      for (const auto& n : within[insn.id])
        if (!own_index.count(n) && ex.insert(n).second) changed = true;
    }
    for (const auto& insn : r.instructions) {
      auto& w = within[insn.id];
      for (const auto& d : insn.depends_on) {
        auto it = exported.find(d);
        if (it == exported.end()) continue;
        for (const auto& n : it->second)
          if (!binders[insn.id].count(n) && w.insert(n).second) changed = true;
      }
    }
  }
  for (auto& insn : r.instructions) insn.within_inames = within[insn.id];
  return r;
}

// }}}

// {{{ types

namespace {

struct TypeInfo {
  DType type = DType::Runtime;
  bool weak = false;  // literal-only, yields to any strong type
  bool known = false;
};

TypeInfo strong(DType t) { return {t, false, t != DType::Runtime}; }

TypeInfo join_info(const TypeInfo& a, const TypeInfo& b) {
  if (!a.known || !b.known) return {};
  if (a.weak && b.weak) return {join(a.type, b.type), true, true};
  if (a.weak || b.weak) {
    const TypeInfo& s = a.weak ? b : a;
    const TypeInfo& w = a.weak ? a : b;
    // A float literal forces integer data to double.
    if (is_float(w.type) && !is_float(s.type)) return strong(DType::F64);
    return s;
  }
  return strong(join(a.type, b.type));
}

DType resolve(const TypeInfo& t) {
  if (!t.known) return DType::Runtime;
  if (t.weak) return is_float(t.type) ? DType::F64 : DType::I32;
  return t.type;
}

class Typer {
 public:
  Typer(const Kernel& k, std::map<std::string, DType> env) : k_(k), env_(std::move(env)) {}

  TypeInfo of(const ExprPtr& e) const {
    return std::visit(
        [&](const auto& n) -> TypeInfo {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Variable>) {
            if (k_.is_iname(n.name) || bound_.count(n.name)) return strong(DType::I32);
            return lookup(n.name);
          } else if constexpr (std::is_same_v<T, IntLiteral>) {
            return {DType::I32, true, true};
          } else if constexpr (std::is_same_v<T, FloatLiteral>) {
            return {DType::F64, true, true};
          } else if constexpr (std::is_same_v<T, Negate>) {
            return of(n.operand);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return join_info(of(n.lhs), of(n.rhs));
          } else if constexpr (std::is_same_v<T, Call>) {
            if (k_.rules.count(n.function)) return of(expand_rules(k_, e));
            TypeInfo t{DType::I32, true, true};
            for (const auto& a : n.args) t = join_info(t, of(a));
            static const std::set<std::string> int_ok = {"min", "max", "abs"};
            if (t.known && !int_ok.count(n.function) && !is_float(t.type))
              return t.weak ? TypeInfo{DType::F64, true, true} : strong(DType::F64);
            return t;
          } else if constexpr (std::is_same_v<T, Reduction>) {
            bound_.insert(n.iname);
            TypeInfo t = of(n.body);
            bound_.erase(n.iname);
            return t;
          } else {
            return lookup(n.array);
          }
        },
        e->node);
  }

 private:
  TypeInfo lookup(const std::string& name) const {
    auto it = env_.find(name);
    if (it == env_.end() || it->second == DType::Runtime) return {};
    return strong(it->second);
  }

  const Kernel& k_;
  std::map<std::string, DType> env_;
  mutable std::set<std::string> bound_;
};

std::map<std::string, DType> type_env(const Kernel& k) {
  std::map<std::string, DType> env;
  for (const auto& a : k.args) env[a.name] = a.dtype;
  for (const auto& [n, t] : k.temps) env[n] = t.dtype;
  return env;
}

}  // namespace

DType expression_type(const Kernel& k, const ExprPtr& e) { return resolve(Typer(k, type_env(k)).of(e)); }

Kernel infer_types(const Kernel& k, const std::map<std::string, DType>& bindings) {
  Kernel r = k;
  for (auto& a : r.args) {
    auto it = bindings.find(a.name);
    if (it != bindings.end() && it->second != DType::Runtime) {
      if (a.dtype != DType::Runtime && a.dtype != it->second)
        throw Error(Errc::TypeConflict, "'" + a.name + "' declared " + std::string(dtype_name(a.dtype)) +
                                            " but bound to " + std::string(dtype_name(it->second)));
      a.dtype = it->second;
    }
    if (a.kind == ArgSpec::Kind::Value && a.dtype == DType::Runtime) a.dtype = DType::I32;
  }

  std::set<std::string> fixed;
  for (const auto& a : r.args)
    if (a.dtype != DType::Runtime) fixed.insert(a.name);
  for (const auto& [n, t] : r.temps)
    if (t.dtype != DType::Runtime) fixed.insert(n);

  std::map<std::string, DType> inferred;
  bool changed = true;
  while (changed) {
    changed = false;
    auto env = type_env(r);
    for (const auto& [n, t] : inferred) env[n] = t;
    Typer typer(r, env);
    std::map<std::string, std::vector<TypeInfo>> per_target;
    for (const auto& insn : r.instructions) per_target[insn.target()].push_back(typer.of(insn.rhs));
    for (const auto& [target, infos] : per_target) {
      if (fixed.count(target)) continue;
      std::optional<DType> result;
      TypeInfo weak_join;
      bool any_weak = false;
      for (const auto& info : infos) {
        if (!info.known) continue;
        if (info.weak) {
          weak_join = any_weak ? join_info(weak_join, info) : info;
          any_weak = true;
          continue;
        }
        if (result && *result != info.type)
          throw Error(Errc::TypeConflict, "'" + target + "' inferred as both " + std::string(dtype_name(*result)) +
                                              " and " + std::string(dtype_name(info.type)));
        result = info.type;
      }
      if (!result && any_weak) result = resolve(weak_join);
      if (!result) continue;
      auto it = inferred.find(target);
      if (it == inferred.end() || it->second != *result) {
        inferred[target] = *result;
        changed = true;
      }
    }
  }
  for (auto& a : r.args) {
    if (a.dtype != DType::Runtime) continue;
    auto it = inferred.find(a.name);
    if (it != inferred.end()) a.dtype = it->second;
  }
  for (auto& [n, t] : r.temps) {
    if (t.dtype != DType::Runtime) continue;
    auto it = inferred.find(n);
    if (it != inferred.end()) t.dtype = it->second;
  }
  for (const auto& a : r.args)
    if (a.dtype == DType::Runtime) {
      bool read = false;
      for (const auto& insn : r.instructions)
        if (names_read(r, insn).count(a.name) || insn.target() == a.name) read = true;
      if (read) throw Error(Errc::Untypeable, "cannot determine the type of '" + a.name + "'");
    }
  for (const auto& [n, t] : r.temps)
    if (t.dtype == DType::Runtime) throw Error(Errc::Untypeable, "cannot determine the type of '" + n + "'");
  return r;
}

// }}}

// {{{ shapes

std::vector<DimTag> resolve_dim_tags(const std::vector<AffExpr>& shape, const std::vector<DimTag>& tags_in) {
  std::vector<DimTag> tags = tags_in;
  if (tags.empty()) tags.assign(shape.size(), DimTag::auto_stride());
  if (tags.size() != shape.size())
    throw Error(Errc::RankMismatch, "expected " + std::to_string(shape.size()) + " dim tags, got " +
                                        std::to_string(tags.size()));
  std::vector<std::size_t> autos;
  bool ordered = false;
  for (std::size_t d = 0; d < tags.size(); ++d) {
    auto& t = tags[d];
    if (t.kind == DimTag::Kind::Vec) {
      if (!shape[d].is_constant())
        throw Error(Errc::IllegalVecWidth, "vector axis length must be a constant");
      const int w = static_cast<int>(to_i64(shape[d].constant()));
      if (w != 2 && w != 4 && w != 8 && w != 16)
        throw Error(Errc::IllegalVecWidth, "vector width " + std::to_string(w) + " is not one of 2, 4, 8, 16");
      if (t.width != 0 && t.width != w) throw Error(Errc::IllegalVecWidth, "vec width does not match axis length");
      t.width = w;
    } else if (t.kind == DimTag::Kind::Sep) {
      if (!shape[d].is_constant()) throw Error(Errc::InvalidKernel, "separate axis length must be a constant");
    } else if (!t.stride) {
      autos.push_back(d);
      if (t.order >= 0) ordered = true;
    }
  }
  if (std::count_if(tags.begin(), tags.end(), [](const DimTag& t) { return t.kind == DimTag::Kind::Vec; }) > 1)
    throw Error(Errc::IllegalVecWidth, "at most one vector axis per array");
  // Fastest-varying first.
  std::vector<std::size_t> fast = autos;
  if (ordered) {
    std::stable_sort(fast.begin(), fast.end(), [&](std::size_t a, std::size_t b) {
      const int oa = tags[a].order < 0 ? 1 << 20 : tags[a].order;
      const int ob = tags[b].order < 0 ? 1 << 20 : tags[b].order;
      return oa < ob;
    });
  } else {
    std::reverse(fast.begin(), fast.end());
  }
  std::optional<AffExpr> s = AffExpr(1);
  for (std::size_t d : fast) {
    if (!s) throw Error(Errc::NonAffine, "stride would be a product of parameters");
    tags[d].stride = *s;
    tags[d].order = -1;
    if (s->is_constant())
      s = shape[d] * s->constant();
    else if (shape[d].is_constant())
      s = *s * shape[d].constant();
    else
      s.reset();
  }
  return tags;
}

namespace {

AffExpr pick_larger(const PolySet& ctx, const AffExpr& a, const AffExpr& b) {
  if (implies(ctx, Constraint::ge(a - b))) return a;
  if (implies(ctx, Constraint::ge(b - a))) return b;
  throw Error(Errc::Unbounded, "array extent is the maximum of " + a.to_string() + " and " + b.to_string());
}

}  // namespace

Kernel infer_shapes(const Kernel& k) {
  Kernel r = k;
  std::map<std::string, std::vector<std::optional<AffExpr>>> extents;
  for (const auto& insn : k.instructions) {
    std::vector<const Subscript*> subs;
    ExprPtr lhs = expand_rules(k, insn.assignee), rhs = expand_rules(k, insn.rhs);
    for (const ExprPtr& e : {lhs, rhs})
      for (const Subscript* s : subscripts(e)) subs.push_back(s);
    if (subs.empty()) continue;
    std::optional<PolySet> dom;
    bool empty = false;
    for (const Subscript* s : subs) {
      const ArgSpec* a = k.find_arg(s->array);
      if (!a || a->shape) continue;
      if (!dom) {
        dom = instruction_domain(k, insn);
        empty = is_empty(*dom);
      }
      auto& ext = extents[s->array];
      if (ext.empty()) ext.resize(s->index.size());
      if (ext.size() != s->index.size())
        throw Error(Errc::RankMismatch, "'" + s->array + "' indexed with differing ranks");
      if (empty) continue;
      for (std::size_t d = 0; d < s->index.size(); ++d) {
        auto aff = to_affine(s->index[d]);
        if (!aff) throw Error(Errc::NonAffineIndex, "index '" + to_text(s->index[d]) + "' of '" + s->array +
                                                          "' is not affine; declare its shape");
        AffExpr hi = static_max(*dom, *aff) + AffExpr(1);
        ext[d] = ext[d] ? pick_larger(k.assumptions, *ext[d], hi) : hi;
      }
    }
  }
  for (auto& a : r.args) {
    if (a.kind != ArgSpec::Kind::GlobalArray) continue;
    if (!a.shape) {
      auto it = extents.find(a.name);
      if (it == extents.end()) continue;
      std::vector<AffExpr> shape;
      for (const auto& e : it->second) shape.push_back(e ? *e : AffExpr(0));
      a.shape = std::move(shape);
    }
    a.dim_tags = resolve_dim_tags(*a.shape, a.dim_tags);
  }
  return r;
}

// }}}

// {{{ DOT

std::string dep_graph_dot(const Kernel& k) {
  std::ostringstream os;
  os << "digraph " << k.name << " {\n";
  std::map<std::vector<std::string>, std::vector<std::string>> clusters;
  std::vector<std::string> loose;
  for (const auto& insn : k.instructions) {
    std::vector<std::string> key(insn.within_inames.begin(), insn.within_inames.end());
    if (key.empty())
      loose.push_back(insn.id);
    else
      clusters[key].push_back(insn.id);
  }
  int idx = 0;
  for (const auto& [key, ids] : clusters) {
    os << "  subgraph cluster_" << idx++ << " {\n    label=\"";
    for (std::size_t i = 0; i < key.size(); ++i) os << (i ? ", " : "") << key[i];
    os << "\";\n";
    for (const auto& id : ids) os << "    " << id << ";\n";
    os << "  }\n";
  }
  for (const auto& id : loose) os << "  " << id << ";\n";
  for (const auto& insn : k.instructions)
    for (const auto& d : insn.depends_on) {
      os << "  " << d << " -> " << insn.id;
      if (insn.heuristic_deps.count(d)) os << " [style=dashed, label=\"heuristic\"]";
      os << ";\n";
    }
  os << "}\n";
  return os.str();
}

// }}}

}  // namespace kgen
