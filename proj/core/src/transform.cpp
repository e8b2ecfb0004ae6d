#include "kgen/transform.hpp"

#include <algorithm>

#include "kgen/analysis.hpp"
#include "kgen/frontend.hpp"

namespace kgen {

namespace {

bool name_in_use(const Kernel& k, const std::string& n) {
  return k.domain.knows(n) || k.assumptions.knows(n) || k.find_arg(n) || k.temps.count(n) || k.rules.count(n);
}

std::vector<std::string> split_list(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Replaces a reduction over `old` by nested reductions over `outer`, `inner`.
ExprPtr split_reductions(const ExprPtr& e, const std::string& old, const std::string& outer, const std::string& inner,
                         const ExprPtr& value) {
  return rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
    const auto* r = x->as<Reduction>();
    if (!r || r->iname != old) return nullptr;
    ExprPtr body = substitute(split_reductions(r->body, old, outer, inner, value), {{old, value}});
    return make_reduction(r->op, outer, make_reduction(r->op, inner, body));
  });
}

}  // namespace

// {{{ split_iname

Kernel split_iname(const Kernel& k, const SplitSpec& spec) {
  if (!k.is_iname(spec.old)) throw Error(Errc::UnknownIname, "'" + spec.old + "' is not an iname");
  if (spec.length < 1) throw Error(Errc::InvalidKernel, "split length must be positive");
  const std::string outer = spec.outer.empty() ? spec.old + "_outer" : spec.outer;
  const std::string inner = spec.inner.empty() ? spec.old + "_inner" : spec.inner;
  for (const auto& n : {outer, inner})
    if (name_in_use(k, n)) throw Error(Errc::NameCollision, "name '" + n + "' is already in use");
  if (outer == inner) throw Error(Errc::NameCollision, "outer and inner names coincide");
  const InameTag tag = k.tag_of(spec.old);
  if (tag.kind != InameTag::Kind::None)
    throw Error(Errc::InvalidKernel, "cannot split '" + spec.old + "' tagged " + tag.to_string());

  Kernel r = k;
  const auto& vars = k.domain.set_vars();
  const std::size_t pos = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), spec.old) - vars.begin());
  PolySet d = k.domain.with_set_var(outer, pos).with_set_var(inner, pos + 1);
  const Int len(spec.length);
  d = d.with_constraints({
      Constraint::ge(AffExpr::variable(inner)),
      Constraint::ge(AffExpr(len - 1) - AffExpr::variable(inner)),
      Constraint::eq(AffExpr::variable(spec.old) - AffExpr::variable(inner) - AffExpr::variable(outer, len)),
  });
  r.domain = project_out(d, spec.old);

  const ExprPtr value =
      make_binary(BinOp::Add, make_var(inner), make_binary(BinOp::Mul, make_var(outer), make_int(spec.length)));
  const std::map<std::string, ExprPtr> subst = {{spec.old, value}};
  for (auto& insn : r.instructions) {
    insn.assignee = substitute(insn.assignee, subst);
    insn.rhs = substitute(split_reductions(insn.rhs, spec.old, outer, inner, value), subst);
    if (insn.within_inames.erase(spec.old)) {
      insn.within_inames.insert(outer);
      insn.within_inames.insert(inner);
    }
  }
  std::vector<std::string> prio;
  for (const auto& n : r.loop_priority) {
    if (n == spec.old) {
      prio.push_back(outer);
      prio.push_back(inner);
    } else {
      prio.push_back(n);
    }
  }
  r.loop_priority = std::move(prio);
  r.iname_tags.erase(spec.old);
  return r;
}

Kernel split_iname(const Kernel& k, const std::string& old, std::int64_t length) {
  return split_iname(k, SplitSpec{old, length, "", ""});
}

// }}}

// {{{ tags and priority

Kernel tag_inames(const Kernel& k, const std::map<std::string, InameTag>& tags) {
  Kernel r = k;
  for (const auto& [iname, tag] : tags) {
    if (!k.is_iname(iname)) throw Error(Errc::UnknownIname, "'" + iname + "' is not an iname");
    if (tag.kind == InameTag::Kind::Unroll || tag.kind == InameTag::Kind::ILP || tag.kind == InameTag::Kind::Vec) {
      const PolySet full = k.full_domain();
      QuasiAff lo = static_lower(full, iname), hi = static_upper(full, iname);
      if (!lo.is_constant() || !hi.is_constant())
        throw Error(Errc::NonConstantTripCount, "'" + iname + "' tagged " + tag.to_string() +
                                                    " needs a constant trip count");
    }
    if (tag.is_parallel() || tag.kind == InameTag::Kind::ILP || tag.kind == InameTag::Kind::Vec) {
      for (const auto& insn : k.instructions)
        if (reduction_inames(insn.rhs).count(iname))
          throw Error(Errc::InvalidKernel, "reduction iname '" + iname + "' cannot be tagged " + tag.to_string());
    }
    if (tag.kind == InameTag::Kind::None)
      r.iname_tags.erase(iname);
    else
      r.iname_tags[iname] = tag;
  }
  for (const auto& insn : r.instructions) {
    std::map<std::string, std::string> owner;
    for (const auto& n : r.all_inames_of(insn)) {
      const InameTag t = r.tag_of(n);
      if (!t.is_parallel()) continue;
      auto [it, fresh] = owner.emplace(t.to_string(), n);
      if (!fresh)
        throw Error(Errc::AxisConflict, "inames '" + it->second + "' and '" + n + "' both map to " + t.to_string() +
                                            " in '" + insn.id + "'");
    }
  }
  return r;
}

Kernel tag_inames(const Kernel& k, const std::string& spec) {
  std::map<std::string, InameTag> tags;
  for (const auto& item : split_list(spec, ",")) {
    auto sep = item.find_first_of(":=");
    if (sep == std::string::npos) throw SyntaxError(0, "expected 'iname:tag', got '" + item + "'");
    tags[item.substr(0, sep)] = parse_iname_tag(item.substr(sep + 1));
  }
  return tag_inames(k, tags);
}

Kernel set_loop_priority(const Kernel& k, const std::vector<std::string>& order) {
  for (const auto& n : order)
    if (!k.is_iname(n)) throw Error(Errc::UnknownIname, "'" + n + "' is not an iname");
  Kernel r = k;
  r.loop_priority = order;
  return r;
}

// }}}

// {{{ array axes

Kernel tag_array_axes(const Kernel& k, const std::string& array, const std::vector<DimTag>& tags) {
  Kernel r = k;
  ArgSpec* a = r.find_arg(array);
  if (!a || a->kind != ArgSpec::Kind::GlobalArray) throw Error(Errc::UnknownArray, "'" + array + "' is not an array argument");
  if (!a->shape) throw Error(Errc::InvalidKernel, "shape of '" + array + "' is unknown");
  if (tags.size() != a->shape->size())
    throw Error(Errc::RankMismatch, "'" + array + "' has rank " + std::to_string(a->shape->size()) + ", got " +
                                        std::to_string(tags.size()) + " tags");
  a->dim_tags = resolve_dim_tags(*a->shape, tags);
  return r;
}

Kernel tag_array_axes(const Kernel& k, const std::string& array, const std::string& tags) {
  std::vector<DimTag> parsed;
  for (const auto& t : split_list(tags, ",")) parsed.push_back(parse_dim_tag(t));
  return tag_array_axes(k, array, parsed);
}

// }}}

// {{{ parameters

Kernel assume(const Kernel& k, const std::string& text) {
  PolySet extra = parse_param_set(text);
  for (const auto& p : extra.params()) {
    const ArgSpec* a = k.find_arg(p);
    if (!k.domain.has_param(p) && !k.assumptions.has_param(p) && !(a && a->kind == ArgSpec::Kind::Value))
      throw Error(Errc::UnknownParameter, "'" + p + "' is not a parameter");
  }
  Kernel r = k;
  r.assumptions = intersect(k.assumptions, extra);
  return r;
}

Kernel fix_parameters(const Kernel& k, const std::string& name, std::int64_t value) {
  const ArgSpec* arg = k.find_arg(name);
  const bool is_param = k.domain.has_param(name) || k.assumptions.has_param(name) ||
                        (arg && arg->kind == ArgSpec::Kind::Value);
  if (!is_param) throw Error(Errc::UnknownParameter, "'" + name + "' is not a parameter");
  Kernel r = k;
  const Int v(value);
  r.domain = k.domain.has_param(name) ? k.domain.fix(name, v) : k.domain;
  r.assumptions = k.assumptions.has_param(name) ? k.assumptions.fix(name, v) : k.assumptions;
  const std::map<std::string, ExprPtr> subst = {{name, make_int(value)}};
  for (auto& insn : r.instructions) {
    insn.assignee = substitute(insn.assignee, subst);
    insn.rhs = substitute(insn.rhs, subst);
  }
  for (auto& [_, rule] : r.rules)
    if (std::find(rule.params.begin(), rule.params.end(), name) == rule.params.end())
      rule.body = substitute(rule.body, subst);
  auto fix_aff = [&](AffExpr& e) { e = e.substitute(name, AffExpr(v)); };
  for (auto& a : r.args) {
    if (a.shape)
      for (auto& e : *a.shape) fix_aff(e);
    for (auto& t : a.dim_tags)
      if (t.stride) fix_aff(*t.stride);
  }
  for (auto& [_, t] : r.temps) {
    for (auto& e : t.shape) fix_aff(e);
    for (auto& e : t.base_indices) fix_aff(e);
  }
  std::erase_if(r.args, [&](const ArgSpec& a) { return a.name == name && a.kind == ArgSpec::Kind::Value; });
  return r;
}

// }}}

}  // namespace kgen
