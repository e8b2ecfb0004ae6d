#include <algorithm>

#include "kgen/analysis.hpp"
#include "kgen/transform.hpp"

namespace kgen {

namespace {

bool name_in_use(const Kernel& k, const std::string& n) {
  return k.domain.knows(n) || k.assumptions.knows(n) || k.find_arg(n) || k.temps.count(n) || k.rules.count(n);
}

struct Use {
  std::string insn;
  std::vector<AffExpr> args;
};

// The instruction's domain with every non-footprint iname reclassified as
// a parameter, so bounds come out in terms of the enclosing loops.
PolySet footprint_view(const Kernel& k, const Instruction& insn, const std::vector<std::string>& footprint) {
  PolySet d = instruction_domain(k, insn);
  std::vector<std::string> vars, params = d.params();
  for (const auto& v : d.set_vars()) {
    if (std::find(footprint.begin(), footprint.end(), v) != footprint.end())
      vars.push_back(v);
    else
      params.push_back(v);
  }
  return PolySet(vars, params, d.constraints());
}

// Smaller (larger when `upper`) of two affine forms under `ctx`.
AffExpr pick(const PolySet& ctx, const AffExpr& a, const AffExpr& b, bool upper, const std::string& what) {
  if (a == b) return a;
  const AffExpr diff = upper ? a - b : b - a;
  if (implies(ctx, Constraint::ge(diff))) return a;
  if (implies(ctx, Constraint::ge(-diff))) return b;
  throw Error(Errc::NonAffineFootprint, "footprint " + what + " is not a single affine expression: " + a.to_string() +
                                            " vs. " + b.to_string());
}

// Tightest lower bound of `e` over `view` in terms of its parameters.
AffExpr footprint_min(const PolySet& view, const AffExpr& e) {
  const std::string probe = "__kgen_fp";
  PolySet s = view.with_set_var(probe).with_constraint(Constraint::eq(AffExpr::variable(probe) - e));
  for (const auto& v : view.set_vars()) s = project_out(s, v);
  const LoopBounds b = bounds(s, probe, s.params());
  std::vector<AffExpr> cands;
  for (const auto& c : b.lower)
    if (c.value.is_affine()) cands.push_back(c.value.numerator);
  for (const auto& c : cands) {
    bool tightest = true;
    for (const auto& d : cands)
      if (!(c == d) && !implies(view, Constraint::ge(c - d))) tightest = false;
    if (tightest) return c;
  }
  throw Error(Errc::NonAffineFootprint, "no affine lower bound for '" + e.to_string() + "'");
}

}  // namespace

Kernel precompute(const Kernel& k, const std::string& rule_name, const std::vector<std::string>& footprint,
                  AddressSpace space) {
  auto rit = k.rules.find(rule_name);
  if (rit == k.rules.end()) throw Error(Errc::UnknownRule, "no substitution rule named '" + rule_name + "'");
  const SubstitutionRule rule = rit->second;
  for (const auto& f : footprint)
    if (!k.is_iname(f)) throw Error(Errc::UnknownIname, "footprint iname '" + f + "' does not exist");
  if (k.temps.count(rule_name) || k.find_arg(rule_name))
    throw Error(Errc::NameCollision, "temporary name '" + rule_name + "' is already in use");

  // Collect uses.
  std::vector<Use> uses;
  for (const auto& insn : k.instructions) {
    for (const ExprPtr& e : {insn.assignee, insn.rhs}) {
      visit(e, [&](const ExprPtr& x) {
        const auto* c = x->as<Call>();
        if (!c || c->function != rule_name) return;
        if (c->args.size() != rule.params.size())
          throw Error(Errc::InvalidKernel, "rule '" + rule_name + "' called with the wrong number of arguments");
        Use u{insn.id, {}};
        for (const auto& a : c->args) {
          auto aff = to_affine(a);
          if (!aff) throw Error(Errc::NonAffineFootprint, "argument '" + to_text(a) + "' of '" + rule_name + "' is not affine");
          u.args.push_back(*aff);
        }
        uses.push_back(std::move(u));
      });
    }
  }
  Kernel r = k;
  r.rules.erase(rule_name);
  if (uses.empty()) return r;

  const std::size_t rank = rule.params.size();
  const PolySet ctx = k.full_domain();

  // Storage origin and extent per axis.
  std::vector<std::optional<AffExpr>> base(rank);
  for (const auto& u : uses) {
    const PolySet view = footprint_view(k, *k.find_insn(u.insn), footprint);
    for (std::size_t j = 0; j < rank; ++j) {
      AffExpr lo = footprint_min(view, u.args[j]);
      base[j] = base[j] ? pick(ctx, *base[j], lo, false, "origin") : lo;
    }
  }
  std::vector<AffExpr> extent(rank);
  std::vector<bool> have_extent(rank, false);
  for (const auto& u : uses) {
    const PolySet dom = instruction_domain(k, *k.find_insn(u.insn));
    for (std::size_t j = 0; j < rank; ++j) {
      AffExpr hi = static_max(dom, u.args[j] - *base[j]) + AffExpr(1);
      extent[j] = have_extent[j] ? pick(k.assumptions, extent[j], hi, true, "extent") : hi;
      have_extent[j] = true;
    }
  }
  std::set<std::string> base_inames;
  for (std::size_t j = 0; j < rank; ++j)
    for (const auto& v : base[j]->variables()) {
      if (std::find(footprint.begin(), footprint.end(), v) != footprint.end())
        throw Error(Errc::NonAffineFootprint, "origin depends on footprint iname '" + v + "'");
      if (k.is_iname(v)) base_inames.insert(v);
    }
  // The fill runs outside the using instruction, so it cannot follow a
  // reduction loop of that instruction.
  for (const auto& u : uses)
    for (const auto& v : reduction_inames(k.find_insn(u.insn)->rhs))
      if (base_inames.count(v))
        throw Error(Errc::InvalidKernel, "origin of '" + rule_name + "' depends on reduction iname '" + v +
                                             "' of instruction '" + u.insn + "'");

  // Fill inames: one per storage axis, named after the footprint iname that
  // drives it.
  std::vector<std::string> fill_inames(rank);
  std::set<std::string> taken;
  for (std::size_t j = 0; j < rank; ++j) {
    std::string driver;
    for (const auto& f : footprint)
      if (uses.front().args[j].depends_on(f)) {
        driver = f;
        break;
      }
    std::string cand = rule_name + "_" + (driver.empty() ? "dim" + std::to_string(j) : driver);
    while (name_in_use(k, cand) || taken.count(cand)) cand += "_";
    taken.insert(cand);
    fill_inames[j] = cand;
  }

  // Fill domain: points of the footprint actually touched, in storage
  // coordinates, for every combination of the origin's inames. Several uses
  // are joined by keeping the constraints every use satisfies.
  std::vector<PolySet> per_use;
  for (const auto& u : uses) {
    PolySet d = instruction_domain(k, *k.find_insn(u.insn));
    for (std::size_t j = 0; j < rank; ++j)
      d = d.with_set_var(fill_inames[j])
              .with_constraint(Constraint::eq(AffExpr::variable(fill_inames[j]) - (u.args[j] - *base[j])));
    std::vector<std::string> keep(fill_inames.begin(), fill_inames.end());
    keep.insert(keep.end(), base_inames.begin(), base_inames.end());
    per_use.push_back(project_onto(d, keep).simplified());
  }
  std::vector<Constraint> joined;
  for (std::size_t j = 0; j < rank; ++j) {
    joined.push_back(Constraint::ge(AffExpr::variable(fill_inames[j])));
    joined.push_back(Constraint::ge(extent[j] - AffExpr(1) - AffExpr::variable(fill_inames[j])));
  }
  for (const auto& p : per_use)
    for (const auto& c : p.constraints()) {
      if (std::find(joined.begin(), joined.end(), c) != joined.end()) continue;
      if (std::all_of(per_use.begin(), per_use.end(), [&](const PolySet& q) { return implies(q, c); }))
        joined.push_back(c);
    }
  const PolySet fill(per_use.front().set_vars(), per_use.front().params(), joined);

  // Extend the kernel domain; the fill must not restrict existing inames.
  PolySet dom = k.domain;
  for (const auto& n : fill_inames) dom = dom.with_set_var(n);
  for (const auto& c : fill.constraints()) {
    bool mentions_fill = std::any_of(fill_inames.begin(), fill_inames.end(), [&](const std::string& n) { return c.involves(n); });
    if (mentions_fill) dom = dom.with_constraint(c);
  }
  PolySet back = project_onto(intersect(dom, k.assumptions), k.domain.set_vars());
  for (const auto& c : back.constraints())
    if (!implies(k.full_domain(), c))
      throw Error(Errc::NonAffineFootprint, "footprint of '" + rule_name + "' does not cover the loop domain");
  r.domain = dom.simplified();

  TempVar t;
  t.name = rule_name;
  t.shape = extent;
  t.space = space;
  for (std::size_t j = 0; j < rank; ++j) t.base_indices.push_back(*base[j]);
  r.temps.emplace(rule_name, t);

  // Fill instruction.
  Instruction fi;
  fi.id = rule_name + "_fill";
  while (k.find_insn(fi.id)) fi.id += "_";
  std::vector<ExprPtr> idx;
  std::map<std::string, ExprPtr> formals;
  for (std::size_t j = 0; j < rank; ++j) {
    idx.push_back(make_var(fill_inames[j]));
    formals[rule.params[j]] = affine_to_expr(AffExpr::variable(fill_inames[j]) + *base[j]);
  }
  fi.assignee = make_subscript(rule_name, idx);
  fi.rhs = substitute(rule.body, formals);
  fi.within_inames.insert(fill_inames.begin(), fill_inames.end());
  fi.within_inames.insert(base_inames.begin(), base_inames.end());
  try {
    r.temps[rule_name].dtype = expression_type(r, expand_rules(r, fi.rhs));
  } catch (const Error&) {
    // Left for infer_types once argument types are bound.
  }
  const auto reads = names_read(r, fi);
  for (const auto& insn : k.instructions)
    if (reads.count(insn.target())) fi.depends_on.insert(insn.id);

  if (space == AddressSpace::Local) {
    for (std::size_t j = 0; j < rank; ++j)
      for (const auto& f : footprint)
        if (uses.front().args[j].depends_on(f) && k.tag_of(f).kind == InameTag::Kind::Local) {
          r.iname_tags[fill_inames[j]] = k.tag_of(f);
          break;
        }
  }

  // Replace uses by loads.
  for (auto& insn : r.instructions) {
    bool used = false;
    auto replace = [&](const ExprPtr& e) {
      return rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
        const auto* c = x->as<Call>();
        if (!c || c->function != rule_name) return nullptr;
        used = true;
        std::vector<ExprPtr> load;
        for (std::size_t j = 0; j < rank; ++j) load.push_back(affine_to_expr(*to_affine(c->args[j]) - *base[j]));
        return make_subscript(rule_name, load);
      });
    };
    insn.assignee = replace(insn.assignee);
    insn.rhs = replace(insn.rhs);
    if (used) insn.depends_on.insert(fi.id);
  }
  // Insert the fill before its first reader.
  auto first = std::find_if(r.instructions.begin(), r.instructions.end(),
                            [&](const Instruction& i) { return i.depends_on.count(fi.id) != 0; });
  r.instructions.insert(first, std::move(fi));
  return r;
}

Kernel add_prefetch(const Kernel& k, const std::string& array, const std::vector<std::string>& sweep,
                    AddressSpace space) {
  const ArgSpec* a = k.find_arg(array);
  if (!a || a->kind != ArgSpec::Kind::GlobalArray) throw Error(Errc::UnknownArray, "'" + array + "' is not an array argument");
  for (const auto& insn : k.instructions)
    if (insn.target() == array)
      throw Error(Errc::InvalidKernel, "cannot prefetch '" + array + "': it is written by '" + insn.id + "'");
  const std::string rule_name = array + "_fetch";
  if (k.rules.count(rule_name)) throw Error(Errc::NameCollision, "rule '" + rule_name + "' already exists");

  std::size_t rank = a->shape ? a->shape->size() : 0;
  Kernel r = k;
  for (auto& insn : r.instructions) {
    insn.rhs = rewrite(insn.rhs, [&](const ExprPtr& x) -> ExprPtr {
      const auto* s = x->as<Subscript>();
      if (!s || s->array != array) return nullptr;
      rank = s->index.size();
      return make_call(rule_name, s->index);
    });
  }
  SubstitutionRule rule;
  rule.name = rule_name;
  std::vector<ExprPtr> idx;
  for (std::size_t j = 0; j < rank; ++j) {
    rule.params.push_back("d" + std::to_string(j));
    idx.push_back(make_var(rule.params.back()));
  }
  rule.body = make_subscript(array, idx);
  r.rules.emplace(rule_name, rule);
  return precompute(r, rule_name, sweep, space);
}

}  // namespace kgen
