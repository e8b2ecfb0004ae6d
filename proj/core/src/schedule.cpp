#include "kgen/schedule.hpp"

#include <algorithm>
#include <sstream>

#include "kgen/analysis.hpp"

namespace kgen {

std::string_view loop_kind_name(LoopKind k) {
  switch (k) {
    case LoopKind::Sequential: return "sequential";
    case LoopKind::Unrolled: return "unrolled";
    case LoopKind::ILP: return "ilp";
    case LoopKind::VecLane: return "vec";
    case LoopKind::GroupAxis: return "group";
    case LoopKind::LocalAxis: return "local";
  }
  return "?";
}

ScheduleItem ScheduleItem::open(std::string iname, LoopKind kind, LoopRange range) {
  ScheduleItem it;
  it.kind = Kind::OpenLoop;
  it.name = std::move(iname);
  it.loop_kind = kind;
  it.range = std::move(range);
  return it;
}

ScheduleItem ScheduleItem::close(std::string iname) {
  ScheduleItem it;
  it.kind = Kind::CloseLoop;
  it.name = std::move(iname);
  return it;
}

ScheduleItem ScheduleItem::run(std::string id) {
  ScheduleItem it;
  it.kind = Kind::Run;
  it.name = std::move(id);
  return it;
}

ScheduleItem ScheduleItem::barrier() {
  ScheduleItem it;
  it.kind = Kind::Barrier;
  it.name = "local";
  return it;
}

// {{{ rendering

std::string render_affine(const AffExpr& e) {
  std::vector<std::string> parts;
  if (e.constant() != 0 || e.is_constant()) parts.push_back(e.constant().str());
  for (const auto& [name, c] : e.coefficients()) parts.push_back(c == 1 ? name : c.str() + " * " + name);
  if (parts.size() == 1) return parts.front();
  std::string out = "(";
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " + " : "") + parts[i];
  return out + ")";
}

std::string render_bound(const QuasiAff& q) {
  if (q.denominator == 1) return render_affine(q.numerator);
  if (q.is_constant()) return floor_div(q.numerator.constant(), q.denominator).str();
  const Int whole = floor_div(q.numerator.constant(), q.denominator);
  AffExpr rest = q.numerator;
  rest.set_constant(q.numerator.constant() - whole * q.denominator);
  std::string out = "(" + render_affine(rest) + " / " + q.denominator.str() + ")";
  if (whole != 0) out = "(" + whole.str() + " + " + out + ")";
  return out;
}

std::string render_constraint(const Constraint& c) {
  const std::string e = render_affine(c.expr());
  switch (c.kind()) {
    case ConstraintKind::Eq: return e + " == 0";
    case ConstraintKind::Ge: return e + " >= 0";
    case ConstraintKind::Div: return e + " % " + c.modulus().str() + " == 0";
  }
  return e;
}

// }}}

namespace {

bool is_grid(const InameTag& t) { return t.is_parallel(); }

std::vector<std::string> loop_inames(const Kernel& k, const Instruction& insn) {
  std::vector<std::string> out;
  for (const auto& n : insn.within_inames)
    if (!is_grid(k.tag_of(n))) out.push_back(n);
  return out;
}

LoopKind kind_of(const InameTag& t) {
  switch (t.kind) {
    case InameTag::Kind::Unroll: return LoopKind::Unrolled;
    case InameTag::Kind::ILP: return LoopKind::ILP;
    case InameTag::Kind::Vec: return LoopKind::VecLane;
    case InameTag::Kind::Group: return LoopKind::GroupAxis;
    case InameTag::Kind::Local: return LoopKind::LocalAxis;
    case InameTag::Kind::None: break;
  }
  return LoopKind::Sequential;
}

const BoundCandidate& simplest(const std::vector<BoundCandidate>& cands) {
  const BoundCandidate* best = &cands.front();
  for (const auto& c : cands)
    if (c.value.numerator.coefficients().size() < best->value.numerator.coefficients().size()) best = &c;
  return *best;
}

LoopRange choose_range(const PolySet& full, const std::string& x, const std::vector<std::string>& outer) {
  const LoopBounds b = bounds(full, x, outer);
  LoopRange r;
  const BoundCandidate& lo = simplest(b.lower);
  const BoundCandidate& hi = simplest(b.upper);
  r.lower = lo.value;
  r.upper = hi.value;
  r.stride = b.stride;
  r.residue = b.residue;
  r.implied = {lo.source, hi.source};
  if (b.stride > 1) r.implied.push_back(Constraint::div(AffExpr::variable(x) - AffExpr(b.residue), b.stride));
  return r;
}

// a >= b for all parameter values satisfying `ctx`.
bool quasi_ge(const PolySet& ctx, const QuasiAff& a, const QuasiAff& b) {
  if (a == b) return true;
  PolySet s = ctx.with_set_var("__kgen_qa").with_set_var("__kgen_qb");
  auto pin = [&](const std::string& v, const QuasiAff& q) {
    const AffExpr dv = AffExpr::variable(v, q.denominator);
    s = s.with_constraints({Constraint::ge(q.numerator - dv),
                            Constraint::ge(dv + AffExpr(q.denominator - 1) - q.numerator)});
  };
  pin("__kgen_qa", a);
  pin("__kgen_qb", b);
  return implies(s, Constraint::ge(AffExpr::variable("__kgen_qa") - AffExpr::variable("__kgen_qb")));
}

void compute_grid(ScheduledKernel& s) {
  const Kernel& k = s.kernel;
  const PolySet full = k.full_domain();
  for (const auto& [iname, tag] : k.iname_tags) {
    if (!is_grid(tag) || !k.is_iname(iname)) continue;
    const QuasiAff lo = static_lower(full, iname);
    const QuasiAff hi = static_upper(full, iname);
    AffExpr base;
    if (lo.is_affine())
      base = lo.numerator;
    else if (lo.is_constant())
      base = AffExpr(floor_div(lo.numerator.constant(), lo.denominator));
    else
      throw Error(Errc::InvalidKernel, "lower bound of parallel iname '" + iname + "' is not affine");
    // hi - base + 1 as a single floor.
    QuasiAff size{hi.numerator + (AffExpr(1) - base) * hi.denominator, hi.denominator};
    s.grid_base[iname] = base;
    const std::string axis = tag.to_string();
    auto it = s.grid_sizes.find(axis);
    if (it == s.grid_sizes.end()) {
      s.grid_sizes.emplace(axis, size);
    } else if (!quasi_ge(k.assumptions, it->second, size)) {
      if (!quasi_ge(k.assumptions, size, it->second))
        throw Error(Errc::InvalidKernel, "cannot order the sizes of inames sharing axis " + axis);
      it->second = size;
    }
  }
}

// Index of the matching CloseLoop for the OpenLoop at `open`.
std::size_t matching_close(const std::vector<ScheduleItem>& items, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < items.size(); ++i) {
    if (items[i].kind == ScheduleItem::Kind::OpenLoop) ++depth;
    if (items[i].kind == ScheduleItem::Kind::CloseLoop && --depth == 0) return i;
  }
  throw Error(Errc::InvalidKernel, "unbalanced schedule");
}

// Enclosing OpenLoop indices, outermost first.
std::vector<std::size_t> enclosing(const std::vector<ScheduleItem>& items, std::size_t pos) {
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < pos; ++i) {
    if (items[i].kind == ScheduleItem::Kind::OpenLoop) stack.push_back(i);
    if (items[i].kind == ScheduleItem::Kind::CloseLoop) stack.pop_back();
  }
  return stack;
}

std::size_t item_end(const std::vector<ScheduleItem>& items, std::size_t pos) {
  return items[pos].kind == ScheduleItem::Kind::OpenLoop ? matching_close(items, pos) : pos;
}

// Whether a Barrier is a direct child of the body spanning (begin, end).
bool barrier_between(const std::vector<ScheduleItem>& items, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (items[i].kind == ScheduleItem::Kind::Barrier) return true;
    if (items[i].kind == ScheduleItem::Kind::OpenLoop) i = matching_close(items, i);
  }
  return false;
}

std::size_t find_run(const std::vector<ScheduleItem>& items, const std::string& id) {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].kind == ScheduleItem::Kind::Run && items[i].name == id) return i;
  throw Error(Errc::InvalidKernel, "instruction '" + id + "' is not scheduled");
}

std::set<std::string> local_inames(const Kernel& k) {
  std::set<std::string> out;
  for (const auto& [n, t] : k.iname_tags)
    if (t.kind == InameTag::Kind::Local) out.insert(n);
  return out;
}

// Private temporaries written under an ILP iname get a trailing axis.
Kernel expand_ilp(const Kernel& k) {
  Kernel r = k;
  const PolySet full = k.full_domain();
  for (const auto& [x, tag] : k.iname_tags) {
    if (tag.kind != InameTag::Kind::ILP || !k.is_iname(x)) continue;
    const QuasiAff lo = static_lower(full, x), hi = static_upper(full, x);
    if (!lo.is_constant() || !hi.is_constant())
      throw Error(Errc::NonConstantTripCount, "ilp iname '" + x + "' needs a constant trip count");
    const Int l = floor_div(lo.numerator.constant(), lo.denominator);
    const Int h = floor_div(hi.numerator.constant(), hi.denominator);
    for (auto& [name, t] : r.temps) {
      if (t.space != AddressSpace::Private) continue;
      bool written = false;
      for (const auto& insn : r.instructions)
        if (insn.target() == name && insn.within_inames.count(x)) written = true;
      if (!written) continue;
      const ExprPtr lane = affine_to_expr(AffExpr::variable(x) - AffExpr(l));
      auto widen = [&](const ExprPtr& e) {
        return rewrite(e, [&](const ExprPtr& n) -> ExprPtr {
          if (const auto* v = n->as<Variable>(); v && v->name == name) return make_subscript(name, {lane});
          if (const auto* s = n->as<Subscript>(); s && s->array == name) {
            auto idx = s->index;
            idx.push_back(lane);
            return make_subscript(name, idx);
          }
          return nullptr;
        });
      };
      for (auto& insn : r.instructions) {
        const bool touches = insn.target() == name || names_read(r, insn).count(name);
        if (!touches) continue;
        if (!insn.within_inames.count(x))
          throw Error(Errc::InvalidKernel, "temporary '" + name + "' is written under ilp iname '" + x +
                                               "' but used by '" + insn.id + "' outside it");
        insn.assignee = widen(insn.assignee);
        insn.rhs = widen(insn.rhs);
      }
      t.shape.push_back(AffExpr(h - l + 1));
      t.base_indices.push_back(AffExpr(l));
    }
  }
  return r;
}

}  // namespace

// {{{ linearize

ScheduledKernel linearize(const Kernel& k) {
  ScheduledKernel s;
  s.kernel = k;
  compute_grid(s);
  const PolySet full = k.full_domain();

  std::map<std::string, bool> constant_trip;
  auto has_constant_trip = [&](const std::string& x) {
    auto it = constant_trip.find(x);
    if (it != constant_trip.end()) return it->second;
    bool c = false;
    try {
      c = static_lower(full, x).is_constant() && static_upper(full, x).is_constant();
    } catch (const Error&) {
    }
    return constant_trip[x] = c;
  };
  auto priority = [&](const std::string& x) {
    auto it = std::find(k.loop_priority.begin(), k.loop_priority.end(), x);
    return static_cast<std::size_t>(it - k.loop_priority.begin());
  };
  auto is_expanded = [&](const std::string& x) {
    const auto kind = k.tag_of(x).kind;
    return kind == InameTag::Kind::Unroll || kind == InameTag::Kind::ILP || kind == InameTag::Kind::Vec;
  };

  std::vector<std::string> open;
  std::set<std::string> done;
  while (done.size() < k.instructions.size()) {
    std::vector<const Instruction*> ready;
    for (const auto& insn : k.instructions) {
      if (done.count(insn.id)) continue;
      bool ok = true;
      for (const auto& d : insn.depends_on)
        if (!done.count(d) && k.find_insn(d)) ok = false;
      if (ok) ready.push_back(&insn);
    }
    if (ready.empty()) {
      std::string blocked;
      for (const auto& insn : k.instructions)
        if (!done.count(insn.id)) blocked += (blocked.empty() ? "" : ", ") + insn.id;
      throw Error(Errc::SchedulingDeadlock, "no instruction can be scheduled; blocked: " + blocked);
    }
    const std::set<std::string> open_set(open.begin(), open.end());

    const Instruction* emit = nullptr;
    for (const auto* insn : ready) {
      const auto l = loop_inames(k, *insn);
      if (std::set<std::string>(l.begin(), l.end()) == open_set) {
        emit = insn;
        break;
      }
    }
    if (emit) {
      s.items.push_back(ScheduleItem::run(emit->id));
      done.insert(emit->id);
      continue;
    }

    const Instruction* target = nullptr;
    std::vector<std::string> cands;
    for (const auto* insn : ready) {
      const auto l = loop_inames(k, *insn);
      const std::set<std::string> ls(l.begin(), l.end());
      if (!std::includes(ls.begin(), ls.end(), open_set.begin(), open_set.end())) continue;
      target = insn;
      for (const auto& x : l)
        if (!open_set.count(x)) cands.push_back(x);
      break;
    }
    if (!target) {
      s.items.push_back(ScheduleItem::close(open.back()));
      open.pop_back();
      continue;
    }
    // Loops needed by more pending instructions go outside, so that they
    // can share one nest.
    auto sharers = [&](const std::string& x) {
      int n = 0;
      for (const auto& insn : k.instructions)
        if (!done.count(insn.id) && insn.within_inames.count(x)) ++n;
      return n;
    };
    auto key = [&](const std::string& x) {
      return std::make_tuple(priority(x), is_expanded(x), -sharers(x), has_constant_trip(x), x);
    };
    std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    if (cands.size() > 1) {
      const auto ka = key(cands[0]), kb = key(cands[1]);
      if (std::get<0>(ka) == std::get<0>(kb) && std::get<1>(ka) == std::get<1>(kb) &&
          std::get<2>(ka) == std::get<2>(kb) && std::get<3>(ka) == std::get<3>(kb)) {
        std::string w = "ambiguous loop nesting for '" + target->id + "': " + cands[0] + " and " + cands[1] +
                        " ordered alphabetically; use set_loop_priority";
        if (std::find(s.warnings.begin(), s.warnings.end(), w) == s.warnings.end()) s.warnings.push_back(w);
      }
    }
    const std::string x = cands.front();
    s.items.push_back(ScheduleItem::open(x, kind_of(k.tag_of(x)), choose_range(full, x, open)));
    open.push_back(x);
  }
  while (!open.empty()) {
    s.items.push_back(ScheduleItem::close(open.back()));
    open.pop_back();
  }

  // A temporary written and read under a common sequential iname must be
  // written and read in the same loop over it.
  for (const auto& w : k.instructions) {
    if (!k.temps.count(w.target())) continue;
    const auto cw = enclosing(s.items, find_run(s.items, w.id));
    for (const auto& r : k.instructions) {
      if (r.id == w.id || !names_read(k, r).count(w.target())) continue;
      const auto cr = enclosing(s.items, find_run(s.items, r.id));
      for (std::size_t a : cw)
        for (std::size_t b : cr)
          if (s.items[a].name == s.items[b].name && a != b)
            throw Error(Errc::SchedulingDeadlock, "'" + w.id + "' and '" + r.id + "' need one loop over '" +
                                                      s.items[a].name + "' but were placed in separate ones");
    }
  }
  return s;
}

// }}}

// {{{ barriers

ScheduledKernel insert_barriers(const ScheduledKernel& in) {
  ScheduledKernel s = in;
  const Kernel& k = s.kernel;
  std::set<std::string> local_temps;
  for (const auto& [n, t] : k.temps)
    if (t.space == AddressSpace::Local) local_temps.insert(n);
  if (local_temps.empty()) return s;

  // (writer, reader) pairs through local temporaries.
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& r : k.instructions) {
    const auto reads = names_read(k, r);
    for (const auto& w : k.instructions) {
      if (w.id == r.id || !local_temps.count(w.target()) || !reads.count(w.target())) continue;
      edges.emplace_back(w.id, r.id);
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    auto& items = s.items;
    std::vector<std::tuple<std::size_t, std::size_t>> pos;
    for (const auto& [w, r] : edges) pos.emplace_back(find_run(items, w), find_run(items, r));
    std::sort(pos.begin(), pos.end(), [](const auto& a, const auto& b) { return std::get<1>(a) < std::get<1>(b); });
    for (const auto& [pw, pr] : pos) {
      const auto cw_chain = enclosing(items, pw), cr_chain = enclosing(items, pr);
      std::size_t common = 0;
      while (common < cw_chain.size() && common < cr_chain.size() && cw_chain[common] == cr_chain[common]) ++common;
      const std::size_t cw = common < cw_chain.size() ? cw_chain[common] : pw;
      const std::size_t cr = common < cr_chain.size() ? cr_chain[common] : pr;
      if (cw < cr) {
        if (!barrier_between(items, item_end(items, cw) + 1, cr)) {
          items.insert(items.begin() + static_cast<std::ptrdiff_t>(cr), ScheduleItem::barrier());
          changed = true;
          break;
        }
      }
      if (common > 0) {
        // Next iteration of the shared loop rewrites what this one reads.
        const std::size_t open = cw_chain[common - 1];
        const std::size_t close = matching_close(items, open);
        const std::size_t first = std::min(cw, cr), last = std::max(cw, cr);
        if (!barrier_between(items, item_end(items, last) + 1, close) && !barrier_between(items, open + 1, first)) {
          items.insert(items.begin() + static_cast<std::ptrdiff_t>(close), ScheduleItem::barrier());
          changed = true;
          break;
        }
      }
    }
  }

  const auto locals = local_inames(k);
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    if (s.items[i].kind != ScheduleItem::Kind::Barrier) continue;
    for (std::size_t o : enclosing(s.items, i)) {
      const auto& it = s.items[o];
      std::vector<AffExpr> exprs = {it.range.lower.numerator, it.range.upper.numerator};
      for (const auto& g : it.guard) exprs.push_back(g.expr());
      for (const auto& e : exprs)
        for (const auto& v : e.variables())
          if (locals.count(v))
            throw Error(Errc::BarrierInsideIllegalContext,
                        "barrier inside loop '" + it.name + "' whose extent depends on work item iname '" + v + "'");
    }
  }
  return s;
}

// }}}

// {{{ guards

ScheduledKernel compute_guards(const ScheduledKernel& in) {
  ScheduledKernel s = in;
  const Kernel& k = s.kernel;
  const PolySet full = k.full_domain();
  auto& items = s.items;
  for (auto& it : items) it.guard.clear();

  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& it = items[i];
    if (it.kind == ScheduleItem::Kind::OpenLoop) {
      stack.push_back(i);
      continue;
    }
    if (it.kind == ScheduleItem::Kind::CloseLoop) {
      stack.pop_back();
      continue;
    }
    if (it.kind != ScheduleItem::Kind::Run) continue;
    const Instruction& insn = *k.find_insn(it.name);
    std::vector<std::string> inames(insn.within_inames.begin(), insn.within_inames.end());
    const PolySet dom = project_onto(full, inames).simplified();

    std::vector<Constraint> ctx = k.assumptions.constraints();
    for (std::size_t o : stack)
      for (const auto& c : items[o].range.implied) ctx.push_back(c);
    for (const auto& n : inames) {
      auto b = s.grid_base.find(n);
      if (b == s.grid_base.end()) continue;
      const QuasiAff& size = s.grid_sizes.at(k.tag_of(n).to_string());
      const AffExpr off = AffExpr::variable(n) - b->second;
      ctx.push_back(Constraint::ge(off));
      ctx.push_back(Constraint::ge(size.numerator - (off + AffExpr(1)) * size.denominator));
    }
    auto context_with = [&](const std::vector<Constraint>& extra) {
      std::vector<Constraint> all = ctx;
      all.insert(all.end(), extra.begin(), extra.end());
      return PolySet(inames, dom.params(), all);
    };
    std::vector<Constraint> guard;
    for (const auto& c : dom.constraints())
      if (!implies(context_with(guard), c)) guard.push_back(c);
    for (std::size_t g = 0; g < guard.size();) {
      std::vector<Constraint> others = guard;
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(g));
      if (implies(context_with(others), guard[g]))
        guard = std::move(others);
      else
        ++g;
    }
    it.guard = std::move(guard);
  }

  // Hoist, innermost loops first (ordered by their CloseLoop).
  std::vector<std::pair<std::size_t, std::size_t>> loops;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].kind == ScheduleItem::Kind::OpenLoop) loops.emplace_back(matching_close(items, i), i);
  std::sort(loops.begin(), loops.end());
  for (const auto& [close, open] : loops) {
    std::vector<std::size_t> children;
    bool blocked = false;
    for (std::size_t i = open + 1; i < close; ++i) {
      if (items[i].kind == ScheduleItem::Kind::Barrier) blocked = true;
      children.push_back(i);
      if (items[i].kind == ScheduleItem::Kind::OpenLoop) {
        const std::size_t end = matching_close(items, i);
        if (barrier_between(items, i + 1, end)) blocked = true;
        for (std::size_t j = i + 1; j < end; ++j)
          if (items[j].kind == ScheduleItem::Kind::Barrier) blocked = true;
        i = end;
      }
    }
    if (blocked || children.empty()) continue;
    std::vector<Constraint> common = items[children.front()].guard;
    for (std::size_t c : children) {
      std::vector<Constraint> keep;
      for (const auto& g : common)
        if (std::find(items[c].guard.begin(), items[c].guard.end(), g) != items[c].guard.end()) keep.push_back(g);
      common = std::move(keep);
    }
    const std::string& x = items[open].name;
    for (const auto& g : common) {
      if (g.involves(x)) continue;
      items[open].guard.push_back(g);
      for (std::size_t c : children) std::erase(items[c].guard, g);
    }
  }
  return s;
}

// }}}

namespace {

// Every work item must find the temporary elements it reads filled within
// its own storage scope.
void check_temporary_scope(const Kernel& k) {
  for (const auto& w : k.instructions) {
    auto t = k.temps.find(w.target());
    if (t == k.temps.end()) continue;
    const bool local = t->second.space == AddressSpace::Local;
    std::set<std::string> indexed;
    visit(w.assignee, [&](const ExprPtr& e) {
      if (const auto* v = e->as<Variable>()) indexed.insert(v->name);
    });
    for (const auto& x : w.within_inames) {
      const InameTag tag = k.tag_of(x);
      if (!tag.is_parallel()) continue;
      if (local && tag.kind == InameTag::Kind::Local) {
        if (!indexed.count(x))
          throw Error(Errc::InvalidKernel, "work items along '" + x + "' all write the same elements of local '" +
                                               t->first + "' in '" + w.id + "'");
        continue;
      }
      for (const auto& r : k.instructions)
        if (r.id != w.id && names_read(k, r).count(t->first) && !r.within_inames.count(x))
          throw Error(Errc::InvalidKernel, "'" + r.id + "' reads " + std::string(local ? "local" : "private") + " '" +
                                               t->first + "' filled across " + tag.to_string() + " iname '" + x +
                                               "' that it does not share");
    }
  }
}

}  // namespace

ScheduledKernel schedule_kernel(const Kernel& k) {
  check_temporary_scope(k);
  ScheduledKernel s = compute_guards(insert_barriers(linearize(expand_ilp(k))));
  const Kernel& kk = s.kernel;
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    const auto& open = s.items[i];
    if (open.kind != ScheduleItem::Kind::OpenLoop || open.loop_kind != LoopKind::VecLane) continue;
    const std::size_t close = matching_close(s.items, i);
    for (std::size_t j = i + 1; j < close; ++j) {
      const auto& it = s.items[j];
      if (!it.guard.empty())
        throw Error(Errc::UnsupportedVecShape, "conditional remains inside vec loop '" + open.name + "'");
      if (it.kind != ScheduleItem::Kind::Run) continue;
      const Instruction& insn = *kk.find_insn(it.name);
      bool indexed = false;
      for (const ExprPtr& e : {insn.assignee, insn.rhs})
        for (const Subscript* sub : subscripts(e)) {
          const ArgSpec* a = kk.find_arg(sub->array);
          if (!a) continue;
          for (std::size_t d = 0; d < a->dim_tags.size() && d < sub->index.size(); ++d) {
            const auto* v = sub->index[d]->as<Variable>();
            if (a->dim_tags[d].kind == DimTag::Kind::Vec && v && v->name == open.name) indexed = true;
          }
        }
      if (!indexed)
        throw Error(Errc::UnsupportedVecShape,
                    "'" + insn.id + "' does not index a vec array axis with '" + open.name + "'");
    }
  }
  return s;
}

std::string schedule_to_text(const ScheduledKernel& s) {
  std::ostringstream os;
  if (!s.grid_sizes.empty()) {
    os << "grid:";
    for (const auto& [axis, size] : s.grid_sizes) os << " " << axis << "=" << render_bound(size);
    os << "\n";
  }
  auto guard_text = [](const std::vector<Constraint>& g) {
    std::string out;
    for (const auto& c : g) out += (out.empty() ? " if " : " && ") + render_constraint(c);
    return out;
  };
  int depth = 0;
  for (const auto& it : s.items) {
    if (it.kind == ScheduleItem::Kind::CloseLoop) --depth;
    os << std::string(static_cast<std::size_t>(2 * depth), ' ');
    switch (it.kind) {
      case ScheduleItem::Kind::OpenLoop:
        os << "for " << it.name << " = " << render_bound(it.range.lower) << " .. " << render_bound(it.range.upper);
        if (it.range.stride > 1) os << " step " << it.range.stride.str();
        os << " [" << loop_kind_name(it.loop_kind) << "]" << guard_text(it.guard);
        ++depth;
        break;
      case ScheduleItem::Kind::CloseLoop: os << "end " << it.name; break;
      case ScheduleItem::Kind::Run: os << "run " << it.name << guard_text(it.guard); break;
      case ScheduleItem::Kind::Barrier: os << "barrier local"; break;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace kgen
