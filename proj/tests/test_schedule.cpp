#include <gtest/gtest.h>

#include "kgen/frontend.hpp"
#include "kgen/schedule.hpp"
#include "kgen/transform.hpp"

using namespace kgen;

namespace {

Kernel zero_fill() { return make_kernel("{ [i]: 0<=i<n }", "a[i] = 0"); }

std::vector<const ScheduleItem*> runs(const ScheduledKernel& s) {
  std::vector<const ScheduleItem*> out;
  for (const auto& it : s.items)
    if (it.kind == ScheduleItem::Kind::Run) out.push_back(&it);
  return out;
}

int depth_of(const ScheduledKernel& s, const ScheduleItem* target) {
  int d = 0;
  for (const auto& it : s.items) {
    if (&it == target) return d;
    if (it.kind == ScheduleItem::Kind::OpenLoop) ++d;
    if (it.kind == ScheduleItem::Kind::CloseLoop) --d;
  }
  return -1;
}

}  // namespace

TEST(Schedule, SplitGuardAtInnermostLevel) {
  const ScheduledKernel s = schedule_kernel(split_iname(zero_fill(), "i", 16));
  EXPECT_EQ(schedule_to_text(s),
            "for i_outer = 0 .. (-1 + ((15 + n) / 16)) [sequential]\n"
            "  for i_inner = 0 .. 15 [sequential]\n"
            "    run insn if (-1 + -1 * i_inner + -16 * i_outer + n) >= 0\n"
            "  end i_inner\n"
            "end i_outer\n");
  ASSERT_EQ(runs(s).size(), 1u);
  EXPECT_EQ(depth_of(s, runs(s)[0]), 2);
}

TEST(Schedule, AssumptionsRemoveGuards) {
  const Kernel k = split_iname(assume(zero_fill(), "n mod 16 = 0 and n >= 0"), "i", 16);
  for (const auto* r : runs(schedule_kernel(k))) EXPECT_TRUE(r->guard.empty());
  const Kernel u = tag_inames(split_iname(assume(zero_fill(), "n >= 0 and n mod 4 = 0"), "i", 4), "i_inner:unr");
  const ScheduledKernel s = schedule_kernel(u);
  EXPECT_NE(schedule_to_text(s).find("for i_inner = 0 .. 3 [unrolled]"), std::string::npos);
  for (const auto* r : runs(s)) EXPECT_TRUE(r->guard.empty());
}

TEST(Schedule, DependenciesOrderLoopNests) {
  const Kernel k = make_kernel("{ [i,j,ii,jj]: 0<=i,j,ii,jj<n }",
                               "out[i,j] = a[j,i] {id=transpose}\nout[ii,jj] = 2*out[ii,jj] {dep=transpose}");
  const ScheduledKernel s = schedule_kernel(k);
  const auto r = runs(s);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0]->name, "transpose");
  EXPECT_EQ(r[1]->name, "insn");
  // the two nests are disjoint: transpose's loops close before insn's open
  std::size_t close_j = 0, open_ii = 0;
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    if (s.items[i].kind == ScheduleItem::Kind::CloseLoop && s.items[i].name == "i") close_j = i;
    if (s.items[i].kind == ScheduleItem::Kind::OpenLoop && s.items[i].name == "ii") open_ii = i;
  }
  EXPECT_LT(close_j, open_ii);
  EXPECT_EQ(s.warnings.size(), 2u);
}

TEST(Schedule, PriorityResolvesAmbiguity) {
  const Kernel k = set_loop_priority(make_kernel("{ [i,j]: 0<=i,j<n }", "out[i,j] = a[j,i]"), {"j", "i"});
  const ScheduledKernel s = schedule_kernel(k);
  EXPECT_TRUE(s.warnings.empty());
  EXPECT_EQ(s.items[0].name, "j");
}

TEST(Schedule, SharedLoopKeepsProgramOrder) {
  const ScheduledKernel s =
      schedule_kernel(make_kernel("{ [iname]: 0<=iname<n }", "z = a[iname] {id=insn0}\ny = z*2 {id=insn1}\nx[iname] = y {id=insn2}"));
  const auto r = runs(s);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0]->name, "insn0");
  EXPECT_EQ(r[2]->name, "insn2");
  EXPECT_EQ(s.items.size(), 5u);  // one loop around all three
}

TEST(Schedule, LocalPrefetchGetsBarrier) {
  Kernel k = tag_inames(split_iname(make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]"), "i", 16),
                        "i_inner:l.0, i_outer:g.0");
  const ScheduledKernel s = schedule_kernel(add_prefetch(k, "a", {"i_inner"}, AddressSpace::Local));
  ASSERT_EQ(s.items.size(), 3u);
  EXPECT_EQ(s.items[0].name, "a_fetch_fill");
  EXPECT_EQ(s.items[1].kind, ScheduleItem::Kind::Barrier);
  EXPECT_EQ(s.items[2].name, "insn");
  EXPECT_EQ(s.grid_sizes.at("l.0"), (QuasiAff{AffExpr(17), 1}));
}

TEST(Schedule, SequentialOuterLoopNeedsTwoBarriers) {
  Kernel k = tag_inames(split_iname(make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]"), "i", 16), "i_inner:l.0");
  const ScheduledKernel s = schedule_kernel(add_prefetch(k, "a", {"i_inner"}, AddressSpace::Local));
  int barriers = 0;
  for (const auto& it : s.items) barriers += it.kind == ScheduleItem::Kind::Barrier;
  EXPECT_EQ(barriers, 2);
}

TEST(Schedule, CycleIsAnError) {
  Kernel k = make_kernel("{ [i]: 0<=i<n }", "x[i] = c[i] {id=a}\ny[i] = x[i] {id=b, dep=a}");
  k.find_insn("a")->depends_on.insert("b");
  EXPECT_THROW(schedule_kernel(k), Error);
}

TEST(Schedule, FillSharesTheLoopItsOriginDependsOn) {
  // a_fetch has origin (i, 0); its fill must run inside the reader's i loop
  Kernel k = tag_inames(make_kernel("{ [i,j]: 0<=i<n and 0<=j<=i }", "out[i,j] = 3*a[i,j]"), "j:l.0");
  const ScheduledKernel s = schedule_kernel(add_prefetch(k, "a", {"j"}, AddressSpace::Private));
  ASSERT_EQ(s.items.front().kind, ScheduleItem::Kind::OpenLoop);
  EXPECT_EQ(s.items.front().name, "i");
  EXPECT_EQ(s.items.back().name, "i");
}

TEST(Schedule, PriorityThatSplitsFillFromReaderIsRejected) {
  Kernel k = add_prefetch(make_kernel("{ [i,j]: 0<=i,j<n }", "out[i,j] = 3*a[i,j]"), "a", {"i"}, AddressSpace::Private);
  k = set_loop_priority(k, {"a_fetch_i", "j", "i"});
  EXPECT_THROW(schedule_kernel(k), Error);
}

TEST(Schedule, TemporaryScope) {
  const Kernel base = make_kernel("{ [i]: 0<=i<n }", "out[i] = 2*a[i]");
  // each work item would fill one element of its own private copy
  EXPECT_THROW(schedule_kernel(tag_inames(add_prefetch(base, "a", {"i"}, AddressSpace::Private), "a_fetch_i:l.0")),
               Error);
  // each group would fill one element of its local copy
  EXPECT_THROW(schedule_kernel(tag_inames(add_prefetch(base, "a", {"i"}, AddressSpace::Local), "a_fetch_i:g.0")),
               Error);
  // all work items along j write the same row
  const Kernel rows = tag_inames(make_kernel("{ [i,j]: 0<=i,j<n }", "out[i,j] = a[j,i]"), "j:l.0");
  EXPECT_THROW(schedule_kernel(add_prefetch(rows, "a", {"i"}, AddressSpace::Local)), Error);
  EXPECT_NO_THROW(schedule_kernel(tag_inames(add_prefetch(base, "a", {"i"}, AddressSpace::Local), "a_fetch_i:l.0")));
}

TEST(Render, AffineAndBoundForms) {
  EXPECT_EQ(render_affine(parse_affine("n - 1 - i_inner - 16*i_outer")), "(-1 + -1 * i_inner + -16 * i_outer + n)");
  EXPECT_EQ(render_affine(AffExpr(15)), "15");
  EXPECT_EQ(render_bound(QuasiAff{parse_affine("n - 1"), 16}), "(-1 + ((15 + n) / 16))");
}
