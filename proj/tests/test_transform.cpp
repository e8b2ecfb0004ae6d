#include <gtest/gtest.h>

#include "equiv.hpp"
#include "kgen/frontend.hpp"
#include "kgen/transform.hpp"
#include "oracle.hpp"

using namespace kgen;

namespace {

const std::map<std::string, DType> kF32{{"a", DType::F32}, {"x", DType::F32}};
const std::map<std::string, DType> kI32{{"a", DType::I32}, {"x", DType::I32}};

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Usage;
}

Kernel doubling() { return make_kernel("{ [i]: 0<=i<n }", "out[i] = 2*a[i]"); }

}  // namespace

TEST(Split, DomainSatisfiesSplitIdentity) {
  const Kernel k = split_iname(doubling(), "i", 5);
  EXPECT_TRUE(k.is_iname("i_outer"));
  EXPECT_TRUE(k.is_iname("i_inner"));
  EXPECT_FALSE(k.is_iname("i"));
  for (std::int64_t n = 0; n <= 23; ++n) {
    std::multiset<std::int64_t> values;
    const auto& vars = k.domain.set_vars();
    const std::size_t io = std::find(vars.begin(), vars.end(), "i_outer") - vars.begin();
    const std::size_t ii = std::find(vars.begin(), vars.end(), "i_inner") - vars.begin();
    for (const auto& p : oracle::points(k.domain, {{"n", n}}, -2, 30)) values.insert(p[ii] + 5 * p[io]);
    std::multiset<std::int64_t> want;
    for (std::int64_t i = 0; i < n; ++i) want.insert(i);
    EXPECT_EQ(values, want) << "n=" << n;
  }
}

TEST(Split, RewritesSubscripts) {
  const Kernel k = split_iname(make_kernel("{ [i]: 0<=i<n }", "a[i] = 0"), "i", 16);
  EXPECT_EQ(to_text(k.instructions[0].assignee), "a[i_inner + i_outer*16]");
  EXPECT_EQ(k.instructions[0].within_inames, (std::set<std::string>{"i_inner", "i_outer"}));
}

TEST(Split, Errors) {
  EXPECT_EQ(code_of([] { split_iname(doubling(), "j", 4); }), Errc::UnknownIname);
  EXPECT_EQ(code_of([] { split_iname(doubling(), "i", 0); }), Errc::InvalidKernel);
  EXPECT_EQ(code_of([] { split_iname(doubling(), SplitSpec{"i", 4, "a", "b"}); }), Errc::NameCollision);
}

TEST(Split, PreservesSemantics) {
  for (int len = 1; len <= 7; ++len) {
    const auto d = oracle::equivalent(doubling(), split_iname(doubling(), "i", len), oracle::sizes(0, 17), kF32);
    EXPECT_FALSE(d) << "length " << len << ": " << *d;
  }
}

TEST(Split, ReductionInameKeepsSum) {
  const Kernel k = make_kernel("{ [i,k]: 0<=i,k<n }", "out[i] = sum(k, a[i,k]*x[k])");
  const auto d = oracle::equivalent(k, split_iname(k, "k", 3), oracle::sizes(0, 9), kI32);
  EXPECT_FALSE(d) << *d;
  const auto f = oracle::equivalent(k, split_iname(k, "k", 3), oracle::sizes(0, 9), kF32, 1e-6);
  EXPECT_FALSE(f) << *f;
}

TEST(TagInames, Validation) {
  const Kernel s = split_iname(doubling(), "i", 4);
  EXPECT_EQ(tag_inames(s, "i_inner:unr").tag_of("i_inner").kind, InameTag::Kind::Unroll);
  EXPECT_EQ(code_of([&] { tag_inames(s, "i_outer:unr"); }), Errc::NonConstantTripCount);
  EXPECT_EQ(code_of([&] { tag_inames(s, "i_inner:l.0, i_outer:l.0"); }), Errc::AxisConflict);
  EXPECT_EQ(code_of([&] { tag_inames(s, "q:g.0"); }), Errc::UnknownIname);
  EXPECT_EQ(code_of([] {
              tag_inames(make_kernel("{ [i,k]: 0<=i,k<n }", "out[i] = sum(k, a[i,k])"), "k:g.0");
            }),
            Errc::InvalidKernel);
}

TEST(TagInames, GridTagsPreserveSemantics) {
  const Kernel s = tag_inames(split_iname(doubling(), "i", 4), "i_inner:l.0, i_outer:g.0");
  const auto d = oracle::equivalent(doubling(), s, oracle::sizes(0, 17), kF32);
  EXPECT_FALSE(d) << *d;
}

TEST(LoopPriority, UnknownInameRejected) {
  EXPECT_EQ(code_of([] { set_loop_priority(doubling(), {"i", "zz"}); }), Errc::UnknownIname);
}

TEST(ArrayAxes, SepAndVecAndStridePermutation) {
  const Kernel k = make_kernel("{ [i,j]: 0<=i<n and 0<=j<4 }", "out[i,j] = a[i,j] + 1");
  const Kernel col = tag_array_axes(k, "a", "N0,N1");
  EXPECT_EQ(col.find_arg("a")->dim_tags[0].stride, AffExpr(1));
  EXPECT_EQ(col.find_arg("a")->dim_tags[1].stride, parse_affine("n"));
  const Kernel sep = tag_array_axes(k, "a", "stride:auto,sep");
  EXPECT_EQ(sep.find_arg("a")->dim_tags[1].kind, DimTag::Kind::Sep);
  const Kernel vec = tag_array_axes(k, "a", "c,vec");
  EXPECT_EQ(vec.find_arg("a")->dim_tags[1].width, 4);
  for (const Kernel* t : {&col, &sep, &vec}) {
    const auto d = oracle::equivalent(k, *t, oracle::sizes(0, 6), kI32);
    EXPECT_FALSE(d) << *d;
  }
  EXPECT_EQ(code_of([&] { tag_array_axes(k, "a", "c"); }), Errc::RankMismatch);
  EXPECT_EQ(code_of([&] { tag_array_axes(k, "q", "c,c"); }), Errc::UnknownArray);
  const Kernel three = make_kernel("{ [i,j]: 0<=i<n and 0<=j<3 }", "out[i,j] = a[i,j]");
  EXPECT_EQ(code_of([&] { tag_array_axes(three, "a", "c,vec"); }), Errc::IllegalVecWidth);
}

TEST(Precompute, RuleBecomesTemporary) {
  const Kernel k = make_kernel("{ [i]: 0<=i<n }", "f(x) := x*a[x]\nout[i] = f(i)");
  const Kernel p = precompute(k, "f", {"i"});
  EXPECT_TRUE(p.rules.empty());
  ASSERT_TRUE(p.temps.count("f"));
  EXPECT_EQ(p.temps.at("f").shape, std::vector<AffExpr>{parse_affine("n")});
  EXPECT_NE(p.find_insn("f_fill"), nullptr);
  const auto d = oracle::equivalent(k, p, oracle::sizes(0, 9), kI32);
  EXPECT_FALSE(d) << *d;
  EXPECT_EQ(code_of([&] { precompute(k, "g", {"i"}); }), Errc::UnknownRule);
}

TEST(Prefetch, TileSizedTemporary) {
  Kernel k = tag_inames(split_iname(make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]"), "i", 16),
                        "i_inner:l.0, i_outer:g.0");
  const Kernel p = add_prefetch(k, "a", {"i_inner"}, AddressSpace::Local);
  ASSERT_TRUE(p.temps.count("a_fetch"));
  EXPECT_EQ(p.temps.at("a_fetch").shape, std::vector<AffExpr>{AffExpr(17)});
  EXPECT_EQ(p.temps.at("a_fetch").space, AddressSpace::Local);
  const auto d = oracle::equivalent(make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]"), p,
                                    oracle::sizes(0, 40), kF32);
  EXPECT_FALSE(d) << *d;
}

TEST(Prefetch, WrittenArrayRejected) {
  EXPECT_EQ(code_of([] { add_prefetch(make_kernel("{ [i]: 0<=i<n }", "a[i] = 2*a[i]"), "a", {"i"}); }),
            Errc::InvalidKernel);
}

TEST(Prefetch, OriginInsideReductionRejected) {
  Kernel k = split_iname(make_kernel("{ [i,k]: 0<=i,k<n }", "out[i] = sum(k, a[i,k]*x[k])"), "k", 4);
  EXPECT_THROW(add_prefetch(k, "x", {"k_inner"}), Error);
  EXPECT_NO_THROW(add_prefetch(k, "x", {"k_outer", "k_inner"}));
}

TEST(Assume, AndFixParameters) {
  const Kernel k = assume(doubling(), "n mod 4 = 0");
  EXPECT_EQ(k.assumptions.constraints().size(), 1u);
  const Kernel f = fix_parameters(doubling(), "n", 6);
  EXPECT_EQ(f.find_arg("n"), nullptr);
  EXPECT_EQ(*f.find_arg("a")->shape, std::vector<AffExpr>{AffExpr(6)});
  EXPECT_EQ(code_of([] { fix_parameters(doubling(), "m", 6); }), Errc::UnknownParameter);
  EXPECT_EQ(code_of([] { assume(doubling(), "i > 0"); }), Errc::UnknownParameter);
}
