#include <gtest/gtest.h>

#include "kgen/frontend.hpp"
#include "kgen/schedule.hpp"
#include "kgen/script.hpp"
#include "kgen/transform.hpp"

using namespace kgen;

TEST(KernelFile, Sections) {
  const KernelFile f = parse_kernel_file(
      "# comment\n[name]\nsplit_demo\n[domain]\n{ [i]:\n 0<=i<n }\n[instructions]\na[i] = 0\n"
      "[assumptions]\nn >= 0\nn mod 4 = 0\n[transforms]\nsplit_iname i 4\ntag_inames i_inner=unr\n");
  EXPECT_EQ(f.name, "split_demo");
  EXPECT_EQ(f.domain, "{ [i]: 0<=i<n }");
  EXPECT_EQ(f.assumptions, "n >= 0 and n mod 4 = 0");
  EXPECT_EQ(f.transforms.size(), 2u);
  const Kernel k = build_kernel(f);
  EXPECT_EQ(k.name, "split_demo");
  EXPECT_EQ(k.tag_of("i_inner").kind, InameTag::Kind::Unroll);
}

TEST(KernelFile, MatchesLibraryCalls) {
  const Kernel via_script = build_kernel(parse_kernel_file(
      "[domain]\n{ [i]: 0<=i<n }\n[instructions]\nout[i] = a[i] + a[i+1]\n[transforms]\n"
      "split_iname i 16\ntag_inames i_inner=l.0, i_outer=g.0\nadd_prefetch a i_inner local\n"));
  Kernel direct = tag_inames(split_iname(make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]"), "i", 16),
                             "i_inner:l.0, i_outer:g.0");
  direct = add_prefetch(direct, "a", {"i_inner"}, AddressSpace::Local);
  EXPECT_EQ(kernel_to_text(via_script), kernel_to_text(direct));
  EXPECT_EQ(schedule_to_text(schedule_kernel(via_script)), schedule_to_text(schedule_kernel(direct)));
}

TEST(KernelFile, Errors) {
  EXPECT_THROW(parse_kernel_file("[instructions]\na[i] = 0\n"), Error);
  EXPECT_THROW(parse_kernel_file("[domain]\n{ [i]: 0<=i<n }\n[instructions]\na[i]=0\n[bogus]\n"), Error);
  const Kernel k = build_kernel(parse_kernel_file("[domain]\n{ [i]: 0<=i<n }\n[instructions]\na[i] = 0\n"));
  EXPECT_THROW(apply_transform(k, "frobnicate i"), Error);
  EXPECT_THROW(apply_transform(k, "split_iname i"), Error);
  EXPECT_THROW(apply_transform(k, "split_iname i four"), Error);
}

TEST(KernelFile, EveryVerb) {
  Kernel k = build_kernel(parse_kernel_file(
      "[domain]\n{ [i,j]: 0<=i<n and 0<=j<4 }\n[instructions]\nf(x, y) := a[x, y]\nout[i,j] = f(i, j) + b[i]\n"));
  for (const char* line : {"assume n >= 1", "set_loop_priority j,i", "tag_array_axes a N0,N1", "precompute f j private",
                           "add_prefetch b j", "fix_parameters n 8"})
    k = apply_transform(k, line);
  EXPECT_TRUE(k.temps.count("f"));
  EXPECT_TRUE(k.temps.count("b_fetch"));
  EXPECT_EQ(k.find_arg("n"), nullptr);
}

TEST(DataFile, RoundTrip) {
  const ExecState st = parse_data("# input\na: f32 2,2 = 1 2.5 -3 0.1\nk: i32 3 = 4 5 6\nn: i32 = 2\n");
  EXPECT_EQ(st.arrays.at("a").shape, (std::vector<std::int64_t>{2, 2}));
  EXPECT_EQ(st.arrays.at("a").real[3], static_cast<double>(0.1f));
  EXPECT_EQ(st.arrays.at("k").integer, (std::vector<std::int64_t>{4, 5, 6}));
  EXPECT_EQ(st.scalars.at("n"), 2);
  EXPECT_EQ(data_to_text(st, {"a", "k"}), "a: float32 2,2 = 1 2.5 -3 0.1\nk: int32 3 = 4 5 6\n");
  EXPECT_THROW(parse_data("a: f32 3 = 1 2\n"), Error);
  EXPECT_THROW(parse_data("a: q32 1 = 1\n"), Error);
}

TEST(TypeBindings, Parse) {
  const auto b = parse_type_bindings("a=f32, n=i32");
  EXPECT_EQ(b.at("a"), DType::F32);
  EXPECT_EQ(b.at("n"), DType::I32);
  EXPECT_TRUE(parse_type_bindings("").empty());
  EXPECT_THROW(parse_type_bindings("a=quad"), Error);
}
