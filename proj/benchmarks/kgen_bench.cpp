#include <benchmark/benchmark.h>

#include "kgen/analysis.hpp"
#include "kgen/codegen.hpp"
#include "kgen/frontend.hpp"
#include "kgen/interp.hpp"
#include "kgen/polyset.hpp"
#include "kgen/schedule.hpp"
#include "kgen/transform.hpp"

using namespace kgen;

namespace {

Kernel tiled_matvec() {
  Kernel k = make_kernel("{ [i,k]: 0<=i,k<n }", "out[i] = sum(k, a[i,k]*x[k])");
  k = split_iname(k, "i", 16);
  return tag_inames(k, "i_outer:g.0, i_inner:l.0");
}

Kernel prefetched_stencil() {
  Kernel k = make_kernel("{ [i]: 0<=i<n }", "out[i] = a[i] + a[i+1]");
  k = tag_inames(split_iname(k, "i", 16), "i_inner:l.0, i_outer:g.0");
  return add_prefetch(k, "a", {"i_inner"}, AddressSpace::Local);
}

void BM_ParseSet(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(parse_set("[n] -> { [i,j,k]: 0<=i<n and 0<=j<=i and 0<=k<16 and i+j mod 2 = 0 }"));
}
BENCHMARK(BM_ParseSet);

void BM_ProjectOut(benchmark::State& state) {
  const PolySet s = parse_set("[n] -> { [i,j,k]: 0<=i<n and 0<=j<=i and j<=k<=i+4 and 2*k<=3*n }");
  for (auto _ : state) benchmark::DoNotOptimize(project_out(s, "j"));
}
BENCHMARK(BM_ProjectOut);

void BM_LoopBounds(benchmark::State& state) {
  const PolySet s = split_iname(make_kernel("{ [i]: 0<=i<n }", "a[i] = 0"), "i", 16).full_domain();
  for (auto _ : state) benchmark::DoNotOptimize(bounds(s, "i_inner", {"i_outer"}));
}
BENCHMARK(BM_LoopBounds);

void BM_Schedule(benchmark::State& state) {
  const Kernel k = infer_types(prefetched_stencil(), {{"a", DType::F32}});
  for (auto _ : state) benchmark::DoNotOptimize(schedule_kernel(k));
}
BENCHMARK(BM_Schedule);

void BM_Codegen(benchmark::State& state) {
  const ScheduledKernel s = schedule_kernel(infer_types(tiled_matvec(), {{"a", DType::F32}, {"x", DType::F32}}));
  for (auto _ : state) benchmark::DoNotOptimize(generate_code(s, {}));
}
BENCHMARK(BM_Codegen);

void BM_Run(benchmark::State& state) {
  const Kernel k = infer_types(tiled_matvec(), {{"a", DType::F32}, {"x", DType::F32}});
  const ScheduledKernel s = schedule_kernel(k);
  const ExecState st = random_state(k, {{"n", state.range(0)}}, {}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(run(s, st));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Run)->Arg(16)->Arg(64);

}  // namespace
