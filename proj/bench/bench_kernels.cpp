#include <benchmark/benchmark.h>

#include "logband/kernels.hpp"
#include "logband/rng.hpp"

using namespace logband;

namespace {

std::vector<SampleGroup> groups(std::int64_t n, Eigen::Index d) {
  RngStream rng(1, 2);
  std::vector<SampleGroup> g;
  for (std::int64_t i = 0; i < n; ++i) {
    SampleGroup s;
    s.arm = rng.unit_sphere(d);
    s.trials = 1 + static_cast<std::int64_t>(rng.index(4));
    s.ones = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(s.trials) + 1));
    g.push_back(std::move(s));
  }
  return g;
}

ArmList arms(std::size_t n, Eigen::Index d) {
  RngStream rng(3, 4);
  ArmList a;
  for (std::size_t i = 0; i < n; ++i) a.push_back(rng.unit_sphere(d));
  return a;
}

template <bool Parallel>
void BM_Fisher(benchmark::State& st) {
  const auto g = groups(st.range(0), 10);
  const Vec th = Vec::Constant(10, 0.1);
  for (auto _ : st) {
    Mat h = Parallel ? kernels::fisher_accumulate(g, th, 10) : kernels::reference::fisher_accumulate(g, th, 10);
    benchmark::DoNotOptimize(h.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel>
void BM_Likelihood(benchmark::State& st) {
  const auto g = groups(st.range(0), 10);
  const Vec th = Vec::Constant(10, 0.1);
  for (auto _ : st) {
    auto p = Parallel ? kernels::likelihood_parts(g, th, 10) : kernels::reference::likelihood_parts(g, th, 10);
    benchmark::DoNotOptimize(p.loglik);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel>
void BM_CountSuccesses(benchmark::State& st) {
  const KeyedRng rng(5, 6);
  for (auto _ : st) {
    auto c = Parallel ? kernels::count_successes(rng, 0, st.range(0), 0.3)
                      : kernels::reference::count_successes(rng, 0, st.range(0), 0.3);
    benchmark::DoNotOptimize(c);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel>
void BM_MaxQuadForm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = arms(n, 20);
  const Mat m = Mat::Identity(20, 20) * 2.0;
  for (auto _ : st) {
    double v = Parallel ? kernels::max_quad_form(m, a, n) : kernels::reference::max_quad_form(m, a, n);
    benchmark::DoNotOptimize(v);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_Fisher<false>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_Fisher<true>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_Likelihood<false>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_Likelihood<true>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_CountSuccesses<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_CountSuccesses<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_MaxQuadForm<false>)->Arg(1 << 10)->Arg(1 << 14);
BENCHMARK(BM_MaxQuadForm<true>)->Arg(1 << 10)->Arg(1 << 14);

BENCHMARK_MAIN();
