// Serial reference against OpenMP for the edge kernels that dominate a prox solve.

#include "rwflow/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace rwflow;

namespace {

// Ring plus random chords, two structures, mixed exponents.
struct Workload {
  std::vector<EnergyTerm> terms;
  kernels::Incidence inc;
  kernels::PdhgSteps steps;
  std::vector<double> u, z, out, metric;

  explicit Workload(int n) {
    std::mt19937_64 rng(n);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_real_distribution<double> w(0.5, 2.0);
    for (int x = 0; x < n; ++x) terms.push_back({x, (x + 1) % n, w(rng), 1.0, 0});
    for (int k = 0; k < 3 * n; ++k) {
      const int a = pick(rng), b = pick(rng);
      if (a != b) terms.push_back({a, b, w(rng), 2.0, 1});
    }
    inc = kernels::Incidence::build(n, terms);
    steps = kernels::pdhg_steps(n, terms, inc);
    u.resize(n);
    for (auto& v : u) v = w(rng);
    z.assign(terms.size(), 0.3);
    out.assign(std::max<std::size_t>(terms.size(), n), 0.0);
    metric.assign(n, 1.0);
  }
};

template <bool Parallel>
void bm_differences(benchmark::State& st) {
  Workload wl(static_cast<int>(st.range(0)));
  std::span<double> d(wl.out.data(), wl.terms.size());
  for (auto _ : st) {
    if constexpr (Parallel) kernels::omp::differences(wl.terms, wl.u, d);
    else kernels::serial::differences(wl.terms, wl.u, d);
    benchmark::DoNotOptimize(wl.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(wl.terms.size()));
}

template <bool Parallel>
void bm_flux_sum(benchmark::State& st) {
  Workload wl(static_cast<int>(st.range(0)));
  std::span<double> o(wl.out.data(), wl.u.size());
  for (auto _ : st) {
    if constexpr (Parallel) kernels::omp::flux_sum(wl.terms, wl.inc, wl.z, o);
    else kernels::serial::flux_sum(wl.terms, wl.inc, wl.z, o);
    benchmark::DoNotOptimize(wl.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(wl.terms.size()));
}

template <bool Parallel>
void bm_pdhg_iterate(benchmark::State& st) {
  Workload wl(static_cast<int>(st.range(0)));
  const std::size_t n = wl.u.size();
  std::vector<double> u(wl.u), u_bar(n), y(wl.terms.size(), 0.0);
  for (auto _ : st) {
    if constexpr (Parallel) {
      kernels::omp::pdhg_primal(wl.inc, wl.terms, wl.steps, wl.metric, wl.u, 0.1, y, u, u_bar);
      kernels::omp::pdhg_dual(wl.terms, wl.steps, u_bar, y);
    } else {
      kernels::serial::pdhg_primal(wl.inc, wl.terms, wl.steps, wl.metric, wl.u, 0.1, y, u, u_bar);
      kernels::serial::pdhg_dual(wl.terms, wl.steps, u_bar, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(wl.terms.size()));
}

}  // namespace

BENCHMARK(bm_differences<false>)->Name("differences/serial")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(bm_differences<true>)->Name("differences/omp")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(bm_flux_sum<false>)->Name("flux_sum/serial")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(bm_flux_sum<true>)->Name("flux_sum/omp")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(bm_pdhg_iterate<false>)->Name("pdhg_iterate/serial")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(bm_pdhg_iterate<true>)->Name("pdhg_iterate/omp")->RangeMultiplier(8)->Range(1 << 10, 1 << 19);

BENCHMARK_MAIN();
