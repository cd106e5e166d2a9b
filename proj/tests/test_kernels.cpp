#include "common.hpp"

#include "rwflow/kernels.hpp"
#include "rwflow/prox.hpp"

#include "doctest.h"

#include <cstring>

#include <omp.h>

using namespace rwflow;
using namespace fixtures;

namespace {

// A model large enough to cross the parallel threshold.
EnergyModel large_model(double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 3000;
  std::vector<EnergyTerm> terms;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (int i = 0; i + 1 < n; ++i) terms.push_back({i, i + 1, w(rng), 1.0, 0});
  for (int k = 0; k < 4 * n; ++k) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    terms.push_back({a, b, w(rng), p, 1});
  }
  Vec metric = Vec::Ones(n);
  return EnergyModel(metric, {GrowthSpec::tv(), GrowthSpec::power(p)}, terms);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("serial and OpenMP kernels agree bitwise") {
  // Force a real team even on single-core machines.
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto model = large_model(p, 11);
    const auto terms = model.terms();
    const int n = model.size();
    std::mt19937_64 rng(3);
    const VertexFunction u = random_vector(n, rng);
    const std::span<const double> us(u.data(), n);

    std::vector<double> d1(terms.size()), d2(terms.size());
    kernels::serial::differences(terms, us, d1);
    kernels::omp::differences(terms, us, d2);
    CHECK(bitwise_equal(d1, d2));

    std::vector<double> f1(n), f2(n);
    kernels::serial::flux_sum(terms, model.incidence(), d1, f1);
    kernels::omp::flux_sum(terms, model.incidence(), d1, f2);
    CHECK(bitwise_equal(f1, f2));

    std::vector<double> e1(terms.size()), e2(terms.size());
    kernels::serial::term_energies(terms, us, e1);
    kernels::omp::term_energies(terms, us, e2);
    CHECK(bitwise_equal(e1, e2));

    CHECK(eval_energy(model, u, kernels::Backend::Serial) == eval_energy(model, u, kernels::Backend::OpenMP));

    std::vector<double> y1, y2;
    const VertexFunction a = pdhg_iterate(model, u, 0.1, 25, kernels::Backend::Serial, y1);
    const VertexFunction b = pdhg_iterate(model, u, 0.1, 25, kernels::Backend::OpenMP, y2);
    CHECK(bitwise_equal(std::vector<double>(a.data(), a.data() + n), std::vector<double>(b.data(), b.data() + n)));
    CHECK(bitwise_equal(y1, y2));
  }
  omp_set_num_threads(saved);
}

TEST_CASE("growth helpers") {
  CHECK(kernels::growth_value(-2.0, 1.0) == 2.0);
  CHECK(kernels::growth_value(-2.0, 2.0) == 2.0);
  CHECK(kernels::growth_value(2.0, 3.0) == doctest::Approx(8.0 / 3.0));
  CHECK(kernels::growth_flux(-2.0, 1.0) == -1.0);
  CHECK(kernels::growth_flux(0.0, 1.0) == 0.0);
  CHECK(kernels::growth_flux(-2.0, 3.0) == doctest::Approx(-4.0));
  CHECK(kernels::growth_flux(0.5, 1.5) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("scalar power prox solves its optimality condition") {
  for (double q : {1.25, 1.5, 2.0, 3.0, 4.0}) {
    for (double y0 : {-3.0, -0.2, 0.0, 1e-6, 0.7, 5.0}) {
      for (double c : {0.01, 1.0, 10.0}) {
        const double y = kernels::prox_power(y0, c, q);
        CHECK(y + c * kernels::growth_flux(y, q) == doctest::Approx(y0).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("incidence lists every term at both endpoints") {
  const auto model = compile(three_path(1.0, 1.0));
  const auto& inc = model.incidence();
  CHECK(inc.offsets.size() == 4u);
  CHECK(inc.offsets.back() == 2 * model.term_count());
  int tails = 0;
  for (auto s : inc.sign) tails += s == 1;
  CHECK(tails == model.term_count());
}
