#include "common.hpp"

#include "doctest.h"

using namespace rwflow;
using namespace fixtures;

namespace {

VertexFunction vec(std::initializer_list<double> xs) {
  VertexFunction v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("time grid ends exactly at T") {
  const auto g = time_grid(1.0, 0.3);
  REQUIRE(g.size() == 5u);
  CHECK(g[3] == doctest::Approx(0.9));
  CHECK(g.back() == 1.0);
  CHECK(time_grid(1.0, 0.25).size() == 5u);
  CHECK_THROWS(time_grid(1.0, 0.0));
}

TEST_CASE("implicit Euler on the 3-path matches the first phase closed form") {
  const auto model = compile(three_path(1.0, 1.0));
  const auto tr = implicit_euler(model, vec({1, 0, 0}), 1.0, 1e-3, 1e-9);
  const double t1 = 0.75 * std::log(2.0);
  double err = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k];
    const double x = t < t1 ? 1.5 * std::exp(-4.0 * t / 3.0) - 0.5 : 0.25;
    err = std::max(err, std::abs(tr.states[k](0) - x));
  }
  CHECK(err < 2e-3);
  const auto k = static_cast<std::size_t>(250);
  CHECK(tr.states[k](0) == doctest::Approx(1.5 * std::exp(-1.0 / 3.0) - 0.5).epsilon(2e-3));
  CHECK(conservation_report(tr).max_drift < 1e-6);
  CHECK(diagnostics_drift(model, tr) < 1e-12);
  const auto ext = extinction_time(tr, 2e-3);
  REQUIRE(ext);
  CHECK(*ext >= 0.51);
  CHECK(*ext <= 0.53);
}

TEST_CASE("4-cycle partition conserves mass 6 and never goes extinct") {
  const auto model = compile(four_cycle_partition());
  const auto tr = implicit_euler(model, vec({2, 0, 1, 0}), 6.0, 1e-2, 1e-9);
  CHECK(tr.diagnostics.front().mass == 6.0);
  CHECK(conservation_report(tr).max_drift < 1e-6);
  CHECK_FALSE(extinction_time(tr, 1e-3).has_value());
}

TEST_CASE("energy decreases along implicit Euler") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s1 = from_weighted_graph(random_connected_weights(6, rng));
    const auto s2 = from_weighted_graph(random_connected_weights(6, rng));
    const auto model = compile(TwoStructureProblem(s1, s2, GrowthSpec::tv(), GrowthSpec::power(3.0)));
    const auto tr = implicit_euler(model, random_vector(6, rng), 0.5, 0.01, 1e-9);
    for (std::size_t k = 1; k < tr.size(); ++k) {
      CHECK(tr.diagnostics[k].energy <= tr.diagnostics[k - 1].energy + 1e-8);
    }
  }
}

TEST_CASE("contraction and comparison for a random pair") {
  std::mt19937_64 rng(12);
  const auto s = from_weighted_graph(random_connected_weights(5, rng));
  const auto model = compile(TwoStructureProblem(s, s, GrowthSpec::tv(), GrowthSpec::power(2.0)));
  const VertexFunction u0 = random_vector(5, rng);
  const VertexFunction w0 = u0 + random_vector(5, rng).cwiseAbs();
  const auto a = implicit_euler(model, u0, 0.5, 0.01, 1e-9);
  const auto b = implicit_euler(model, w0, 0.5, 0.01, 1e-9);
  for (double q : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    CHECK(check_contraction(a, b, q).holds(1e-7));
    CHECK(check_contraction(b, a, q).holds(1e-7));
  }
  for (std::size_t k = 0; k < a.size(); ++k) CHECK((a.states[k] - b.states[k]).maxCoeff() <= 1e-8);
}

TEST_CASE("sources enter the contraction budget") {
  const auto model = compile(three_path(1.0, 1.0));
  const VertexFunction f = vec({1, -1, 1});
  const auto a = implicit_euler(model, vec({1, 0, 0}), 0.3, 0.01, 1e-9, [&](double) { return f; });
  const auto b = implicit_euler(model, vec({1, 0, 0}), 0.3, 0.01, 1e-9, [](double) { return vec({0, 0, 0}); });
  CHECK(a.sources.size() == a.size() - 1);
  const auto rep = check_contraction(a, b, 1.0);
  CHECK(rep.holds(1e-7));
  CHECK(mass(model.metric(), a.states.back()) == doctest::Approx(1.0 + 0.3 * mass(model.metric(), f)));
}

TEST_CASE("decay bounds") {
  const auto model = compile(three_path(1.0, 1.0));
  const auto tr = implicit_euler(model, vec({1, 0, 0}), 1.0, 1e-3, 1e-9);
  const double lambda2 = 2.0 / std::sqrt(3.0);
  const auto ok = decay_bound_check(tr, lambda2, DecayMode::TwoPoincare);
  CHECK(ok.holds(1e-9));
  CHECK(ok.predicted_extinction == doctest::Approx(0.75));
  const auto bad = decay_bound_check(tr, 2.0, DecayMode::TwoPoincare);
  CHECK_FALSE(bad.holds(1e-9));
  CHECK(bad.at_time > 0.4);
  CHECK(bad.at_time < 0.53);
  CHECK(decay_bound_check(tr, 0.5, DecayMode::OnePoincare).holds(0.0));
  CHECK_THROWS(decay_bound_check(tr, -1.0, DecayMode::TwoPoincare));
  CHECK(parse_decay_mode("1") == DecayMode::OnePoincare);
  CHECK(parse_decay_mode("q2") == DecayMode::QTwoPoincare);
  CHECK_THROWS(parse_decay_mode("7"));
}

TEST_CASE("quadratic two-vertex flow decays like exp(-2 lambda t)") {
  const auto model = compile(TwoStructureProblem(two_vertex(), two_vertex(), GrowthSpec::power(2.0), GrowthSpec::power(2.0)));
  const auto tr = implicit_euler(model, vec({1, -1}), 1.0, 1e-3, 1e-10);
  // F(u) = (u1 - u0)^2 and |u - mean|^2 = (u1 - u0)^2 / 2, so lambda = 2.
  const auto rep = decay_bound_check(tr, 2.0, DecayMode::QTwoPoincare, 2.0);
  CHECK(rep.holds(1e-2));
  CHECK_FALSE(decay_bound_check(tr, 2.2, DecayMode::QTwoPoincare, 2.0).holds(1e-2));
  const double y1 = tr.diagnostics.back().dist_l2;
  CHECK(std::log(tr.diagnostics.front().dist_l2 / y1) == doctest::Approx(4.0).epsilon(1e-2));
}

TEST_CASE("(q,2) decay with q between 1 and 2") {
  const auto model = compile(TwoStructureProblem(path3(), path3(), GrowthSpec::power(1.5), GrowthSpec::power(2.0)));
  const auto tr = implicit_euler(model, vec({1, 0, 0}), 1.0, 1e-2, 1e-9);
  CHECK(decay_bound_check(tr, 0.1, DecayMode::QTwoPoincare, 1.5).holds(1e-6));
  CHECK_THROWS(decay_bound_check(tr, 0.1, DecayMode::QTwoPoincare, 3.0));
}

TEST_CASE("invalid flow inputs") {
  const auto model = compile(three_path(1.0, 1.0));
  CHECK_THROWS(implicit_euler(model, vec({1, 0}), 1.0, 0.1, 1e-9));
  CHECK_THROWS(implicit_euler(model, vec({1, 0, NAN}), 1.0, 0.1, 1e-9));
}
