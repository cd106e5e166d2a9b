#include "common.hpp"

#include "rwflow/poincare.hpp"

#include "doctest.h"

using namespace rwflow;
using namespace fixtures;

namespace {

EnergyModel tv_path() { return compile(three_path(1.0, 1.0)).restricted(0); }

}  // namespace

TEST_CASE("certified 2-Poincare constant of the 3-path") {
  PoincareEstimate est;
  REQUIRE(certified_lambda(tv_path(), PoincareMode::L2, 1.0, est));
  CHECK(est.lambda == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
  // Witness proportional to (1, -1/3, -1/3) up to sign.
  const VertexFunction w = est.witness / est.witness(0);
  CHECK(w(1) == doctest::Approx(-1.0 / 3.0));
  CHECK(w(2) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("dense sampling of the zero-mean circle agrees with the certified value") {
  // For three vertices the zero-mean unit sphere is a circle; parametrise it.
  const auto model = tv_path();
  const Vec nu = model.metric();
  Vec e1(3), e2(3);
  e1 << 1, 0, -1;  // nu-orthogonal to constants: 1 - 1 = 0
  e2 << 1, -1, 1;  // 1 - 2 + 1 = 0
  e2 -= e1 * (e1.cwiseProduct(e2).dot(nu) / e1.cwiseProduct(e1).dot(nu));
  double best = INFINITY;
  const int samples = 2000000;
  for (int k = 0; k < samples; ++k) {
    const double a = 2.0 * M_PI * k / samples;
    const VertexFunction u = std::cos(a) * e1 + std::sin(a) * e2;
    best = std::min(best, poincare_ratio(model, u, PoincareMode::L2));
  }
  CHECK(best == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-6));
}

TEST_CASE("heuristic estimate bounds") {
  const auto model = tv_path();
  const auto est = estimate_lambda(model, PoincareMode::L2, 1.0, 3);
  CHECK(est.certified);
  CHECK(est.heuristic >= est.lambda - 1e-9);
  CHECK(est.heuristic <= est.lambda * 1.05);
  const auto again = estimate_lambda(model, PoincareMode::L2, 1.0, 3);
  CHECK(again.heuristic == est.heuristic);
}

TEST_CASE("verify_poincare passes at the constant and fails above it") {
  const auto model = tv_path();
  const auto ok = verify_poincare(model, 2.0 / std::sqrt(3.0), PoincareMode::L2, 10000);
  CHECK(ok.passed);
  const auto bad = verify_poincare(model, 1.2, PoincareMode::L2, 10000);
  CHECK_FALSE(bad.passed);
  CHECK(bad.worst_ratio == doctest::Approx(2.0 / std::sqrt(3.0)));
}

TEST_CASE("L1 mode enumeration is a lower bound for random samples") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = from_weighted_graph(random_connected_weights(5, rng));
    const auto model = compile(TwoStructureProblem(s, s, GrowthSpec::tv(), GrowthSpec::tv())).restricted(0);
    PoincareEstimate est;
    REQUIRE(certified_lambda(model, PoincareMode::L1, 1.0, est));
    CHECK(poincare_ratio(model, est.witness, PoincareMode::L1) == doctest::Approx(est.lambda));
    CHECK(verify_poincare(model, est.lambda, PoincareMode::L1, 20000, 1.0, trial).passed);
    const auto h = estimate_lambda(model, PoincareMode::L1, 1.0, 7);
    CHECK(h.heuristic >= est.lambda - 1e-9);
  }
}

TEST_CASE("quadratic Q2 constant from the generalized eigenproblem") {
  std::mt19937_64 rng(6);
  const auto s = from_weighted_graph(random_connected_weights(6, rng));
  const auto model = compile(TwoStructureProblem(s, s, GrowthSpec::power(2.0), GrowthSpec::power(2.0)));
  PoincareEstimate est;
  REQUIRE(certified_lambda(model, PoincareMode::Q2, 2.0, est));
  CHECK(poincare_ratio(model, est.witness, PoincareMode::Q2, 2.0) == doctest::Approx(est.lambda).epsilon(1e-10));
  CHECK(verify_poincare(model, est.lambda, PoincareMode::Q2, 5000, 2.0).passed);
  // Random quadratic samples never beat the eigenvalue.
  std::mt19937_64 r2(1);
  for (int k = 0; k < 1000; ++k) {
    CHECK(poincare_ratio(model, random_vector(6, r2), PoincareMode::Q2, 2.0) >= est.lambda * (1 - 1e-12));
  }
}

TEST_CASE("mode parsing") {
  CHECK(parse_poincare_mode("L1") == PoincareMode::L1);
  CHECK(parse_poincare_mode("2") == PoincareMode::L2);
  CHECK(parse_poincare_mode("q2") == PoincareMode::Q2);
  CHECK_THROWS(parse_poincare_mode("L3"));
  CHECK(std::isinf(poincare_ratio(tv_path(), VertexFunction::Ones(3), PoincareMode::L2)));
}
