#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "rkforge/errors.hpp"
#include "rkforge/metrics.hpp"
#include "rkforge/optimize.hpp"

using namespace rkforge;

namespace {

FamilyParams table46_params() {
  FamilyParams p{};
  p.c2 = 1.0 / 14.0;
  p.c4 = 3.0 / 14.0;
  p.c5 = 0.5;
  p.c6 = 9.0 / 14.0;
  p.c7 = 6.0 / 7.0;
  p.c8 = 1.0;
  p.a65 = 3.0 / 7.0;
  p.a75 = -3855.0 / 5488.0;
  p.a76 = 45.0 / 56.0;
  p.a86 = -94325.0 / 51192.0;
  p.a87 = 3773.0 / 6399.0;
  return p;
}

bool same_params(const FamilyParams& a, const FamilyParams& b) {
  return a.to_array() == b.to_array();
}

}  // namespace

TEST_CASE("objective_a equals its metric decomposition") {
  const FamilyParams p = table46_params();
  const ContinuousPair pair = construct_family(p);
  const double mt6 = continuous_error_max(pair, 6).value;
  const double v = total_variation(*pair.interpolant);
  const auto& A = pair.tableau.A;
  const double pen = (4.0 * A.array().square() + A.array().pow(4)).sum();
  const double expected = mt6 + 1e-4 * v + 1e-7 * pen;
  CHECK(objective_a(p) == doctest::Approx(expected).epsilon(1e-12));
  // Lower bound from the variation term: V >= 1.
  CHECK(objective_a(p) >= mt6 + 1e-4);
}

TEST_CASE("objective_b equals its penalty decomposition") {
  const FamilyParams p = table46_params();
  const ContinuousPair pair = construct_family(p);
  const double t6 = endpoint_error(pair, pair.tableau.b, 6);
  const double t7 = endpoint_error(pair, pair.tableau.b, 7);
  // The (4,6) point has T6 = 0, so the value is pure constraint penalty.
  CHECK(t6 < 1e-13);
  const double excess = std::max(0.0, t7 - 10.0 * t6);
  CHECK(objective_b(p) == doctest::Approx(t6 + 1e6 * excess * excess).epsilon(1e-10));
}

TEST_CASE("objectives return the infeasible sentinel on degenerate params") {
  FamilyParams p = table46_params();
  p.c5 = p.c4;
  CHECK(std::isinf(objective_a(p)));
  CHECK(std::isinf(objective_b(p)));
}

TEST_CASE("search with budget 1 from a known feasible start returns it") {
  const FamilyParams p = table46_params();
  const SearchResult res = search(ObjectiveSpec::a(), 0, 1, 17, {p});
  REQUIRE(res.found);
  CHECK(same_params(res.params, p));
  CHECK(res.objective == doctest::Approx(objective_a(p)).epsilon(1e-12));
  CHECK(res.evaluations == 1);
}

TEST_CASE("search reports no result when nothing feasible was seen") {
  // For objective B the (4,6) point itself is infeasible: T7 > 10 T6 = 0.
  const SearchResult res = search(ObjectiveSpec::b(), 0, 1, 17, {table46_params()});
  CHECK(!res.found);
  CHECK(res.evaluations == 1);
}

TEST_CASE("search is deterministic under a fixed seed and thread count") {
  const SearchResult a = search(ObjectiveSpec::a(), 3, 150, 421);
  const SearchResult b = search(ObjectiveSpec::a(), 3, 150, 421);
  REQUIRE(a.found);
  REQUIRE(b.found);
  CHECK(a.objective == b.objective);
  CHECK(same_params(a.params, b.params));

  setenv("RKFORGE_THREADS", "1", 1);
  const SearchResult c = search(ObjectiveSpec::a(), 3, 150, 421);
  unsetenv("RKFORGE_THREADS");
  REQUIRE(c.found);
  CHECK(c.objective == a.objective);
  CHECK(same_params(c.params, a.params));
}

TEST_CASE("search descends: best objective no worse than every start") {
  const SearchResult res = search(ObjectiveSpec::a(), 4, 400, 2026, {}, true);
  REQUIRE(res.found);
  CHECK(res.evaluations <= 4 * 400 + 4);
  for (const TracePoint& tp : res.trace) {
    if (tp.feasible) CHECK(res.objective <= tp.objective + 1e-15);
  }
  // The returned pair re-verifies.
  CHECK(verify_order(res.pair.tableau, res.pair.tableau.b, 5).max_abs() < 1e-9);
  CHECK(res.report.variation >= 1.0 - 1e-9);
}

TEST_CASE("rationalize: continued-fraction goldens") {
  CHECK(Rational::best_approximation(0.21428571428571427, 100) == Rational(3, 14));
  CHECK(Rational::best_approximation(0.5, 10) == Rational(1, 2));
  CHECK(Rational::best_approximation(-3855.0 / 5488.0, 6000) == Rational(-3855, 5488));
}

TEST_CASE("rationalize keeps already-rational parameters and re-verifies") {
  const FamilyParams p = table46_params();
  const RationalizeResult res = rationalize(p, ObjectiveSpec::a(), 1000000);
  CHECK(same_params(res.params, p));
  CHECK(res.rationals[1] == Rational(3, 14));
  CHECK(res.rationals[9] == Rational(-94325, 51192));
  CHECK(res.objective_after == doctest::Approx(res.objective_before).epsilon(1e-12));
}

TEST_CASE("rationalize drift stays small for nearby parameters") {
  FamilyParams p = table46_params();
  p.c5 += 3.1e-5;
  p.a76 -= 2.7e-5;
  const RationalizeResult res = rationalize(p, ObjectiveSpec::a(), 10000);
  CHECK(std::abs(res.objective_after - res.objective_before) <=
        0.05 * std::abs(res.objective_before));
}

TEST_CASE("rationalize rejects a degenerate rounding") {
  FamilyParams p = table46_params();
  p.c5 = p.c4 + 2e-4;  // collapses onto c4 once the denominator is capped
  CHECK_THROWS_AS(rationalize(p, ObjectiveSpec::a(), 20), error);
}
