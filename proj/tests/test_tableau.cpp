#include <doctest.h>

#include <cmath>
#include <random>

#include "rkforge/errors.hpp"
#include "rkforge/metrics.hpp"
#include "rkforge/rooted_trees.hpp"
#include "rkforge/tableau.hpp"

using namespace rkforge;

namespace {

// The free parameters that reproduce the printed (4,6) tableau; derived
// from its node column and the a65/a75/a76/a86/a87 entries.
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

FamilyParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  FamilyParams p{};
  p.c2 = 0.02 + 0.18 * u01(rng);
  std::array<double, 5> nodes;
  for (double& v : nodes) v = 0.1 + 0.9 * u01(rng);
  std::sort(nodes.begin(), nodes.end());
  p.c4 = nodes[0];
  p.c5 = nodes[1];
  p.c6 = nodes[2];
  p.c7 = nodes[3];
  p.c8 = nodes[4];
  p.a65 = -3.0 + 6.0 * u01(rng);
  p.a75 = -3.0 + 6.0 * u01(rng);
  p.a76 = -3.0 + 6.0 * u01(rng);
  p.a86 = -3.0 + 6.0 * u01(rng);
  p.a87 = -3.0 + 6.0 * u01(rng);
  return p;
}

}  // namespace

TEST_CASE("q_vector: q0 vanishes, family q1/q2 have the pinned supports") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  CHECK(q_vector(dp.tableau, 0).cwiseAbs().maxCoeff() < 1e-15);

  const ContinuousPair fam = construct_family(table46_params());
  CHECK(q_vector(fam.tableau, 0).cwiseAbs().maxCoeff() < 1e-13);
  const Eigen::VectorXd q1 = q_vector(fam.tableau, 1);
  const Eigen::VectorXd q2 = q_vector(fam.tableau, 2);
  for (int i = 0; i < 9; ++i) {
    if (i != 1) CHECK(std::abs(q1(i)) < 1e-13);
    if (i != 1 && i != 2) CHECK(std::abs(q2(i)) < 1e-13);
  }
  CHECK(std::abs(q1(1)) > 1e-4);
  const Eigen::VectorXd a_q1 = fam.tableau.A * q1;
  for (int i = 0; i < 9; ++i) {
    if (i != 2) CHECK(std::abs(a_q1(i)) < 1e-13);
  }
  CHECK_THROWS_AS(q_vector(dp.tableau, -1), std::invalid_argument);
}

TEST_CASE("construct_family reproduces the printed (4,6) tableau") {
  const ContinuousPair pair = construct_family(table46_params());
  const ContinuousPair golden = builtin_pair("table46");

  REQUIRE(pair.tableau.s == 9);
  CHECK(pair.tableau.fsal_stage == 9);
  CHECK((pair.tableau.c - golden.tableau.c).cwiseAbs().maxCoeff() < 1e-15);
  // Rows 1..8 entry-by-entry, then the derived weights row.
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 9; ++j) {
      CHECK(pair.tableau.A(i, j) == doctest::Approx(golden.tableau.A(i, j)).epsilon(1e-12));
    }
  }
  CHECK((pair.tableau.b - golden.tableau.b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pair.tableau.b(8) == 0.0);

  // a41 = c4/4 and a43 = 3 c4/4 hold across the family.
  CHECK(pair.tableau.A(3, 0) == doctest::Approx(3.0 / 56.0).epsilon(1e-14));
  CHECK(pair.tableau.A(3, 2) == doctest::Approx(9.0 / 56.0).epsilon(1e-14));
}

TEST_CASE("family structure holds for random parameters") {
  std::mt19937_64 rng(2024);
  int successes = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const FamilyParams p = random_params(rng);
    ContinuousPair pair;
    try {
      pair = construct_family(p);
    } catch (const error&) {
      continue;
    }
    ++successes;
    const ButcherTableau& tb = pair.tableau;
    CHECK(tb.A(3, 0) == doctest::Approx(p.c4 / 4.0).epsilon(1e-11));
    CHECK(tb.A(3, 2) == doctest::Approx(3.0 * p.c4 / 4.0).epsilon(1e-11));
    CHECK(std::abs(tb.b(8)) <= 1e-10);
    CHECK(verify_order(tb, tb.b, 5).max_abs() <= 1e-9);

    // (A q1) c = c3 A q1 and q2, q2 c in span{q1, A q1}.
    const Eigen::VectorXd q1 = q_vector(tb, 1);
    const Eigen::VectorXd a_q1 = tb.A * q1;
    CHECK((a_q1.cwiseProduct(tb.c) - tb.c(2) * a_q1).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd span(9, 2);
    span.col(0) = q1;
    span.col(1) = a_q1;
    const Eigen::VectorXd q2 = q_vector(tb, 2);
    const Eigen::VectorXd q2c = q2.cwiseProduct(tb.c);
    const auto qr = span.colPivHouseholderQr();
    CHECK((q2 - span * qr.solve(q2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((q2c - span * qr.solve(q2c)).cwiseAbs().maxCoeff() < 1e-10);

    // beta_2 and beta_3 vanish identically (to the conditioning of M).
    const double b_scale = std::max(1.0, pair.interpolant->B.cwiseAbs().maxCoeff());
    CHECK(pair.interpolant->B.col(1).cwiseAbs().maxCoeff() < 1e-8 * b_scale);
    CHECK(pair.interpolant->B.col(2).cwiseAbs().maxCoeff() < 1e-8 * b_scale);
  }
  CHECK(successes >= 30);
}

TEST_CASE("degenerate parameters are rejected") {
  FamilyParams p = table46_params();
  p.c5 = p.c4;
  CHECK_THROWS_AS(construct_family(p), degenerate_family_error);
  p = table46_params();
  p.c8 = 1.5;
  CHECK_THROWS_AS(construct_family(p), degenerate_family_error);
  p = table46_params();
  p.c2 = 0.0;
  CHECK_THROWS_AS(construct_family(p), degenerate_family_error);
}

TEST_CASE("build_interpolant: C1 end conditions and first-order sum") {
  const ContinuousPair pair = builtin_pair("table46");
  const Interpolant& interp = *pair.interpolant;

  CHECK((interp.beta(1.0) - pair.tableau.b).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((interp.beta_derivative(0.0) - Eigen::VectorXd::Unit(9, 0)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((interp.beta_derivative(1.0) - Eigen::VectorXd::Unit(9, 8)).cwiseAbs().maxCoeff() <
        1e-12);
  // Row sums: row 1 of B sums to 1, rows 2..5 to 0, so sum beta_j = theta.
  CHECK(interp.B.row(0).sum() == doctest::Approx(1.0).epsilon(1e-13));
  for (int k = 1; k < 5; ++k) CHECK(std::abs(interp.B.row(k).sum()) < 1e-12);
  for (int g = 0; g <= 10; ++g) {
    const double theta = g / 10.0;
    CHECK(interp.beta(theta).sum() == doctest::Approx(theta).epsilon(1e-13));
  }
}

TEST_CASE("build_interpolant satisfies order-5 continuous conditions on a grid") {
  const ContinuousPair pair = builtin_pair("table46");
  double worst = 0.0;
  for (double theta : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const Eigen::VectorXd x = pair.interpolant->beta(theta);
    for (int p = 1; p <= 5; ++p) {
      for (const RootedTree& t : enumerate_trees(p)[p - 1]) {
        worst = std::max(worst, std::abs(tau(t, x, theta, pair.tableau)));
      }
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("build_interpolant rejects non-9-stage input") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  CHECK_THROWS_AS(build_interpolant(dp.tableau.A, dp.tableau.c), std::invalid_argument);
}

TEST_CASE("derive_error_weights: Dormand-Prince published difference vector") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  REQUIRE(dp.d_basis.size() == 1);
  const Eigen::VectorXd x = dp.tableau.b + dp.d_basis[0];
  for (int p = 1; p <= 4; ++p) {
    for (const RootedTree& t : enumerate_trees(p)[p - 1]) {
      CHECK(std::abs(tau(t, x, 1.0, dp.tableau)) < 1e-12);
    }
  }
  double worst5 = 0.0;
  for (const RootedTree& t : enumerate_trees(5)[4]) {
    worst5 = std::max(worst5, std::abs(tau(t, x, 1.0, dp.tableau)));
  }
  CHECK(worst5 > 1e-6);
}

TEST_CASE("derive_error_weights: family basis has dimension 3, staircase order") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    ContinuousPair pair;
    try {
      pair = construct_family(random_params(rng));
    } catch (const error&) {
      continue;
    }
    const auto& basis = pair.d_basis;
    REQUIRE(basis.size() >= 3);
    auto top = [](const Eigen::VectorXd& v) {
      int idx = -1;
      for (int i = 0; i < v.size(); ++i) {
        if (v(i) != 0.0) idx = i;
      }
      return idx;
    };
    for (std::size_t m = 0; m + 1 < basis.size(); ++m) {
      CHECK(top(basis[m]) < top(basis[m + 1]));  // fewer stages first
    }
    for (const Eigen::VectorXd& d : basis) {
      CHECK(d.cwiseAbs().maxCoeff() == doctest::Approx(1.0));  // unit max entry
      // b + alpha d stays order 4 for scaled alpha (closure under scaling).
      for (double alpha : {1.0, -2.5, 0.125}) {
        const Eigen::VectorXd x = pair.tableau.b + alpha * d;
        for (int p = 1; p <= 4; ++p) {
          for (const RootedTree& t : enumerate_trees(p)[p - 1]) {
            CHECK(std::abs(tau(t, x, 1.0, pair.tableau)) < 1e-9 * std::max(1.0, alpha));
          }
        }
      }
      double worst5 = 0.0;
      for (const RootedTree& t : enumerate_trees(5)[4]) {
        worst5 = std::max(worst5, std::abs(tau(t, pair.tableau.b + d, 1.0, pair.tableau)));
      }
      CHECK(worst5 >= 1e-6);
    }
  }
}

TEST_CASE("verify_order: pinned residuals") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  CHECK(verify_order(dp.tableau, dp.tableau.b, 5).max_abs() < 1e-12);

  const ContinuousPair t46 = builtin_pair("table46");
  CHECK(verify_order(t46.tableau, t46.tableau.b, 6).max_abs() < 1e-13);

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(7);
  const OrderReport rep = verify_order(dp.tableau, zero, 1);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].max_abs_residual == doctest::Approx(1.0));
}

TEST_CASE("a85 residual affinity: construction self-check passes on perturbed params") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  for (int trial = 0; trial < 10; ++trial) {
    FamilyParams p = table46_params();
    p.c5 += u(rng);
    p.c6 += u(rng);
    p.a65 += u(rng);
    // Throws internal_consistency_error if the affinity check ever fails.
    CHECK_NOTHROW(construct_family(p));
  }
}

TEST_CASE("builtin: table46 golden coefficients") {
  const ContinuousPair pair = builtin_pair("table46");
  REQUIRE(pair.exact != nullptr);

  // Node column as printed.
  const double c_expect[9] = {0.0,        1.0 / 14.0, 1.0 / 7.0, 3.0 / 14.0, 0.5,
                              9.0 / 14.0, 6.0 / 7.0,  1.0,       1.0};
  for (int i = 0; i < 9; ++i) CHECK(pair.tableau.c(i) == c_expect[i]);

  // Weights as printed, sum to 1, b9 = 0 exactly.
  const double b_expect[9] = {16.0 / 243.0,  0.0, 0.0, 16807.0 / 53460.0, 53.0 / 300.0,
                              2401.0 / 12150.0, 2401.0 / 12150.0, 79.0 / 1650.0, 0.0};
  for (int i = 0; i < 9; ++i) CHECK(pair.tableau.b(i) == b_expect[i]);
  CHECK(pair.tableau.b.sum() == doctest::Approx(1.0).epsilon(1e-15));

  // Rational retention: every stored double is the correctly rounded p/q.
  for (int i = 0; i < 9; ++i) {
    CHECK(pair.tableau.c(i) == pair.exact->c[i].to_double());
    CHECK(pair.tableau.b(i) == pair.exact->b[i].to_double());
    for (int j = 0; j < 9; ++j) {
      CHECK(pair.tableau.A(i, j) == pair.exact->A[i][j].to_double());
    }
  }
  CHECK(pair.order_high == 6);
  CHECK(pair.d_basis.size() == 3);
  CHECK_NOTHROW(pair.tableau.validate(1e-12));
}

TEST_CASE("builtin: dormand_prince golden values") {
  const ContinuousPair pair = builtin_pair("dormand_prince");
  CHECK(pair.tableau.s == 7);
  CHECK(pair.tableau.fsal_stage == 7);
  CHECK(!pair.interpolant.has_value());
  CHECK(pair.tableau.A.cwiseAbs().maxCoeff() ==
        doctest::Approx(11.595793324188385).epsilon(1e-13));
  CHECK_NOTHROW(pair.tableau.validate(1e-12));
  CHECK_THROWS_AS(builtin_pair("unknown"), std::invalid_argument);
}
