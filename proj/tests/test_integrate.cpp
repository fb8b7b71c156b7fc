#include <doctest.h>

#include <cmath>
#include <random>

#include "rkforge/errors.hpp"
#include "rkforge/integrate.hpp"
#include "rkforge/metrics.hpp"
#include "rkforge/problems.hpp"

using namespace rkforge;

namespace {

OdeSystem zero_system(int n) {
  OdeSystem sys;
  sys.dimension = n;
  sys.rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dx) { dx.setZero(); };
  return sys;
}

OdeSystem linear_system(double lambda) {
  OdeSystem sys;
  sys.dimension = 1;
  sys.rhs = [lambda](double, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx(0) = lambda * x(0);
  };
  return sys;
}

double fit_slope(const std::vector<double>& log_h, const std::vector<double>& log_e) {
  const std::size_t n = log_h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += log_h[i];
    sy += log_e[i];
    sxx += log_h[i] * log_h[i];
    sxy += log_h[i] * log_e[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("step: zero field is exactly preserved with zero estimates") {
  const ContinuousPair pair = builtin_pair("dormand_prince");
  const Eigen::VectorXd x0 = Eigen::Vector3d(1.0, -2.0, 0.5);
  const StepResult res = step(pair, zero_system(3), 0.0, x0, 0.7);
  CHECK((res.x_next - x0).cwiseAbs().maxCoeff() == 0.0);
  for (double e : res.error_estimates) CHECK(e == 0.0);
  CHECK_THROWS_AS(step(pair, zero_system(3), 0.0, x0, -1.0), std::invalid_argument);
}

TEST_CASE("step: one step on x' = lambda x equals R(lambda h) x") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const char* name : {"dormand_prince", "table46"}) {
    const ContinuousPair pair = builtin_pair(name);
    const StabilityPolynomial poly = stability_polynomial(pair.tableau, pair.tableau.b);
    for (int trial = 0; trial < 20; ++trial) {
      const double z = 2.0 * u(rng);
      const double h = 0.05 + 0.95 * std::abs(u(rng));
      const double lambda = z / h;
      Eigen::VectorXd x0(1);
      x0(0) = 1.0;
      const StepResult res = step(pair, linear_system(lambda), 0.0, x0, h);
      const double expected = poly.evaluate({z, 0.0}).real();
      CHECK(std::abs(res.x_next(0) - expected) < 1e-14);
    }
  }
}

TEST_CASE("step: FSAL carry-in reproduces the no-carry stage values") {
  const ContinuousPair pair = builtin_pair("table46");
  const TestProblem rot = problem("rotation");
  Eigen::VectorXd f1(2);
  rot.system.rhs(0.0, rot.x0, f1);
  const StepResult with = step(pair, rot.system, 0.0, rot.x0, 0.3, &f1);
  const StepResult without = step(pair, rot.system, 0.0, rot.x0, 0.3);
  CHECK((with.x_next - without.x_next).cwiseAbs().maxCoeff() == 0.0);
  CHECK((with.stages - without.stages).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("step: one Dormand-Prince step around the quarter circle") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  const TestProblem rot = problem("rotation");
  const double h = 1.5707963267948966;
  const StepResult res = step(dp, rot.system, 0.0, rot.x0, h);
  const Eigen::Vector2d exact(0.0, 1.0);
  const double err = (res.x_next - exact).norm();
  CHECK(err < 1e-2);  // "remarkably close" for a single quarter-turn step
  CHECK(err == doctest::Approx(6.793454757095507e-3).epsilon(1e-9));
}

TEST_CASE("step propagates non-finite right-hand sides as errors") {
  OdeSystem sys;
  sys.dimension = 1;
  sys.rhs = [](double t, const Eigen::VectorXd&, Eigen::VectorXd& dx) {
    dx(0) = t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
  };
  const ContinuousPair pair = builtin_pair("dormand_prince");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(step(pair, sys, 0.0, x0, 2.0), error);
}

TEST_CASE("solve: zero field accepts every step and h grows to h_max") {
  const ContinuousPair pair = builtin_pair("dormand_prince");
  SolveOptions opts;
  opts.atol = 1e-8;
  const Solution sol = solve(pair, zero_system(2), 0.0, Eigen::Vector2d(1.0, 2.0), 50.0, opts);
  REQUIRE(sol.status == Solution::Status::ok);
  CHECK(sol.rejections == 0);
  CHECK(sol.t_final == 50.0);
  // E = 0 caps the growth ratio at 10 per step until h_max = t_end - t0.
  CHECK(sol.steps[1].h == doctest::Approx(1e-2).epsilon(1e-15));
  CHECK(sol.steps[2].h == doctest::Approx(1e-1).epsilon(1e-15));
  bool reached = false;
  for (const auto& rec : sol.steps) reached |= rec.h == 50.0 - rec.t;
  CHECK(sol.steps.size() <= 7);
}

TEST_CASE("solve: accepted-step estimates stay below the tolerance") {
  const ContinuousPair pair = builtin_pair("dormand_prince");
  for (double atol : {1e-3, 1e-5, 1e-7, 1e-9}) {
    SolveOptions opts;
    opts.atol = atol;
    const Solution sol =
        solve(pair, linear_system(-1.0), 0.0, Eigen::VectorXd::Ones(1), 10.0, opts);
    REQUIRE(sol.status == Solution::Status::ok);
    for (const auto& rec : sol.steps) {
      for (double e : rec.error_estimates) CHECK(e <= atol);
    }
    // Estimates exist for every accepted step (all vectors tried).
    CHECK(sol.steps.back().error_estimates.size() == pair.d_basis.size());
  }
}

TEST_CASE("solve: FSAL evaluation accounting") {
  for (const char* name : {"dormand_prince", "table46"}) {
    const ContinuousPair pair = builtin_pair(name);
    const TestProblem a3 = problem("A3");
    SolveOptions opts;
    opts.atol = 1e-7;
    const Solution sol = solve(pair, a3.system, a3.t0, a3.x0, a3.t_end, opts);
    REQUIRE(sol.status == Solution::Status::ok);
    const long s = pair.tableau.s;
    const long accepted = static_cast<long>(sol.steps.size());
    // s evaluations for the first step, s-1 for every later attempt.
    CHECK(sol.rhs_evaluations - sol.rhs_evaluations_rejected ==
          s + (accepted - 1) * (s - 1));
    CHECK(sol.rhs_evaluations_rejected == sol.rejections * (s - 1));
    CHECK(sol.rejections > 0);  // the sweep should exercise rejection
  }
}

TEST_CASE("solve: final step lands exactly on t_end") {
  const ContinuousPair pair = builtin_pair("table46");
  const TestProblem a3 = problem("A3");
  SolveOptions opts;
  opts.atol = 1e-6;
  const Solution sol = solve(pair, a3.system, a3.t0, a3.x0, a3.t_end, opts);
  REQUIRE(sol.status == Solution::Status::ok);
  CHECK(sol.t_final == a3.t_end);
  double t = a3.t0;
  for (const auto& rec : sol.steps) {
    CHECK(rec.t == t);  // contiguous steps
    t = rec.t + rec.h == a3.t_end ? a3.t_end : t + rec.h;
  }
}

TEST_CASE("solve: failure statuses carry partial data") {
  const ContinuousPair pair = builtin_pair("dormand_prince");
  const TestProblem a3 = problem("A3");
  SolveOptions opts;
  opts.atol = 1e-9;
  opts.max_steps = 5;
  const Solution limited = solve(pair, a3.system, a3.t0, a3.x0, a3.t_end, opts);
  CHECK(limited.status == Solution::Status::step_limit_exceeded);
  CHECK(limited.t_final < a3.t_end);

  SolveOptions opts2;
  opts2.atol = 1e-12;
  opts2.h0 = 0.5;
  opts2.h_min = 0.05;
  const Solution stalled = solve(pair, a3.system, a3.t0, a3.x0, a3.t_end, opts2);
  CHECK(stalled.status == Solution::Status::min_step_reached);
  CHECK(stalled.t_final < a3.t_end);
}

TEST_CASE("dense_eval: C0 continuity at step endpoints") {
  const ContinuousPair pair = builtin_pair("table46");
  const TestProblem rot = problem("rotation");
  SolveOptions opts;
  opts.atol = 1e-8;
  const Solution sol = solve(pair, rot.system, rot.t0, rot.x0, rot.t_end, opts);
  REQUIRE(sol.status == Solution::Status::ok);
  for (const auto& rec : sol.steps) {
    const double scale = rec.x_end.norm();
    CHECK((sol.dense_eval(rec.t) - rec.x_begin).norm() <= 1e-13 * std::max(1.0, scale));
    const double t_end_step = rec.t + rec.h;
    if (t_end_step <= sol.t_final) {
      CHECK((sol.dense_eval(std::min(t_end_step, sol.t_final)) - rec.x_end).norm() <=
            1e-13 * std::max(1.0, scale));
    }
  }
  CHECK_THROWS_AS(sol.dense_eval(rot.t_end + 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sol.dense_eval(rot.t0 - 1.0), std::invalid_argument);
}

TEST_CASE("dense_eval: C1 continuity across FSAL steps") {
  const ContinuousPair pair = builtin_pair("table46");
  const TestProblem rot = problem("rotation");
  SolveOptions opts;
  opts.atol = 1e-8;
  const Solution sol = solve(pair, rot.system, rot.t0, rot.x0, rot.t_end, opts);
  REQUIRE(sol.steps.size() >= 3);
  // Richardson-extrapolated one-sided slopes so the comparison is not
  // dominated by the finite-difference truncation itself.
  auto one_sided = [&](double t, double eps) {
    const Eigen::VectorXd d1 = (sol.dense_eval(t + eps) - sol.dense_eval(t)) / eps;
    const Eigen::VectorXd d2 = (sol.dense_eval(t + eps / 2) - sol.dense_eval(t)) / (eps / 2);
    return (2.0 * d2 - d1).eval();
  };
  for (std::size_t k = 1; k + 1 < sol.steps.size(); ++k) {
    const double t = sol.steps[k].t;
    const Eigen::VectorXd left = one_sided(t, -1e-5);
    const Eigen::VectorXd right = one_sided(t, 1e-5);
    CHECK((left - right).norm() < 1e-8 * std::max(1.0, sol.dense_eval(t).norm()));
  }
}

TEST_CASE("fixed-step convergence orders on A3") {
  const TestProblem a3 = problem("A3");
  // The slope is measured over each method's asymptotic window: coarser
  // steps are pre-asymptotic on A3, much finer ones sit on the rounding
  // floor. Error is the max over step endpoints.
  auto study = [&](const ContinuousPair& pair, int k_lo, int k_hi) {
    std::vector<double> lh, le;
    for (int k = k_lo; k <= k_hi; ++k) {
      const double h = a3.t_end / std::pow(2.0, k);
      const Solution sol = solve_fixed(pair, a3.system, a3.t0, a3.x0, a3.t_end, h);
      double err = 0.0;
      for (const auto& rec : sol.steps) {
        err = std::max(err, (rec.x_end - a3.reference(rec.t + rec.h)).norm());
      }
      lh.push_back(std::log(h));
      le.push_back(std::log(err));
    }
    return fit_slope(lh, le);
  };
  // Order-5 weights of a constructed pair.
  FamilyParams p{};
  p.c2 = 1.0 / 14.0;
  p.c4 = 3.0 / 14.0;
  p.c5 = 0.45;
  p.c6 = 9.0 / 14.0;
  p.c7 = 6.0 / 7.0;
  p.c8 = 1.0;
  p.a65 = 3.0 / 7.0;
  p.a75 = -0.7;
  p.a76 = 45.0 / 56.0;
  p.a86 = -1.8;
  p.a87 = 0.6;
  const double slope5 = study(construct_family(p), 6, 10);
  CHECK(slope5 > 4.8);
  CHECK(slope5 < 5.2);
  const double slope6 = study(builtin_pair("table46"), 7, 9);
  CHECK(slope6 > 5.8);
  CHECK(slope6 < 6.2);
}

TEST_CASE("embedded estimator scales as h^5") {
  const ContinuousPair dp = builtin_pair("dormand_prince");
  const TestProblem a3 = problem("A3");
  std::vector<double> lh, le;
  for (int k = 6; k <= 10; ++k) {
    const double h = a3.t_end / std::pow(2.0, k);
    const StepResult res = step(dp, a3.system, 1.0, a3.reference(1.0), h);
    lh.push_back(std::log(h));
    le.push_back(std::log(res.error_estimates[0]));
  }
  const double slope = fit_slope(lh, le);
  CHECK(slope > 4.8);
  CHECK(slope < 5.2);
}

TEST_CASE("dense output interior error drops by 2^6 per step halving") {
  const ContinuousPair pair = builtin_pair("table46");
  const TestProblem rot = problem("rotation");
  std::vector<double> lh, le;
  for (int k = 0; k <= 5; ++k) {
    const double h = 1.0 / std::pow(2.0, k);
    const Solution sol = solve_fixed(pair, rot.system, 0.0, rot.x0, h, h);
    double worst = 0.0;
    for (int m = 1; m < 12; ++m) {
      const double t = h * m / 12.0;
      worst = std::max(worst, (sol.dense_eval(t) - rot.reference(t)).norm());
    }
    lh.push_back(std::log(h));
    le.push_back(std::log(worst));
  }
  const double slope = fit_slope(lh, le);
  CHECK(slope > 5.7);
  CHECK(slope < 6.3);
}
