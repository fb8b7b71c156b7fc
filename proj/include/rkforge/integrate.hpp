#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "rkforge/tableau.hpp"

namespace rkforge {

/// Right-hand side of dx/dt = f(t, x). The evaluator must be a pure
/// function of (t, x).
struct OdeSystem {
  int dimension = 0;
  std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt)> rhs;
};

struct SolveOptions {
  double atol = 1e-6;
  double h0 = 1e-3;
  double safety = 0.9;
  double exponent = 0.2;  // 1/5
  double h_min = -1.0;    // < 0: 1e-12 * (t_end - t0)
  double h_max = -1.0;    // < 0: t_end - t0
  long max_steps = 1000000;  // attempted steps
};

/// One accepted step: state at the step start, the stage derivatives, and
/// the error estimates of the difference vectors tried on acceptance.
struct StepRecord {
  double t, h;
  Eigen::VectorXd x_begin;
  Eigen::VectorXd x_end;
  Eigen::MatrixXd stages;  // s x n, row i = F_i
  std::vector<double> error_estimates;
};

class Solution {
 public:
  enum class Status { ok, step_limit_exceeded, min_step_reached };

  Status status = Status::ok;
  ContinuousPair pair;
  double t0 = 0.0, t_final = 0.0;
  std::vector<StepRecord> steps;
  long rhs_evaluations = 0;
  long rhs_evaluations_rejected = 0;  // subset spent on rejected attempts
  long rejections = 0;

  const Eigen::VectorXd& final_state() const { return steps.back().x_end; }

  /// Evaluates the continuous extension at t inside the solved window;
  /// step-boundary ties resolve to the earlier step. Requires the pair to
  /// carry an interpolant.
  Eigen::VectorXd dense_eval(double t) const;
};

struct StepResult {
  Eigen::VectorXd x_next;
  Eigen::MatrixXd stages;             // s x n
  std::vector<double> error_estimates;  // one per difference vector
};

/// One explicit RK step of size h > 0. When f1 is given it is used as the
/// first stage (FSAL carry-over); otherwise f(t, x) is evaluated.
/// Throws rkforge::error if the right-hand side returns non-finite values.
StepResult step(const ContinuousPair& pair, const OdeSystem& system, double t,
                const Eigen::VectorXd& x, double h, const Eigen::VectorXd* f1 = nullptr);

/// Adaptive solve with the h <- safety * h * (atol / E)^(1/5) rule.
/// Difference vectors are tried in order; the first E > atol rejects the
/// step and the next h uses the maximal E among the vectors tried.
Solution solve(const ContinuousPair& pair, const OdeSystem& system, double t0,
               const Eigen::VectorXd& x0, double t_end, const SolveOptions& opts);

/// Fixed-step driver (no error control); the last step is shortened to hit
/// t_end exactly. Used by convergence studies.
Solution solve_fixed(const ContinuousPair& pair, const OdeSystem& system, double t0,
                     const Eigen::VectorXd& x0, double t_end, double h);

}  // namespace rkforge
