#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rkforge/integrate.hpp"

namespace rkforge {

/// A named initial-value problem with a reference solution accurate to
/// ~1e-12 of the solution scale over the window.
struct TestProblem {
  std::string name;
  OdeSystem system;
  double t0 = 0.0, t_end = 0.0;
  Eigen::VectorXd x0;
  std::function<Eigen::VectorXd(double)> reference;
  bool closed_form = false;
};

/// Known problems: "A3" (x' = x cos t), "D5" (two-body, eccentricity 0.9),
/// "E2" (van der Pol), "rotation" (x' = -y, y' = x). The U-problems are
/// rejected with an explanatory message.
TestProblem problem(const std::string& name);

/// Solves the Kepler equation Ecc - e sin(Ecc) = m for the eccentric
/// anomaly to 1e-14 (Newton with a bisection safeguard).
double solve_kepler(double mean_anomaly, double eccentricity);

struct WorkPrecisionPoint {
  double atol;
  long rhs_evals;
  double max_error;  // max over accepted step endpoints of |x - x_ref|_2
  long rejections;
  bool ok;  // false when the solve failed; other fields undefined then
};

/// One adaptive solve per tolerance; failures are recorded, not thrown.
std::vector<WorkPrecisionPoint> work_precision(const ContinuousPair& pair,
                                               const TestProblem& prob,
                                               std::span<const double> atols);

/// Parses "1e-3:1e-9:0.5dec" style grids into a descending tolerance list.
std::vector<double> parse_atol_grid(const std::string& text);

/// One uncontrolled step of size h on the rotation system from (1, 0):
/// the data behind the single-step circle figure.
struct CircleTestResult {
  double h;
  Eigen::Vector2d endpoint;
  Eigen::Vector2d endpoint_error;               // endpoint - (cos h, sin h)
  std::vector<Eigen::Vector2d> stage_positions;  // X_i, 1 <= i <= s
  std::vector<double> thetas;                    // interpolation ticks
  std::vector<Eigen::Vector2d> interpolant_error;
};

CircleTestResult circle_test(const ContinuousPair& pair, double h = 1.5707963267948966,
                             int ticks = 11);

}  // namespace rkforge
