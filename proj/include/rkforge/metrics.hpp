#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "rkforge/tableau.hpp"

namespace rkforge {

/// T_p(x, 1): endpoint local-error norm of the weight vector x.
double endpoint_error(const ContinuousPair& pair, const Eigen::VectorXd& x, int p);

struct ThetaMax {
  double theta;
  double value;
};

/// max over theta in [0,1] of T_p(beta(theta), theta): 1001-point grid scan
/// followed by golden-section refinement to theta-tolerance 1e-8.
ThetaMax continuous_error_max(const ContinuousPair& pair, int p);

/// Total variation V = sum_j int_0^1 |beta_j'(theta)| dtheta, computed
/// exactly by isolating the real roots of each quartic beta_j' in (0,1).
double total_variation(const Interpolant& interpolant);

/// Same integral restricted to negative-slope regions; V = 1 + 2N.
double negativity(const Interpolant& interpolant);

/// T_p(a_i*, c_i): stage-error norm of row i (1-based) of A.
double stage_error(const ButcherTableau& tableau, int i, int p = 3);

/// Stability function R(z) = sum_k r_k z^k with r_0 = 1 and
/// r_k = x . A^(k-1) . 1 (finite: A is nilpotent).
struct StabilityPolynomial {
  Eigen::VectorXd coefficients;  // r_0 .. r_s

  int degree() const;
  std::complex<double> evaluate(std::complex<double> z) const;
};

StabilityPolynomial stability_polynomial(const ButcherTableau& tableau,
                                         const Eigen::VectorXd& x);

struct RegionGrid {
  double re0, re1, im0, im1;
  int nx = 401, ny = 401;
};

/// Marching-squares contour of |R(scale z)| = 1 over the window, returned
/// as ordered polylines. Throws std::invalid_argument on an empty window.
std::vector<std::vector<std::complex<double>>> stability_region(
    const StabilityPolynomial& poly, double scale, const RegionGrid& grid);

/// Real roots of sum_k coeffs[k] theta^k inside the open interval (0,1),
/// ascending, found by recursive derivative isolation and bisection.
/// Exposed for tests; degree <= 4 is what the variation integrals need.
std::vector<double> polynomial_roots_unit_interval(std::vector<double> coeffs);

}  // namespace rkforge
