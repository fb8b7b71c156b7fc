#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rkforge/rational.hpp"
#include "rkforge/rooted_trees.hpp"

namespace rkforge {

/// Coefficient scheme (A, b, c) of an explicit Runge-Kutta method.
/// A is strictly lower triangular, row sums equal c, and if fsal_stage = u
/// is set (1-based), c_u = 1 and row u of A equals b.
struct ButcherTableau {
  int s = 0;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  int fsal_stage = 0;  // 0 = no FSAL stage

  /// Checks the structural invariants above; throws internal_consistency_error.
  void validate(double tol = 1e-12) const;
};

/// q_n = A c^n - c^{n+1} / (n+1); q_0 vanishes for any row-sum-valid tableau.
Eigen::VectorXd q_vector(const ButcherTableau& tableau, int n);

/// Dense-output weights beta_j(theta) = sum_m B(m,j) theta^(m+1).
/// There is no constant term, so beta(0) = 0 by construction.
struct Interpolant {
  Eigen::MatrixXd B;  // degree x s

  int degree() const { return static_cast<int>(B.rows()); }
  int stages() const { return static_cast<int>(B.cols()); }
  Eigen::VectorXd beta(double theta) const;
  Eigen::VectorXd beta_derivative(double theta) const;
};

/// Exact coefficients retained for builtin pairs, so conversion to double
/// can be golden-tested against the published rationals.
struct RationalTableau {
  std::vector<Rational> c;
  std::vector<std::vector<Rational>> A;  // s rows of s entries
  std::vector<Rational> b;
  std::vector<std::vector<Rational>> d;  // difference vectors, may be empty
};

/// An embedded pair with optional order-5 interpolant and the basis of
/// error-difference vectors d (b + d is a weight vector of order exactly
/// order_low).
struct ContinuousPair {
  ButcherTableau tableau;
  std::optional<Interpolant> interpolant;
  std::vector<Eigen::VectorXd> d_basis;
  int order_low = 4;
  int order_high = 5;
  std::shared_ptr<const RationalTableau> exact;  // builtins only
};

/// The 11 free parameters of the 9-stage family. The remaining nodes are
/// c1 = 0, c3 = 2 c4 / 3, c9 = 1, and a85 is determined by the b9 = 0
/// condition.
struct FamilyParams {
  double c2, c4, c5, c6, c7, c8;
  double a65, a75, a76, a86, a87;

  std::array<double, 11> to_array() const;
  static FamilyParams from_array(const std::array<double, 11>& v);

  /// Throws degenerate_family_error when nodes coincide (within min_sep),
  /// any node leaves (0, 1], or c2/c4 vanish.
  void validate(double min_sep = 1e-6) const;
};

struct InterpolantBuild {
  Interpolant interpolant;
  Eigen::VectorXd b;  // column sums of B; the C1 condition beta(1) = b
};

/// Builds the degree-5 interpolant matrix for a 9-stage family tableau
/// whose rows 1..8 are filled: B = diag(1, 1/2, ..., 1/5) * M^-1 with
/// M = [1 | c | c^2 | c^3 | c^4 | q1 | A q1 | A^2 q1 | q3], the ninth
/// components of the four q-vectors forced to zero. Asserts the C1 end
/// conditions beta'(0) = e_1 and beta'(1) = e_9 to 1e-10.
/// Throws singular_family_error when M is numerically singular.
InterpolantBuild build_interpolant(const Eigen::MatrixXd& A, const Eigen::VectorXd& c);

/// Constructs the full continuous pair from the 11 parameters. Throws
/// degenerate_family_error / singular_family_error / internal_consistency_error
/// when the parameters are degenerate, the interpolant matrix is singular,
/// or the construction fails its own verification gates.
ContinuousPair construct_family(const FamilyParams& params);

/// Numerical null-space basis of the order-<=4 elementary-weight matrix,
/// reduced so vectors supported on fewer late stages come first, then
/// orthonormalized in that order and rescaled to unit max-magnitude entry.
/// Each vector is checked to violate at least one order-5 condition.
std::vector<Eigen::VectorXd> derive_error_weights(const ContinuousPair& pair);

struct OrderResidual {
  int order;
  double max_abs_residual;
  RootedTree worst_tree;
};

struct OrderReport {
  std::vector<OrderResidual> rows;
  double max_abs() const;
};

/// Worst |tau(t, x, 1)| per tree order up to max_order.
OrderReport verify_order(const ButcherTableau& tableau, const Eigen::VectorXd& x,
                         int max_order);

/// Builtin pairs: "table46" (the 9-stage (4,6) pair with its interpolant)
/// and "dormand_prince" (7 stages, u = 7, no order-5 interpolant, one
/// difference vector from the published 4th-order weights).
/// Throws std::invalid_argument for unknown names.
ContinuousPair builtin_pair(const std::string& name);

std::vector<std::string> builtin_pair_names();

}  // namespace rkforge
