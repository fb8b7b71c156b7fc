#include "rkforge/tableau.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rkforge/errors.hpp"

namespace rkforge {

void ButcherTableau::validate(double tol) const {
  if (s < 1 || c.size() != s || b.size() != s || A.rows() != s || A.cols() != s) {
    throw internal_consistency_error("tableau dimensions inconsistent");
  }
  for (int i = 0; i < s; ++i) {
    for (int j = i; j < s; ++j) {
      if (A(i, j) != 0.0) throw internal_consistency_error("A is not strictly lower triangular");
    }
    const double row_sum = A.row(i).sum();
    if (std::abs(row_sum - c(i)) > tol) {
      throw internal_consistency_error("row sum of A differs from c");
    }
  }
  if (fsal_stage != 0) {
    if (fsal_stage < 2 || fsal_stage > s) throw internal_consistency_error("bad FSAL index");
    const int u = fsal_stage - 1;
    if (std::abs(c(u) - 1.0) > tol) throw internal_consistency_error("FSAL node is not 1");
    if ((A.row(u).transpose() - b).cwiseAbs().maxCoeff() > tol) {
      throw internal_consistency_error("FSAL row of A differs from b");
    }
  }
}

Eigen::VectorXd q_vector(const ButcherTableau& tableau, int n) {
  if (n < 0) throw std::invalid_argument("q_vector requires n >= 0");
  const Eigen::VectorXd cn = tableau.c.array().pow(n).matrix();
  const Eigen::VectorXd cn1 = tableau.c.array().pow(n + 1).matrix();
  return tableau.A * cn - cn1 / static_cast<double>(n + 1);
}

Eigen::VectorXd Interpolant::beta(double theta) const {
  const int k = degree();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(stages());
  for (int m = k - 1; m >= 0; --m) {
    acc = theta * acc + B.row(m).transpose();
  }
  return theta * acc;
}

Eigen::VectorXd Interpolant::beta_derivative(double theta) const {
  const int k = degree();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(stages());
  for (int m = k - 1; m >= 0; --m) {
    acc = theta * acc + (m + 1) * B.row(m).transpose();
  }
  return acc;
}

std::array<double, 11> FamilyParams::to_array() const {
  return {c2, c4, c5, c6, c7, c8, a65, a75, a76, a86, a87};
}

FamilyParams FamilyParams::from_array(const std::array<double, 11>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

void FamilyParams::validate(double min_sep) const {
  const double nodes[6] = {0.0, c4, c5, c6, c7, c8};
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      if (std::abs(nodes[i] - nodes[j]) < min_sep) {
        throw degenerate_family_error("family nodes coincide");
      }
    }
  }
  const double cs[6] = {c2, c4, c5, c6, c7, c8};
  for (double v : cs) {
    if (!(v > 0.0 && v <= 1.0)) throw degenerate_family_error("node outside (0, 1]");
  }
  if (std::abs(c2) < min_sep || std::abs(c4) < min_sep) {
    throw degenerate_family_error("c2 or c4 too close to zero");
  }
}

namespace {

using Matrix9 = Eigen::Matrix<double, 9, 9>;
using Vector9 = Eigen::Matrix<double, 9, 1>;

// Fills rows 1..8 (0-based 1..7) of A for a given a85; row 9 stays zero.
Matrix9 family_rows(const FamilyParams& p, const Vector9& c, double a85) {
  Matrix9 A = Matrix9::Zero();
  A(5, 4) = p.a65;
  A(6, 4) = p.a75;
  A(6, 5) = p.a76;
  A(7, 4) = a85;
  A(7, 5) = p.a86;
  A(7, 6) = p.a87;
  const double c3 = c(2), c4 = c(3);
  for (int i = 3; i < 8; ++i) {
    double s4 = 0.0, s3 = 0.0;
    for (int j = 4; j < i; ++j) {
      s4 += A(i, j) * c(j) * (c(j) - c3);
      s3 += A(i, j) * c(j) * (c(j) - c4);
    }
    A(i, 3) = (c(i) * c(i) * (c(i) - c4) - 3.0 * s4) / (c4 * c4);
    A(i, 2) = (c(i) * c(i) * (c4 - 2.0 * c(i) / 3.0) + 2.0 * s3) / (c3 * c3);
  }
  A(2, 1) = c3 * c3 / (2.0 * p.c2);
  for (int i = 1; i < 8; ++i) {
    double acc = 0.0;
    for (int j = 1; j < i; ++j) acc += A(i, j);
    A(i, 0) = c(i) - acc;
  }
  return A;
}

// M = [1 | c | c^2 | c^3 | c^4 | q1 | A q1 | A^2 q1 | q3] with the last
// components of the four q-vectors set to zero (rows 1..8 of A suffice).
Matrix9 interpolant_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& c) {
  Vector9 q1 = A * c - 0.5 * c.array().square().matrix();
  q1(8) = 0.0;
  Vector9 a_q1 = A * q1;
  a_q1(8) = 0.0;
  Vector9 a2_q1 = A * a_q1;
  a2_q1(8) = 0.0;
  Vector9 q3 = A * c.array().cube().matrix() - 0.25 * c.array().pow(4).matrix();
  q3(8) = 0.0;
  Matrix9 M;
  M.col(0).setOnes();
  M.col(1) = c;
  M.col(2) = c.array().square();
  M.col(3) = c.array().cube();
  M.col(4) = c.array().pow(4);
  M.col(5) = q1;
  M.col(6) = a_q1;
  M.col(7) = a2_q1;
  M.col(8) = q3;
  return M;
}

// The b9 = 0 condition as an affine function of a85: only row 8 of M
// depends on a85 (affinely), so b9(a85) * det M(a85) is affine in a85.
double b9_residual(const FamilyParams& p, const Vector9& c, double a85) {
  const Matrix9 A = family_rows(p, c, a85);
  const Matrix9 M = interpolant_matrix(A, c);
  Eigen::PartialPivLU<Matrix9> lu(M);
  const double det = lu.determinant();
  if (!std::isfinite(det) || det == 0.0) {
    throw singular_family_error("interpolant matrix singular while solving for a85");
  }
  const Vector9 y = lu.solve(Vector9::Unit(8));
  double b9 = 0.0;
  for (int k = 0; k < 5; ++k) b9 += y(k) / static_cast<double>(k + 1);
  return b9 * det;
}

Vector9 family_nodes(const FamilyParams& p) {
  Vector9 c;
  c << 0.0, p.c2, 2.0 * p.c4 / 3.0, p.c4, p.c5, p.c6, p.c7, p.c8, 1.0;
  return c;
}

}  // namespace

InterpolantBuild build_interpolant(const Eigen::MatrixXd& A, const Eigen::VectorXd& c) {
  if (A.rows() != 9 || A.cols() != 9 || c.size() != 9) {
    throw std::invalid_argument("interpolant construction requires a 9-stage tableau");
  }
  const Matrix9 M = interpolant_matrix(A, c);
  Eigen::FullPivLU<Matrix9> lu(M);
  if (!lu.isInvertible()) {
    throw singular_family_error("interpolant matrix is singular");
  }
  const Matrix9 Minv = lu.inverse();
  Eigen::MatrixXd B(5, 9);
  for (int k = 0; k < 5; ++k) B.row(k) = Minv.row(k) / static_cast<double>(k + 1);

  InterpolantBuild out;
  out.interpolant = Interpolant{B};
  out.b = B.colwise().sum().transpose();

  const Eigen::VectorXd d0 = out.interpolant.beta_derivative(0.0);
  const Eigen::VectorXd d1 = out.interpolant.beta_derivative(1.0);
  if ((d0 - Eigen::VectorXd::Unit(9, 0)).cwiseAbs().maxCoeff() > 1e-10 ||
      (d1 - Eigen::VectorXd::Unit(9, 8)).cwiseAbs().maxCoeff() > 1e-10) {
    throw internal_consistency_error("interpolant end-slope conditions violated");
  }
  return out;
}

ContinuousPair construct_family(const FamilyParams& params) {
  params.validate();
  const Vector9 c = family_nodes(params);

  // The residual is affine in a85; solve from two samples, polish, and
  // confirm affinity with a third sample.
  const double r0 = b9_residual(params, c, 0.0);
  const double r1 = b9_residual(params, c, 1.0);
  const double slope = r1 - r0;
  if (!std::isfinite(r0) || !std::isfinite(r1) || slope == 0.0) {
    throw degenerate_family_error("a85 equation has no unique solution");
  }
  const double rh = b9_residual(params, c, 0.5);
  const double scale = std::max({std::abs(r0), std::abs(r1), std::abs(rh)});
  if (std::abs(r0 - 2.0 * rh + r1) > 1e-9 * scale) {
    throw internal_consistency_error("a85 residual failed the affinity check");
  }
  double a85 = r0 / (r0 - r1);
  for (int it = 0; it < 2; ++it) {
    a85 -= b9_residual(params, c, a85) / slope;
  }

  Eigen::MatrixXd A = family_rows(params, c, a85);
  InterpolantBuild built = build_interpolant(A, c);
  if (std::abs(built.b(8)) > 1e-10) {
    throw degenerate_family_error("b9 does not vanish (ill-conditioned parameters)");
  }
  built.b(8) = 0.0;  // guaranteed by the a85 equation; drop the roundoff
  A.row(8) = built.b.transpose();

  ContinuousPair pair;
  pair.tableau = ButcherTableau{9, c, A, built.b, 9};
  pair.interpolant = built.interpolant;
  pair.order_low = 4;
  pair.order_high = 5;
  pair.tableau.validate(1e-12);

  // Verification gate: a "successful" construction is one whose endpoint
  // weights and interpolant meet the order-5 conditions.
  TreeFunctionals fn = tree_functionals(pair.tableau, 5);
  for (int p = 1; p <= 5; ++p) {
    for (const auto& e : fn.by_order[p - 1]) {
      const double r = (built.b.dot(e.phi) - 1.0 / static_cast<double>(e.density)) /
                       static_cast<double>(e.symmetry);
      if (std::abs(r) > 1e-9) {
        throw degenerate_family_error("order-5 endpoint conditions not met");
      }
    }
  }
  for (int g = 0; g <= 10; ++g) {
    const double theta = g / 10.0;
    const Eigen::VectorXd beta = built.interpolant.beta(theta);
    double theta_pow = 1.0;
    for (int p = 1; p <= 5; ++p) {
      theta_pow *= theta;
      for (const auto& e : fn.by_order[p - 1]) {
        const double r = (beta.dot(e.phi) - theta_pow / static_cast<double>(e.density)) /
                         static_cast<double>(e.symmetry);
        if (std::abs(r) > 1e-9) {
          throw degenerate_family_error("order-5 interpolant conditions not met");
        }
      }
    }
  }

  pair.d_basis = derive_error_weights(pair);
  return pair;
}

std::vector<Eigen::VectorXd> derive_error_weights(const ContinuousPair& pair) {
  const ButcherTableau& tb = pair.tableau;
  TreeFunctionals fn = tree_functionals(tb, 4);
  int n_rows = 0;
  for (const auto& group : fn.by_order) n_rows += static_cast<int>(group.size());
  Eigen::MatrixXd phi_rows(n_rows, tb.s);
  int r = 0;
  for (const auto& group : fn.by_order) {
    for (const auto& e : group) phi_rows.row(r++) = e.phi.transpose();
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(phi_rows);
  lu.setThreshold(1e-10);
  Eigen::MatrixXd kernel = lu.kernel();
  if (lu.dimensionOfKernel() == 0 || kernel.cols() == 0) {
    throw degenerate_family_error("no order-4 error estimator exists");
  }

  // Reduce to a staircase so vectors supported on fewer late stages come
  // first, orthonormalize in that order, rescale to unit max entry.
  std::vector<Eigen::VectorXd> basis;
  for (int k = 0; k < kernel.cols(); ++k) basis.push_back(kernel.col(k));
  auto top_index = [](const Eigen::VectorXd& v) {
    const double tol = 1e-11 * v.cwiseAbs().maxCoeff();
    for (int i = static_cast<int>(v.size()) - 1; i >= 0; --i) {
      if (std::abs(v(i)) > tol) return i;
    }
    return -1;
  };
  std::sort(basis.begin(), basis.end(), [&](const auto& a, const auto& b) {
    return top_index(a) > top_index(b);
  });
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const int t = top_index(basis[i]);
    if (t < 0) continue;
    for (std::size_t j = i + 1; j < basis.size(); ++j) {
      if (top_index(basis[j]) == t) basis[j] -= basis[j](t) / basis[i](t) * basis[i];
    }
    std::sort(basis.begin() + i + 1, basis.end(),
              [&](const auto& a, const auto& b) { return top_index(a) > top_index(b); });
  }
  std::reverse(basis.begin(), basis.end());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) basis[i] -= basis[i].dot(basis[j]) * basis[j];
    basis[i].normalize();
  }
  for (auto& v : basis) {
    int idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    v /= v(idx);  // max-magnitude entry becomes +1
    for (int i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) < 1e-12) v(i) = 0.0;
    }
  }

  // Each basis vector must break at least one order-5 condition.
  TreeFunctionals fn5 = tree_functionals(tb, 5);
  for (const auto& d : basis) {
    const Eigen::VectorXd x = tb.b + d;
    double worst = 0.0;
    for (const auto& e : fn5.by_order[4]) {
      const double t = (x.dot(e.phi) - 1.0 / static_cast<double>(e.density)) /
                       static_cast<double>(e.symmetry);
      worst = std::max(worst, std::abs(t));
    }
    if (worst < 1e-6) {
      throw internal_consistency_error("difference vector does not perturb order 5");
    }
  }
  return basis;
}

double OrderReport::max_abs() const {
  double m = 0.0;
  for (const auto& row : rows) m = std::max(m, row.max_abs_residual);
  return m;
}

OrderReport verify_order(const ButcherTableau& tableau, const Eigen::VectorXd& x,
                         int max_order) {
  const auto& groups = enumerate_trees(max_order);
  TreeFunctionals fn = tree_functionals(tableau, max_order);
  OrderReport report;
  for (int p = 1; p <= max_order; ++p) {
    double worst = -1.0;
    std::size_t worst_idx = 0;
    for (std::size_t k = 0; k < fn.by_order[p - 1].size(); ++k) {
      const auto& e = fn.by_order[p - 1][k];
      const double r = std::abs((x.dot(e.phi) - 1.0 / static_cast<double>(e.density)) /
                                static_cast<double>(e.symmetry));
      if (r > worst) {
        worst = r;
        worst_idx = k;
      }
    }
    report.rows.push_back({p, worst, groups[p - 1][worst_idx]});
  }
  return report;
}

namespace {

ContinuousPair make_table46() {
  using R = Rational;
  auto exact = std::make_shared<RationalTableau>();
  exact->c = {R(0), R(1, 14), R(1, 7), R(3, 14), R(1, 2), R(9, 14), R(6, 7), R(1), R(1)};
  std::vector<std::vector<R>> rows = {
      {},
      {R(1, 14)},
      {R(0), R(1, 7)},
      {R(3, 56), R(0), R(9, 56)},
      {R(29, 72), R(0), R(-35, 24), R(14, 9)},
      {R(-17, 56), R(0), R(93, 56), R(-8, 7), R(3, 7)},
      {R(199, 1372), R(0), R(-195, 196), R(1259, 784), R(-3855, 5488), R(45, 56)},
      {R(4903, 25596), R(0), R(4487, 2844), R(-255101, 102384), R(33847, 11376),
       R(-94325, 51192), R(3773, 6399)},
      {R(16, 243), R(0), R(0), R(16807, 53460), R(53, 300), R(2401, 12150),
       R(2401, 12150), R(79, 1650)},
  };
  exact->A.assign(9, std::vector<R>(9, R(0)));
  for (int i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) exact->A[i][j] = rows[i][j];
  }
  exact->b = {R(16, 243), R(0),           R(0),           R(16807, 53460), R(53, 300),
              R(2401, 12150), R(2401, 12150), R(79, 1650), R(0)};

  ContinuousPair pair;
  pair.tableau.s = 9;
  pair.tableau.c.resize(9);
  pair.tableau.A = Eigen::MatrixXd::Zero(9, 9);
  pair.tableau.b.resize(9);
  for (int i = 0; i < 9; ++i) {
    pair.tableau.c(i) = exact->c[i].to_double();
    pair.tableau.b(i) = exact->b[i].to_double();
    for (int j = 0; j < 9; ++j) pair.tableau.A(i, j) = exact->A[i][j].to_double();
  }
  pair.tableau.fsal_stage = 9;
  pair.order_low = 4;
  pair.order_high = 6;
  pair.interpolant = build_interpolant(pair.tableau.A, pair.tableau.c).interpolant;
  pair.exact = std::move(exact);
  pair.d_basis = derive_error_weights(pair);
  return pair;
}

ContinuousPair make_dormand_prince() {
  using R = Rational;
  auto exact = std::make_shared<RationalTableau>();
  exact->c = {R(0), R(1, 5), R(3, 10), R(4, 5), R(8, 9), R(1), R(1)};
  std::vector<std::vector<R>> rows = {
      {},
      {R(1, 5)},
      {R(3, 40), R(9, 40)},
      {R(44, 45), R(-56, 15), R(32, 9)},
      {R(19372, 6561), R(-25360, 2187), R(64448, 6561), R(-212, 729)},
      {R(9017, 3168), R(-355, 33), R(46732, 5247), R(49, 176), R(-5103, 18656)},
      {R(35, 384), R(0), R(500, 1113), R(125, 192), R(-2187, 6784), R(11, 84)},
  };
  exact->A.assign(7, std::vector<R>(7, R(0)));
  for (int i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) exact->A[i][j] = rows[i][j];
  }
  exact->b = {R(35, 384), R(0), R(500, 1113), R(125, 192), R(-2187, 6784), R(11, 84), R(0)};
  const std::vector<R> b4 = {R(5179, 57600),    R(0),          R(7571, 16695), R(393, 640),
                             R(-92097, 339200), R(187, 2100),  R(1, 40)};
  std::vector<R> d(7);
  for (int j = 0; j < 7; ++j) d[j] = b4[j] - exact->b[j];
  exact->d = {d};

  ContinuousPair pair;
  pair.tableau.s = 7;
  pair.tableau.c.resize(7);
  pair.tableau.A = Eigen::MatrixXd::Zero(7, 7);
  pair.tableau.b.resize(7);
  Eigen::VectorXd dv(7);
  for (int i = 0; i < 7; ++i) {
    pair.tableau.c(i) = exact->c[i].to_double();
    pair.tableau.b(i) = exact->b[i].to_double();
    dv(i) = d[i].to_double();
    for (int j = 0; j < 7; ++j) pair.tableau.A(i, j) = exact->A[i][j].to_double();
  }
  pair.tableau.fsal_stage = 7;
  pair.order_low = 4;
  pair.order_high = 5;
  pair.d_basis = {dv};
  pair.exact = std::move(exact);
  return pair;
}

}  // namespace

ContinuousPair builtin_pair(const std::string& name) {
  if (name == "table46") {
    static const ContinuousPair pair = make_table46();
    return pair;
  }
  if (name == "dormand_prince") {
    static const ContinuousPair pair = make_dormand_prince();
    return pair;
  }
  throw std::invalid_argument("unknown builtin pair: " + name);
}

std::vector<std::string> builtin_pair_names() { return {"table46", "dormand_prince"}; }

}  // namespace rkforge
