#include "rkforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rkforge/errors.hpp"

namespace rkforge {

double endpoint_error(const ContinuousPair& pair, const Eigen::VectorXd& x, int p) {
  return local_error_norm(pair.tableau, x, 1.0, p);
}

namespace {

// T_p(beta(theta), theta) as a scan-friendly closure: per tree of order p
// the residual is a quintic in theta (coefficients B * phi) minus
// theta^p / gamma, scaled by 1/sigma.
struct ContinuousErrorScan {
  Eigen::MatrixXd g;  // n_trees x degree
  Eigen::VectorXd inv_density;
  Eigen::VectorXd inv_symmetry;
  int p;

  double operator()(double theta) const {
    const int degree = static_cast<int>(g.cols());
    Eigen::VectorXd pow(degree);
    double t = 1.0;
    for (int k = 0; k < degree; ++k) {
      t *= theta;
      pow(k) = t;
    }
    const double tp = std::pow(theta, p);
    double sum = 0.0;
    for (int r = 0; r < g.rows(); ++r) {
      const double v = (g.row(r).dot(pow) - tp * inv_density(r)) * inv_symmetry(r);
      sum += v * v;
    }
    return std::sqrt(sum);
  }
};

ContinuousErrorScan make_scan(const ContinuousPair& pair, int p) {
  if (!pair.interpolant) throw error("pair has no interpolant");
  TreeFunctionals fn = tree_functionals(pair.tableau, p);
  const auto& trees = fn.by_order[p - 1];
  ContinuousErrorScan scan;
  scan.p = p;
  const int n = static_cast<int>(trees.size());
  const int degree = pair.interpolant->degree();
  scan.g.resize(n, degree);
  scan.inv_density.resize(n);
  scan.inv_symmetry.resize(n);
  for (int r = 0; r < n; ++r) {
    scan.g.row(r) = (pair.interpolant->B * trees[r].phi).transpose();
    scan.inv_density(r) = 1.0 / static_cast<double>(trees[r].density);
    scan.inv_symmetry(r) = 1.0 / static_cast<double>(trees[r].symmetry);
  }
  return scan;
}

}  // namespace

ThetaMax continuous_error_max(const ContinuousPair& pair, int p) {
  const ContinuousErrorScan scan = make_scan(pair, p);
  constexpr int kGrid = 1001;
  double best_theta = 0.0, best = -1.0;
  int best_i = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double theta = static_cast<double>(i) / (kGrid - 1);
    const double v = scan(theta);
    if (v > best) {
      best = v;
      best_theta = theta;
      best_i = i;
    }
  }
  // Golden-section refinement on the bracketing grid cells.
  double lo = static_cast<double>(std::max(best_i - 1, 0)) / (kGrid - 1);
  double hi = static_cast<double>(std::min(best_i + 1, kGrid - 1)) / (kGrid - 1);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = scan(x1), f2 = scan(x2);
  while (hi - lo > 1e-8) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = scan(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = scan(x2);
    }
  }
  if (f1 > best) {
    best = f1;
    best_theta = x1;
  }
  if (f2 > best) {
    best = f2;
    best_theta = x2;
  }
  return {best_theta, best};
}

std::vector<double> polynomial_roots_unit_interval(std::vector<double> coeffs) {
  // Trim numerically null leading coefficients.
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-14 * scale) coeffs.pop_back();
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg <= 0) return {};

  auto eval = [&](double x) {
    double v = 0.0;
    for (int k = deg; k >= 0; --k) v = v * x + coeffs[k];
    return v;
  };

  if (deg == 1) {
    const double r = -coeffs[0] / coeffs[1];
    if (r > 0.0 && r < 1.0) return {r};
    return {};
  }

  std::vector<double> dcoeffs(deg);
  for (int k = 1; k <= deg; ++k) dcoeffs[k - 1] = k * coeffs[k];
  std::vector<double> breaks = polynomial_roots_unit_interval(std::move(dcoeffs));
  breaks.insert(breaks.begin(), 0.0);
  breaks.push_back(1.0);

  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i], b = breaks[i + 1];
    double fa = eval(a), fb = eval(b);
    const double tiny = 1e-14 * scale;
    if (std::abs(fa) < tiny) {
      if (a > 0.0 && (roots.empty() || roots.back() < a - 1e-13)) roots.push_back(a);
      continue;
    }
    if (std::abs(fb) < tiny || fa * fb > 0.0) continue;
    // Monotone between critical points; bisect.
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = eval(m);
      if (fm == 0.0) {
        a = b = m;
        break;
      }
      if (fa * fm < 0.0) {
        b = m;
      } else {
        a = m;
        fa = fm;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  return roots;
}

namespace {

double variation_sum(const Interpolant& interp, bool negative_only) {
  const int s = interp.stages();
  const int degree = interp.degree();
  double total = 0.0;
  for (int j = 0; j < s; ++j) {
    std::vector<double> dcoeffs(degree);
    for (int k = 0; k < degree; ++k) dcoeffs[k] = (k + 1) * interp.B(k, j);
    std::vector<double> pts = polynomial_roots_unit_interval(dcoeffs);
    pts.insert(pts.begin(), 0.0);
    pts.push_back(1.0);
    auto beta_j = [&](double th) {
      double v = 0.0;
      for (int k = degree - 1; k >= 0; --k) v = th * v + interp.B(k, j);
      return th * v;
    };
    for (std::size_t m = 0; m + 1 < pts.size(); ++m) {
      const double delta = beta_j(pts[m + 1]) - beta_j(pts[m]);
      if (negative_only) {
        if (delta < 0.0) total -= delta;
      } else {
        total += std::abs(delta);
      }
    }
  }
  return total;
}

}  // namespace

double total_variation(const Interpolant& interpolant) {
  return variation_sum(interpolant, false);
}

double negativity(const Interpolant& interpolant) {
  return variation_sum(interpolant, true);
}

double stage_error(const ButcherTableau& tableau, int i, int p) {
  if (i < 1 || i > tableau.s) throw std::invalid_argument("stage index out of range");
  return local_error_norm(tableau, tableau.A.row(i - 1).transpose(), tableau.c(i - 1), p);
}

int StabilityPolynomial::degree() const {
  for (int k = static_cast<int>(coefficients.size()) - 1; k >= 0; --k) {
    if (coefficients(k) != 0.0) return k;
  }
  return 0;
}

std::complex<double> StabilityPolynomial::evaluate(std::complex<double> z) const {
  std::complex<double> acc = 0.0;
  for (int k = static_cast<int>(coefficients.size()) - 1; k >= 0; --k) {
    acc = acc * z + coefficients(k);
  }
  return acc;
}

StabilityPolynomial stability_polynomial(const ButcherTableau& tableau,
                                         const Eigen::VectorXd& x) {
  if (x.size() != tableau.s) throw std::invalid_argument("weight vector length != stage count");
  StabilityPolynomial poly;
  poly.coefficients.resize(tableau.s + 1);
  poly.coefficients(0) = 1.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(tableau.s);
  for (int k = 1; k <= tableau.s; ++k) {
    poly.coefficients(k) = x.dot(v);
    v = tableau.A * v;
  }
  return poly;
}

namespace {

struct Segment {
  long a, b;  // edge keys
};

// Crossing point on the edge between two grid nodes, linear in |R|-1.
std::complex<double> edge_point(std::complex<double> za, std::complex<double> zb,
                                double fa, double fb) {
  const double t = fa / (fa - fb);
  return za + t * (zb - za);
}

}  // namespace

std::vector<std::vector<std::complex<double>>> stability_region(
    const StabilityPolynomial& poly, double scale, const RegionGrid& grid) {
  if (!(grid.re1 > grid.re0) || !(grid.im1 > grid.im0) || grid.nx < 2 || grid.ny < 2) {
    throw std::invalid_argument("empty stability window");
  }
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  const int nx = grid.nx, ny = grid.ny;
  const double dx = (grid.re1 - grid.re0) / (nx - 1);
  const double dy = (grid.im1 - grid.im0) / (ny - 1);

  std::vector<double> f(static_cast<std::size_t>(nx) * ny);
  auto node = [&](int i, int j) {
    return std::complex<double>(grid.re0 + i * dx, grid.im0 + j * dy);
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      f[static_cast<std::size_t>(j) * nx + i] = std::abs(poly.evaluate(scale * node(i, j))) - 1.0;
    }
  }
  auto fv = [&](int i, int j) { return f[static_cast<std::size_t>(j) * nx + i]; };

  // Edge keys: horizontal edge (i,j)-(i+1,j) -> 2*(j*nx+i); vertical edge
  // (i,j)-(i,j+1) -> 2*(j*nx+i)+1.
  std::map<long, std::complex<double>> points;
  std::vector<Segment> segments;
  auto edge_key_h = [&](int i, int j) { return 2L * (static_cast<long>(j) * nx + i); };
  auto edge_key_v = [&](int i, int j) { return 2L * (static_cast<long>(j) * nx + i) + 1L; };

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double f00 = fv(i, j), f10 = fv(i + 1, j), f01 = fv(i, j + 1), f11 = fv(i + 1, j + 1);
      int mask = 0;
      if (f00 < 0) mask |= 1;
      if (f10 < 0) mask |= 2;
      if (f11 < 0) mask |= 4;
      if (f01 < 0) mask |= 8;
      if (mask == 0 || mask == 15) continue;

      long bottom = edge_key_h(i, j), top = edge_key_h(i, j + 1);
      long left = edge_key_v(i, j), right = edge_key_v(i + 1, j);
      auto put = [&](long key, std::complex<double> za, std::complex<double> zb, double fa,
                     double fb) {
        if (!points.count(key)) points[key] = edge_point(za, zb, fa, fb);
        return key;
      };
      auto pb = [&] { return put(bottom, node(i, j), node(i + 1, j), f00, f10); };
      auto pt = [&] { return put(top, node(i, j + 1), node(i + 1, j + 1), f01, f11); };
      auto pl = [&] { return put(left, node(i, j), node(i, j + 1), f00, f01); };
      auto pr = [&] { return put(right, node(i + 1, j), node(i + 1, j + 1), f10, f11); };

      switch (mask) {
        case 1: case 14: segments.push_back({pl(), pb()}); break;
        case 2: case 13: segments.push_back({pb(), pr()}); break;
        case 3: case 12: segments.push_back({pl(), pr()}); break;
        case 4: case 11: segments.push_back({pr(), pt()}); break;
        case 6: case 9:  segments.push_back({pb(), pt()}); break;
        case 7: case 8:  segments.push_back({pl(), pt()}); break;
        case 5: case 10: {
          // Saddle: disambiguate with the cell-center value.
          const double fc = 0.25 * (f00 + f10 + f01 + f11);
          const bool center_inside = fc < 0;
          if ((mask == 5) == center_inside) {
            segments.push_back({pl(), pb()});
            segments.push_back({pr(), pt()});
          } else {
            segments.push_back({pl(), pt()});
            segments.push_back({pb(), pr()});
          }
          break;
        }
        default: break;
      }
    }
  }

  // Chain segments into polylines.
  std::multimap<long, std::size_t> by_end;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    by_end.emplace(segments[k].a, k);
    by_end.emplace(segments[k].b, k);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<std::complex<double>>> polylines;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    used[k] = true;
    std::vector<long> chain = {segments[k].a, segments[k].b};
    // Extend forward then backward.
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        const long tip = dir == 0 ? chain.back() : chain.front();
        auto range = by_end.equal_range(tip);
        std::size_t next = segments.size();
        for (auto it = range.first; it != range.second; ++it) {
          if (!used[it->second]) {
            next = it->second;
            break;
          }
        }
        if (next == segments.size()) break;
        used[next] = true;
        const long other = segments[next].a == tip ? segments[next].b : segments[next].a;
        if (dir == 0) {
          chain.push_back(other);
        } else {
          chain.insert(chain.begin(), other);
        }
      }
    }
    std::vector<std::complex<double>> poly;
    poly.reserve(chain.size());
    for (long key : chain) poly.push_back(points.at(key));
    polylines.push_back(std::move(poly));
  }
  std::sort(polylines.begin(), polylines.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return polylines;
}

}  // namespace rkforge
