#include "rkforge/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "rkforge/errors.hpp"

namespace rkforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

TestProblem make_a3() {
  TestProblem p;
  p.name = "A3";
  p.system.dimension = 1;
  p.system.rhs = [](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx(0) = x(0) * std::cos(t);
  };
  p.t0 = 0.0;
  p.t_end = 20.0;
  p.x0 = Eigen::VectorXd::Ones(1);
  p.reference = [](double t) {
    Eigen::VectorXd x(1);
    x(0) = std::exp(std::sin(t));
    return x;
  };
  p.closed_form = true;
  return p;
}

TestProblem make_rotation() {
  TestProblem p;
  p.name = "rotation";
  p.system.dimension = 2;
  p.system.rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx(0) = -x(1);
    dx(1) = x(0);
  };
  p.t0 = 0.0;
  p.t_end = 20.0;
  p.x0 = Eigen::Vector2d(1.0, 0.0);
  p.reference = [](double t) {
    Eigen::VectorXd x(2);
    x(0) = std::cos(t);
    x(1) = std::sin(t);
    return x;
  };
  p.closed_form = true;
  return p;
}

constexpr double kD5Eccentricity = 0.9;

TestProblem make_d5() {
  TestProblem p;
  p.name = "D5";
  p.system.dimension = 4;
  p.system.rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double r2 = y(0) * y(0) + y(1) * y(1);
    const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
    dy(0) = y(2);
    dy(1) = y(3);
    dy(2) = -y(0) * inv_r3;
    dy(3) = -y(1) * inv_r3;
  };
  p.t0 = 0.0;
  p.t_end = 20.0;
  const double e = kD5Eccentricity;
  p.x0 = Eigen::VectorXd(4);
  p.x0 << 1.0 - e, 0.0, 0.0, std::sqrt((1.0 + e) / (1.0 - e));
  p.reference = [e](double t) {
    const double ecc = solve_kepler(t, e);
    const double se = std::sin(ecc), ce = std::cos(ecc);
    const double root = std::sqrt(1.0 - e * e);
    const double dedt = 1.0 / (1.0 - e * ce);
    Eigen::VectorXd y(4);
    y << ce - e, root * se, -se * dedt, root * ce * dedt;
    return y;
  };
  p.closed_form = true;
  return p;
}

OdeSystem van_der_pol() {
  OdeSystem sys;
  sys.dimension = 2;
  sys.rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx(0) = x(1);
    dx(1) = (1.0 - x(0) * x(0)) * x(1) - x(0);
  };
  return sys;
}

TestProblem make_e2() {
  TestProblem p;
  p.name = "E2";
  p.system = van_der_pol();
  p.t0 = 0.0;
  p.t_end = 20.0;
  p.x0 = Eigen::Vector2d(2.0, 0.0);
  // No closed form: the reference is a tight self-integration with the
  // builtin (4,6) pair, decorrelated from the pairs under test.
  SolveOptions opts;
  opts.atol = 1e-13;
  auto tight = std::make_shared<Solution>(
      solve(builtin_pair("table46"), p.system, p.t0, p.x0, p.t_end, opts));
  if (tight->status != Solution::Status::ok) {
    throw error("E2 reference integration failed");
  }
  p.reference = [tight](double t) { return tight->dense_eval(t); };
  p.closed_form = false;
  return p;
}

}  // namespace

double solve_kepler(double mean_anomaly, double eccentricity) {
  const double two_pi = 2.0 * kPi;
  double m = std::fmod(mean_anomaly, two_pi);
  if (m < 0) m += two_pi;
  const double offset = mean_anomaly - m;

  double lo = 0.0, hi = two_pi;
  double ecc = m + 0.85 * eccentricity * (std::sin(m) >= 0 ? 1.0 : -1.0);
  ecc = std::clamp(ecc, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = ecc - eccentricity * std::sin(ecc) - m;
    if (f > 0) {
      hi = ecc;
    } else {
      lo = ecc;
    }
    const double step = f / (1.0 - eccentricity * std::cos(ecc));
    double next = ecc - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // safeguard
    if (std::abs(next - ecc) < 1e-14) {
      ecc = next;
      break;
    }
    ecc = next;
  }
  return ecc + offset;
}

TestProblem problem(const std::string& name) {
  if (name == "A3") return make_a3();
  if (name == "D5") return make_d5();
  if (name == "E2") return make_e2();
  if (name == "rotation") return make_rotation();
  if (!name.empty() && (name[0] == 'U' || name[0] == 'u')) {
    throw std::invalid_argument("problem " + name +
                                " is unavailable: the U-problems are defined only in a figure");
  }
  throw std::invalid_argument("unknown problem: " + name);
}

std::vector<WorkPrecisionPoint> work_precision(const ContinuousPair& pair,
                                               const TestProblem& prob,
                                               std::span<const double> atols) {
  std::vector<WorkPrecisionPoint> points;
  points.reserve(atols.size());
  for (double atol : atols) {
    WorkPrecisionPoint wp{atol, 0, 0.0, 0, false};
    SolveOptions opts;
    opts.atol = atol;
    try {
      const Solution sol = solve(pair, prob.system, prob.t0, prob.x0, prob.t_end, opts);
      if (sol.status == Solution::Status::ok) {
        double err = 0.0;
        for (const StepRecord& rec : sol.steps) {
          err = std::max(err, (rec.x_end - prob.reference(rec.t + rec.h)).norm());
        }
        wp.rhs_evals = sol.rhs_evaluations;
        wp.rejections = sol.rejections;
        wp.max_error = err;
        wp.ok = true;
      }
    } catch (const error&) {
      // recorded as a missing point
    }
    points.push_back(wp);
  }
  return points;
}

std::vector<double> parse_atol_grid(const std::string& text) {
  // "1e-3:1e-9:0.5dec" — from, to, decades per step; or a comma list.
  if (text.find(':') == std::string::npos) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      out.push_back(std::stod(text.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    return out;
  }
  const std::size_t c1 = text.find(':');
  const std::size_t c2 = text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw std::invalid_argument("bad tolerance grid: " + text);
  std::string step_text = text.substr(c2 + 1);
  if (step_text.size() >= 3 && step_text.substr(step_text.size() - 3) == "dec") {
    step_text.resize(step_text.size() - 3);
  }
  const double from = std::stod(text.substr(0, c1));
  const double to = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
  const double step = std::stod(step_text);
  if (!(from > 0) || !(to > 0) || !(step > 0)) {
    throw std::invalid_argument("bad tolerance grid: " + text);
  }
  std::vector<double> out;
  const double lg_from = std::log10(from), lg_to = std::log10(to);
  const int n = static_cast<int>(std::round(std::abs(lg_to - lg_from) / step));
  const double sign = lg_to < lg_from ? -1.0 : 1.0;
  for (int i = 0; i <= n; ++i) out.push_back(std::pow(10.0, lg_from + sign * i * step));
  return out;
}

CircleTestResult circle_test(const ContinuousPair& pair, double h, int ticks) {
  TestProblem rot = make_rotation();
  const Eigen::VectorXd x0 = rot.x0;
  const StepResult res = step(pair, rot.system, 0.0, x0, h);

  CircleTestResult out;
  out.h = h;
  out.endpoint = res.x_next;
  out.endpoint_error = res.x_next - Eigen::Vector2d(std::cos(h), std::sin(h));
  const ButcherTableau& tb = pair.tableau;
  for (int i = 0; i < tb.s; ++i) {
    Eigen::VectorXd xi = x0;
    for (int j = 0; j < i; ++j) {
      if (tb.A(i, j) != 0.0) xi += h * tb.A(i, j) * res.stages.row(j).transpose();
    }
    out.stage_positions.emplace_back(xi(0), xi(1));
  }
  if (pair.interpolant) {
    for (int k = 1; k <= ticks; ++k) {
      const double theta = static_cast<double>(k) / (ticks + 1);
      const Eigen::VectorXd beta = pair.interpolant->beta(theta);
      const Eigen::VectorXd xi = x0 + h * (res.stages.transpose() * beta);
      out.thetas.push_back(theta);
      out.interpolant_error.emplace_back(xi(0) - std::cos(h * theta),
                                         xi(1) - std::sin(h * theta));
    }
  }
  return out;
}

}  // namespace rkforge
