#include "rkforge/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rkforge/errors.hpp"

namespace rkforge {

namespace {

long stage_count_for_support(const Eigen::VectorXd& d) {
  for (int i = static_cast<int>(d.size()) - 1; i >= 0; --i) {
    if (d(i) != 0.0) return i + 1;
  }
  return 0;
}

}  // namespace

StepResult step(const ContinuousPair& pair, const OdeSystem& system, double t,
                const Eigen::VectorXd& x, double h, const Eigen::VectorXd* f1) {
  const ButcherTableau& tb = pair.tableau;
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (x.size() != system.dimension) throw std::invalid_argument("state dimension mismatch");

  const int s = tb.s;
  const int n = system.dimension;
  StepResult out;
  out.stages.resize(s, n);
  Eigen::VectorXd xi(n), fi(n);
  for (int i = 0; i < s; ++i) {
    if (i == 0 && f1 != nullptr) {
      out.stages.row(0) = f1->transpose();
      continue;
    }
    xi = x;
    for (int j = 0; j < i; ++j) {
      if (tb.A(i, j) != 0.0) xi += h * tb.A(i, j) * out.stages.row(j).transpose();
    }
    system.rhs(t + tb.c(i) * h, xi, fi);
    if (!fi.allFinite()) {
      throw error("right-hand side returned a non-finite value at t = " +
                  std::to_string(t + tb.c(i) * h));
    }
    out.stages.row(i) = fi.transpose();
  }
  out.x_next = x + h * (out.stages.transpose() * tb.b);
  out.error_estimates.reserve(pair.d_basis.size());
  for (const Eigen::VectorXd& d : pair.d_basis) {
    out.error_estimates.push_back(h * (out.stages.transpose() * d).norm());
  }
  return out;
}

namespace {

Solution run_solve(const ContinuousPair& pair, const OdeSystem& system, double t0,
                   const Eigen::VectorXd& x0, double t_end, const SolveOptions& opts,
                   bool adaptive, double fixed_h) {
  if (!(t_end > t0)) throw std::invalid_argument("t_end must exceed t0");
  if (x0.size() != system.dimension) throw std::invalid_argument("state dimension mismatch");
  if (adaptive && pair.d_basis.empty()) {
    throw error("pair has no difference vectors for error control");
  }
  const ButcherTableau& tb = pair.tableau;
  const int s = tb.s;

  // Difference vectors sorted fewer-stages-first.
  std::vector<Eigen::VectorXd> dsorted = pair.d_basis;
  std::stable_sort(dsorted.begin(), dsorted.end(),
                   [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                     return stage_count_for_support(a) < stage_count_for_support(b);
                   });

  const double window = t_end - t0;
  const double h_min = opts.h_min > 0 ? opts.h_min : 1e-12 * window;
  const double h_max = opts.h_max > 0 ? opts.h_max : window;

  Solution sol;
  sol.pair = pair;
  sol.t0 = t0;
  sol.t_final = t0;

  double t = t0;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd f1(system.dimension);
  system.rhs(t0, x, f1);
  sol.rhs_evaluations = 1;
  bool have_f1 = true;

  double h = adaptive ? std::min(opts.h0, h_max) : fixed_h;
  long attempts = 0;

  while (t < t_end) {
    if (attempts >= opts.max_steps) {
      sol.status = Solution::Status::step_limit_exceeded;
      return sol;
    }
    if (adaptive && h < h_min) {
      sol.status = Solution::Status::min_step_reached;
      return sol;
    }
    const double h_step = std::min(h, t_end - t);  // clip to land on t_end
    ++attempts;

    StepResult res = step(pair, system, t, x, h_step, have_f1 ? &f1 : nullptr);
    const long evals = have_f1 ? s - 1 : s;
    sol.rhs_evaluations += evals;

    bool accept = true;
    std::vector<double> tried;
    if (adaptive) {
      tried.reserve(dsorted.size());
      for (const Eigen::VectorXd& d : dsorted) {
        const double e = h_step * (res.stages.transpose() * d).norm();
        tried.push_back(e);
        if (e > opts.atol) {
          accept = false;
          break;
        }
      }
    }

    if (accept) {
      StepRecord rec;
      rec.t = t;
      rec.h = h_step;
      rec.x_begin = x;
      rec.x_end = res.x_next;
      rec.stages = std::move(res.stages);
      rec.error_estimates = tried;
      sol.steps.push_back(std::move(rec));
      x = res.x_next;
      t = (t_end - t <= h) ? t_end : t + h_step;
      sol.t_final = t;
      if (tb.fsal_stage > 0) {
        f1 = sol.steps.back().stages.row(tb.fsal_stage - 1).transpose();
        have_f1 = true;
      } else {
        if (t < t_end) {
          system.rhs(t, x, f1);
          ++sol.rhs_evaluations;
        }
        have_f1 = true;
      }
    } else {
      ++sol.rejections;
      sol.rhs_evaluations_rejected += evals;
      // f1 = f(t, x) is still valid for the retry.
    }

    if (adaptive) {
      const double e_max = tried.empty() ? 0.0 : *std::max_element(tried.begin(), tried.end());
      double factor;
      if (e_max < 1e-300) {
        factor = 10.0;  // E = 0: cap the growth ratio
      } else {
        factor = opts.safety * std::pow(opts.atol / e_max, opts.exponent);
      }
      h = std::min(h_step * factor, h_max);
    }
  }
  sol.status = Solution::Status::ok;
  return sol;
}

}  // namespace

Solution solve(const ContinuousPair& pair, const OdeSystem& system, double t0,
               const Eigen::VectorXd& x0, double t_end, const SolveOptions& opts) {
  return run_solve(pair, system, t0, x0, t_end, opts, true, 0.0);
}

Solution solve_fixed(const ContinuousPair& pair, const OdeSystem& system, double t0,
                     const Eigen::VectorXd& x0, double t_end, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  SolveOptions opts;
  opts.max_steps = static_cast<long>((t_end - t0) / h) + 16;
  return run_solve(pair, system, t0, x0, t_end, opts, false, h);
}

Eigen::VectorXd Solution::dense_eval(double t) const {
  if (steps.empty()) throw error("solution holds no accepted steps");
  if (!pair.interpolant) throw error("pair has no interpolant for dense output");
  if (t < t0 - 1e-14 || t > t_final + 1e-14) {
    throw std::invalid_argument("dense evaluation outside the solved window");
  }
  // Last step whose start lies strictly before t; boundary ties fall to the
  // earlier step.
  std::size_t lo = 0, hi = steps.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (steps[mid].t < t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const StepRecord& rec = steps[lo];
  const double theta = std::clamp((t - rec.t) / rec.h, 0.0, 1.0);
  const Eigen::VectorXd beta = pair.interpolant->beta(theta);
  return rec.x_begin + rec.h * (rec.stages.transpose() * beta);
}

}  // namespace rkforge
