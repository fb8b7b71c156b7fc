#include "rkforge/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include "rkforge/errors.hpp"
#include "rkforge/metrics.hpp"

namespace rkforge {

namespace {

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

struct Evaluation {
  double objective = kInfeasible;
  bool feasible = false;
};

Evaluation evaluate(const ObjectiveSpec& spec, const FamilyParams& params) {
  Evaluation out;
  ContinuousPair pair;
  try {
    pair = construct_family(params);
  } catch (const error&) {
    return out;
  }
  if (spec.kind == ObjectiveSpec::Kind::A) {
    const double mt6 = continuous_error_max(pair, 6).value;
    const double v = total_variation(*pair.interpolant);
    const auto& A = pair.tableau.A;
    const double pen = (4.0 * A.array().square() + A.array().pow(4)).sum();
    out.objective = mt6 + spec.w_variation * v + spec.w_coeff * pen;
    out.feasible = true;
  } else {
    const double t6 = endpoint_error(pair, pair.tableau.b, 6);
    const double t7 = endpoint_error(pair, pair.tableau.b, 7);
    const double excess = t7 - spec.constraint_ratio * t6;
    out.objective = t6 + spec.penalty * std::max(0.0, excess) * std::max(0.0, excess);
    out.feasible = excess <= 1e-12;
  }
  return out;
}

using Point = std::array<double, 11>;

bool lex_less(const Point& a, const Point& b) {
  for (int i = 0; i < 11; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

struct Incumbent {
  bool found = false;
  Point x{};
  double objective = kInfeasible;

  void offer(const Point& p, double f, bool feasible) {
    if (!feasible) return;
    if (!found || f < objective || (f == objective && lex_less(p, x))) {
      found = true;
      x = p;
      objective = f;
    }
  }
};

// Deterministic Nelder-Mead with the adaptive coefficients for dimension n
// and shrink-restart rounds around the incumbent best.
class NelderMead {
 public:
  NelderMead(const ObjectiveSpec& spec, Incumbent& incumbent, std::vector<TracePoint>* trace)
      : spec_(spec), incumbent_(incumbent), trace_(trace) {}

  long evaluations = 0;

  double eval(const Point& p) {
    const Evaluation e = evaluate(spec_, FamilyParams::from_array(p));
    ++evaluations;
    incumbent_.offer(p, e.objective, e.feasible);
    if (trace_ != nullptr) trace_->push_back({evaluations, e.objective, e.feasible});
    return e.objective;
  }

  void run(const Point& start, long budget) {
    constexpr int n = 11;
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / n;       // expansion
    const double gamma = 0.75 - 0.5 / n;     // contraction
    const double delta = 1.0 - 1.0 / n;      // shrink

    Point center = start;
    double scale = 0.08;
    for (int round = 0; round < 3 && evaluations < budget; ++round) {
      std::vector<Point> xs(n + 1, center);
      std::vector<double> fs(n + 1);
      for (int d = 0; d < n; ++d) xs[d + 1][d] += scale * span(d);
      for (int i = 0; i <= n && evaluations < budget; ++i) fs[i] = eval(xs[i]);

      while (evaluations < budget) {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
          if (fs[a] != fs[b]) return fs[a] < fs[b];
          return lex_less(xs[a], xs[b]);
        });
        reorder(xs, idx);
        reorder(fs, idx);
        if (simplex_small(xs) || !std::isfinite(fs[0])) break;

        Point centroid{};
        for (int i = 0; i < n; ++i) {
          for (int d = 0; d < n; ++d) centroid[d] += xs[i][d] / n;
        }
        Point refl = affine(centroid, xs[n], -alpha);
        const double f_refl = eval(refl);
        if (f_refl < fs[0]) {
          Point expd = affine(centroid, xs[n], -alpha * beta);
          const double f_exp = eval(expd);
          if (f_exp < f_refl) {
            xs[n] = expd;
            fs[n] = f_exp;
          } else {
            xs[n] = refl;
            fs[n] = f_refl;
          }
        } else if (f_refl < fs[n - 1]) {
          xs[n] = refl;
          fs[n] = f_refl;
        } else {
          const bool outside = f_refl < fs[n];
          Point contr = outside ? affine(centroid, xs[n], -alpha * gamma)
                                : affine(centroid, xs[n], gamma);
          const double f_con = eval(contr);
          if (f_con < std::min(f_refl, fs[n])) {
            xs[n] = contr;
            fs[n] = f_con;
          } else {
            for (int i = 1; i <= n && evaluations < budget; ++i) {
              for (int d = 0; d < n; ++d) xs[i][d] = xs[0][d] + delta * (xs[i][d] - xs[0][d]);
              fs[i] = eval(xs[i]);
            }
          }
        }
      }
      if (incumbent_.found) center = incumbent_.x;
      scale *= 0.3;
    }
  }

 private:
  static double span(int dim) { return dim >= 6 ? 1.0 : (dim == 0 ? 0.05 : 0.25); }

  static Point affine(const Point& centroid, const Point& far, double coeff) {
    // centroid + coeff * (far - centroid); coeff < 0 reflects.
    Point out;
    for (int d = 0; d < 11; ++d) out[d] = centroid[d] + coeff * (far[d] - centroid[d]);
    return out;
  }

  template <typename T>
  static void reorder(std::vector<T>& v, const std::vector<int>& idx) {
    std::vector<T> tmp(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) tmp[i] = v[idx[i]];
    v = std::move(tmp);
  }

  static bool simplex_small(const std::vector<Point>& xs) {
    double spread = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      for (int d = 0; d < 11; ++d) spread = std::max(spread, std::abs(xs[i][d] - xs[0][d]));
    }
    return spread < 1e-11;
  }

  const ObjectiveSpec& spec_;
  Incumbent& incumbent_;
  std::vector<TracePoint>* trace_;
};

std::vector<Point> latin_hypercube_starts(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 11;
  std::vector<std::vector<double>> strata(n, std::vector<double>(count));
  for (int d = 0; d < n; ++d) {
    std::vector<int> perm(count);
    for (int i = 0; i < count; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < count; ++i) strata[d][i] = (perm[i] + unif(rng)) / count;
  }
  std::vector<Point> starts(count);
  for (int i = 0; i < count; ++i) {
    Point p;
    p[0] = 0.02 + strata[0][i] * 0.18;
    std::array<double, 5> nodes;
    for (int d = 0; d < 5; ++d) nodes[d] = 0.1 + strata[1 + d][i] * 0.9;
    std::sort(nodes.begin(), nodes.end());
    for (int d = 0; d < 5; ++d) p[1 + d] = nodes[d];
    for (int d = 0; d < 5; ++d) p[6 + d] = -3.0 + strata[6 + d][i] * 6.0;
    starts[i] = p;
  }
  return starts;
}

int worker_count(int starts) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("RKFORGE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(starts)));
}

}  // namespace

MetricReport pair_metrics(const ContinuousPair& pair) {
  MetricReport r{};
  r.t5_end = endpoint_error(pair, pair.tableau.b, 5);
  r.t6_end = endpoint_error(pair, pair.tableau.b, 6);
  r.t7_end = endpoint_error(pair, pair.tableau.b, 7);
  if (pair.interpolant) {
    const ThetaMax tm = continuous_error_max(pair, 6);
    r.max_t6_theta = tm.value;
    r.theta_star = tm.theta;
    r.variation = total_variation(*pair.interpolant);
  } else {
    r.max_t6_theta = std::numeric_limits<double>::quiet_NaN();
    r.theta_star = std::numeric_limits<double>::quiet_NaN();
    r.variation = std::numeric_limits<double>::quiet_NaN();
  }
  r.max_abs_a = pair.tableau.A.cwiseAbs().maxCoeff();
  return r;
}

double objective_a(const FamilyParams& params) {
  return evaluate(ObjectiveSpec::a(), params).objective;
}

double objective_b(const FamilyParams& params) {
  return evaluate(ObjectiveSpec::b(), params).objective;
}

double objective_value(const ObjectiveSpec& spec, const FamilyParams& params) {
  return evaluate(spec, params).objective;
}

SearchResult search(const ObjectiveSpec& spec, int starts, long budget, std::uint64_t seed,
                    const std::vector<FamilyParams>& extra_starts, bool keep_trace) {
  if (starts < 0 || budget < 1) throw std::invalid_argument("search needs budget >= 1");
  std::vector<Point> points;
  for (const FamilyParams& p : extra_starts) points.push_back(p.to_array());
  for (Point& p : latin_hypercube_starts(starts, seed)) points.push_back(p);
  if (points.empty()) throw std::invalid_argument("search needs at least one start");

  const int total = static_cast<int>(points.size());
  std::vector<Incumbent> incumbents(total);
  std::vector<long> eval_counts(total, 0);
  std::vector<std::vector<TracePoint>> traces(total);

  std::atomic<int> next{0};
  auto work = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= total) return;
      NelderMead nm(spec, incumbents[i], keep_trace ? &traces[i] : nullptr);
      nm.run(points[i], budget);
      eval_counts[i] = nm.evaluations;
    }
  };
  const int workers = worker_count(total);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // Associative reduction: min objective, ties by lexicographic params.
  SearchResult result;
  Incumbent best;
  for (const Incumbent& inc : incumbents) {
    if (inc.found) best.offer(inc.x, inc.objective, true);
  }
  for (int i = 0; i < total; ++i) {
    result.evaluations += eval_counts[i];
    if (keep_trace) {
      for (TracePoint tp : traces[i]) {
        tp.evaluation = result.trace.empty() ? 1 : result.trace.back().evaluation + 1;
        result.trace.push_back(tp);
      }
    }
  }
  if (!best.found) return result;  // found = false: explicit no-result status

  result.found = true;
  result.params = FamilyParams::from_array(best.x);
  result.objective = best.objective;
  result.pair = construct_family(result.params);
  result.report = pair_metrics(result.pair);
  return result;
}

RationalizeResult rationalize(const FamilyParams& params, const ObjectiveSpec& spec,
                              std::int64_t max_denominator) {
  RationalizeResult out{};
  const std::array<double, 11> in = params.to_array();
  std::array<double, 11> rounded{};
  for (int i = 0; i < 11; ++i) {
    out.rationals[i] = Rational::best_approximation(in[i], max_denominator);
    rounded[i] = out.rationals[i].to_double();
  }
  out.params = FamilyParams::from_array(rounded);
  out.objective_before = objective_value(spec, params);
  out.objective_after = objective_value(spec, out.params);
  construct_family(out.params);  // throws when degenerate after rounding
  return out;
}

}  // namespace rkforge
