#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rkforge/rational.hpp"
#include "rkforge/tableau.hpp"

namespace rkforge {

/// The two objective functions used to pick the free parameters.
/// A: max_theta T6(theta) + w_variation * V + w_coeff * sum(4 a^2 + a^4).
/// B: T6 + penalty * max(0, T7 - constraint_ratio * T6)^2.
struct ObjectiveSpec {
  enum class Kind { A, B };
  Kind kind = Kind::A;
  double w_variation = 1e-4;
  double w_coeff = 1e-7;
  double constraint_ratio = 10.0;
  double penalty = 1e6;

  static ObjectiveSpec a() { return {Kind::A, 1e-4, 1e-7, 10.0, 1e6}; }
  static ObjectiveSpec b() { return {Kind::B, 1e-4, 1e-7, 10.0, 1e6}; }
};

/// The Table-"table_methods" columns for one pair.
struct MetricReport {
  double t5_end, t6_end, t7_end;
  double max_t6_theta, theta_star;
  double variation;
  double max_abs_a;
};

MetricReport pair_metrics(const ContinuousPair& pair);

/// Objective values; construction failures map to the +infinity sentinel.
double objective_a(const FamilyParams& params);
double objective_b(const FamilyParams& params);
double objective_value(const ObjectiveSpec& spec, const FamilyParams& params);

struct TracePoint {
  long evaluation;
  double objective;
  bool feasible;
};

struct SearchResult {
  bool found = false;
  FamilyParams params{};
  ContinuousPair pair;
  MetricReport report{};
  double objective = 0.0;
  long evaluations = 0;
  std::vector<TracePoint> trace;  // filled when requested
};

/// Multi-start Nelder-Mead descent from Latin-hypercube starts in the box
/// c2 in [0.02, 0.2], c4..c8 in [0.1, 1] sorted ascending, a-params in
/// [-3, 3]. `budget` counts objective evaluations per start. Deterministic
/// for a fixed (starts, budget, seed). `extra_starts` are prepended to the
/// sampled starts. Returns the best feasible point; found = false when no
/// feasible point was seen.
SearchResult search(const ObjectiveSpec& spec, int starts, long budget,
                    std::uint64_t seed, const std::vector<FamilyParams>& extra_starts = {},
                    bool keep_trace = false);

struct RationalizeResult {
  FamilyParams params;
  std::array<Rational, 11> rationals;
  double objective_before;
  double objective_after;
};

/// Replaces every parameter by its best rational approximation with
/// denominator <= max_denominator, re-verifies the construction and
/// reports the objective drift. Throws if the rounded parameters are
/// degenerate.
RationalizeResult rationalize(const FamilyParams& params, const ObjectiveSpec& spec,
                              std::int64_t max_denominator);

}  // namespace rkforge
