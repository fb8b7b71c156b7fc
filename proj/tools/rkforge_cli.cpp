// rkforge: derive, verify, optimize and run continuous Runge-Kutta pairs.
//
// Exit codes: 0 success, 1 computation failure, 2 usage error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rkforge/errors.hpp"
#include "rkforge/integrate.hpp"
#include "rkforge/metrics.hpp"
#include "rkforge/optimize.hpp"
#include "rkforge/problems.hpp"
#include "rkforge/tableau.hpp"
#include "rkforge/tableau_io.hpp"

namespace {

using namespace rkforge;

// "builtin:<name>" resolves to a builtin pair, anything else is a file path.
ContinuousPair load_pair(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) return builtin_pair(spec.substr(8));
  return read_tableau_file(spec);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw error("cannot open for writing: " + path);
  return os;
}

std::vector<double> parse_params_arg(const std::string& arg) {
  std::string text = arg;
  if (!text.empty() && text[0] == '@') {
    std::ifstream is(text.substr(1));
    if (!is) throw error("cannot open parameter file: " + text.substr(1));
    std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    text = all;
  }
  for (char& ch : text) {
    if (ch == ',' || ch == '\n' || ch == '\t') ch = ' ';
  }
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    std::size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    const std::string tok = text.substr(pos, end - pos);
    values.push_back(tok.find('/') != std::string::npos ? Rational::parse(tok).to_double()
                                                        : std::stod(tok));
    pos = end;
  }
  return values;
}

void print_order_report(const OrderReport& report) {
  std::printf("order   worst |tau|\n");
  for (const auto& row : report.rows) {
    std::printf("%5d   %.3e\n", row.order, row.max_abs_residual);
  }
}

void print_metrics(const MetricReport& r) {
  std::printf("T5        = %.5g\n", r.t5_end);
  std::printf("T6        = %.5g\n", r.t6_end);
  std::printf("T7        = %.5g\n", r.t7_end);
  if (std::isnan(r.max_t6_theta)) {
    std::printf("max T6(theta) = n/a (no interpolant)\n");
    std::printf("V         = n/a (no interpolant)\n");
  } else {
    std::printf("max T6(theta) = %.5g at theta = %.4f\n", r.max_t6_theta, r.theta_star);
    std::printf("V         = %.5g\n", r.variation);
  }
  std::printf("max|a_ij| = %.5g\n", r.max_abs_a);
}

int run_derive(const std::string& params_arg, const std::string& out) {
  const std::vector<double> v = parse_params_arg(params_arg);
  if (v.size() != 11) throw error("derive expects 11 parameters, got " + std::to_string(v.size()));
  std::array<double, 11> arr;
  std::copy(v.begin(), v.end(), arr.begin());
  const ContinuousPair pair = construct_family(FamilyParams::from_array(arr));
  write_tableau_file(out, pair);
  std::printf("wrote %s (s = %d, u = %d, %zu difference vectors)\n", out.c_str(),
              pair.tableau.s, pair.tableau.fsal_stage, pair.d_basis.size());
  print_order_report(verify_order(pair.tableau, pair.tableau.b, 5));
  print_metrics(pair_metrics(pair));
  return 0;
}

int run_verify(const std::string& pair_spec, int order) {
  const ContinuousPair pair = load_pair(pair_spec);
  const OrderReport report = verify_order(pair.tableau, pair.tableau.b, order);
  print_order_report(report);
  if (pair.interpolant) {
    double worst = 0.0;
    const int interp_order = std::min(order, 5);
    const TreeFunctionals fn = tree_functionals(pair.tableau, interp_order);
    for (int g = 0; g <= 10; ++g) {
      const double theta = g / 10.0;
      const Eigen::VectorXd beta = pair.interpolant->beta(theta);
      double theta_pow = 1.0;
      for (int p = 1; p <= interp_order; ++p) {
        theta_pow *= theta;
        for (const auto& e : fn.by_order[p - 1]) {
          const double r = (beta.dot(e.phi) - theta_pow / static_cast<double>(e.density)) /
                           static_cast<double>(e.symmetry);
          worst = std::max(worst, std::abs(r));
        }
      }
    }
    std::printf("interpolant: worst residual through order %d on 11-point grid = %.3e\n",
                interp_order, worst);
    if (worst > 1e-9) return 1;
  }
  return report.max_abs() > 1e-9 ? 1 : 0;
}

int run_metrics(const std::string& pair_spec) {
  print_metrics(pair_metrics(load_pair(pair_spec)));
  return 0;
}

int run_interp(const std::string& pair_spec, const std::string& out, int samples) {
  const ContinuousPair pair = load_pair(pair_spec);
  if (!pair.interpolant) throw error("pair has no interpolant");
  auto os = open_output(out);
  os << "theta";
  for (int j = 1; j <= pair.tableau.s; ++j) os << ",beta" << j;
  os << "\n";
  for (int i = 0; i < samples; ++i) {
    const double theta = static_cast<double>(i) / (samples - 1);
    const Eigen::VectorXd beta = pair.interpolant->beta(theta);
    os << format_number(theta);
    for (int j = 0; j < pair.tableau.s; ++j) os << "," << format_number(beta(j));
    os << "\n";
  }
  return 0;
}

int run_optimize(const std::string& objective, int starts, long budget, std::uint64_t seed,
                 const std::string& out, const std::string& trace_path,
                 std::int64_t rationalize_den) {
  ObjectiveSpec spec = objective == "b" ? ObjectiveSpec::b() : ObjectiveSpec::a();
  const bool keep_trace = !trace_path.empty();
  SearchResult res = search(spec, starts, budget, seed, {}, keep_trace);
  if (!res.found) {
    std::fprintf(stderr, "no feasible point found within the budget\n");
    return 1;
  }
  if (keep_trace) {
    auto ts = open_output(trace_path);
    ts << "evaluation,objective,feasible\n";
    for (const TracePoint& tp : res.trace) {
      ts << tp.evaluation << "," << format_number(tp.objective) << ","
         << (tp.feasible ? 1 : 0) << "\n";
    }
  }
  if (rationalize_den > 0) {
    const RationalizeResult rr = rationalize(res.params, spec, rationalize_den);
    std::printf("rationalized parameters (max denominator %lld):\n",
                static_cast<long long>(rationalize_den));
    for (const Rational& r : rr.rationals) std::printf("  %s\n", r.to_string().c_str());
    std::printf("objective drift: %.6g -> %.6g\n", rr.objective_before, rr.objective_after);
    res.params = rr.params;
    res.pair = construct_family(rr.params);
    res.report = pair_metrics(res.pair);
    res.objective = rr.objective_after;
  }
  write_tableau_file(out, res.pair);
  std::printf("objective %s: best value %.8g after %ld evaluations\n", objective.c_str(),
              res.objective, res.evaluations);
  print_metrics(res.report);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int run_solve(const std::string& pair_spec, const std::string& problem_name, double atol,
              const std::string& out) {
  const ContinuousPair pair = load_pair(pair_spec);
  const TestProblem prob = problem(problem_name);
  SolveOptions opts;
  opts.atol = atol;
  const Solution sol = solve(pair, prob.system, prob.t0, prob.x0, prob.t_end, opts);
  auto os = open_output(out);
  os << "t,h";
  for (int k = 0; k < prob.system.dimension; ++k) os << ",x" << k + 1;
  for (std::size_t m = 0; m < pair.d_basis.size(); ++m) os << ",E" << m + 1;
  os << "\n";
  for (const auto& rec : sol.steps) {
    os << format_number(rec.t + rec.h) << "," << format_number(rec.h);
    for (int k = 0; k < prob.system.dimension; ++k) os << "," << format_number(rec.x_end(k));
    for (double e : rec.error_estimates) os << "," << format_number(e);
    os << "\n";
  }
  os << "# rhs_evals=" << sol.rhs_evaluations << " rejections=" << sol.rejections
     << " accepted=" << sol.steps.size() << "\n";
  std::printf("%s: %zu accepted steps, %ld rejections, %ld rhs evaluations\n",
              prob.name.c_str(), sol.steps.size(), sol.rejections, sol.rhs_evaluations);
  if (sol.status != Solution::Status::ok) {
    std::fprintf(stderr, "solve stopped early (%s)\n",
                 sol.status == Solution::Status::min_step_reached ? "minimum step reached"
                                                                  : "step limit exceeded");
    return 1;
  }
  return 0;
}

int run_stability(const std::string& pair_spec, const std::string& scale_mode,
                  const std::string& window, const std::string& out) {
  const ContinuousPair pair = load_pair(pair_spec);
  const std::vector<double> w = parse_params_arg(window);
  if (w.size() != 4) throw error("window must be re0,re1,im0,im1");
  const StabilityPolynomial poly = stability_polynomial(pair.tableau, pair.tableau.b);
  const double scale = scale_mode == "equal-cost" ? pair.tableau.s - 1 : 1.0;
  RegionGrid grid{w[0], w[1], w[2], w[3], 401, 401};
  const auto polylines = stability_region(poly, scale, grid);
  auto os = open_output(out);
  os << "curve,re,im\n";
  for (std::size_t k = 0; k < polylines.size(); ++k) {
    for (const auto& z : polylines[k]) {
      os << k + 1 << "," << format_number(z.real()) << "," << format_number(z.imag()) << "\n";
    }
  }
  std::printf("wrote %zu boundary curves to %s (scale %.0f)\n", polylines.size(), out.c_str(),
              scale);
  return 0;
}

int run_dense(const std::string& pair_spec, const std::string& curve, const std::string& out) {
  const ContinuousPair pair = load_pair(pair_spec);
  if (!pair.interpolant) throw error("pair has no interpolant");
  if (curve != "t5" && curve != "t6" && curve != "t7") {
    throw error("unknown curve: " + curve + " (expected t5, t6 or t7)");
  }
  const int p = curve[1] - '0';
  const TreeFunctionals fn = tree_functionals(pair.tableau, p);
  auto os = open_output(out);
  os << "theta,value\n";
  for (int i = 0; i <= 500; ++i) {
    const double theta = i / 500.0;
    const Eigen::VectorXd beta = pair.interpolant->beta(theta);
    double sum = 0.0;
    const double theta_p = std::pow(theta, p);
    for (const auto& e : fn.by_order[p - 1]) {
      const double r = (beta.dot(e.phi) - theta_p / static_cast<double>(e.density)) /
                       static_cast<double>(e.symmetry);
      sum += r * r;
    }
    os << format_number(theta) << "," << format_number(std::sqrt(sum)) << "\n";
  }
  return 0;
}

int run_bench(const std::string& pairs_arg, const std::string& problems_arg,
              const std::string& atols_arg, const std::string& out_dir) {
  std::vector<std::string> pair_specs, problem_names;
  auto split = [](const std::string& text, std::vector<std::string>& out) {
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      out.push_back(text.substr(pos, comma - pos));
      pos = comma + 1;
    }
  };
  split(pairs_arg, pair_specs);
  split(problems_arg, problem_names);
  const std::vector<double> atols = parse_atol_grid(atols_arg);
  std::filesystem::create_directories(out_dir);
  for (const std::string& ps : pair_specs) {
    const ContinuousPair pair = load_pair(ps);
    std::string stem = std::filesystem::path(ps).stem().string();
    if (ps.rfind("builtin:", 0) == 0) stem = ps.substr(8);
    for (const std::string& pn : problem_names) {
      const TestProblem prob = problem(pn);
      const auto points = work_precision(pair, prob, atols);
      const std::string path = out_dir + "/" + stem + "_" + pn + ".csv";
      auto os = open_output(path);
      os << "atol,rhs_evals,max_error,rejections\n";
      for (const auto& wp : points) {
        if (!wp.ok) continue;  // solve failure: missing point, not abort
        os << format_number(wp.atol) << "," << wp.rhs_evals << ","
           << format_number(wp.max_error) << "," << wp.rejections << "\n";
      }
      std::printf("wrote %s\n", path.c_str());
    }
  }
  return 0;
}

int run_circle(const std::string& pair_spec, const std::string& out) {
  const ContinuousPair pair = load_pair(pair_spec);
  const CircleTestResult res = circle_test(pair);
  auto os = open_output(out);
  os << "record,param,x,y\n";
  for (std::size_t i = 0; i < res.stage_positions.size(); ++i) {
    os << "stage," << i + 1 << "," << format_number(res.stage_positions[i].x()) << ","
       << format_number(res.stage_positions[i].y()) << "\n";
  }
  for (std::size_t k = 0; k < res.thetas.size(); ++k) {
    os << "interp_error," << format_number(res.thetas[k]) << ","
       << format_number(res.interpolant_error[k].x()) << ","
       << format_number(res.interpolant_error[k].y()) << "\n";
  }
  os << "endpoint_error,1," << format_number(res.endpoint_error.x()) << ","
     << format_number(res.endpoint_error.y()) << "\n";
  std::printf("circle test: endpoint error %.3e\n", res.endpoint_error.norm());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous (4,5) Runge-Kutta pair toolbox"};
  app.require_subcommand(1);

  std::string params_arg, pair_spec, out, problem_name = "A3", objective = "a";
  std::string window = "-6,2,-6,6", scale_mode = "equal-cost", curve = "t6";
  std::string pairs_arg, problems_arg = "A3,D5,E2", atols_arg = "1e-3:1e-9:0.5dec";
  std::string trace_path;
  int order = 5, starts = 16, samples = 201;
  long budget = 2000;
  std::uint64_t seed = 1;
  double atol = 1e-6;
  std::int64_t rationalize_den = 0;

  auto* derive = app.add_subcommand("derive", "construct a pair from 11 family parameters");
  derive->add_option("--params", params_arg, "11 values (comma/space separated) or @file")
      ->required();
  derive->add_option("--out", out, "output tableau file")->required();

  auto* verify = app.add_subcommand("verify", "check order conditions of a pair");
  verify->add_option("--pair", pair_spec, "tableau file or builtin:<name>")->required();
  verify->add_option("--order", order, "highest order to check (default 5)");

  auto* metrics = app.add_subcommand("metrics", "print the comparison-table columns");
  metrics->add_option("--pair", pair_spec)->required();

  auto* interp = app.add_subcommand("interp", "sample the interpolant functions to CSV");
  interp->add_option("--pair", pair_spec)->required();
  interp->add_option("--out", out)->required();
  interp->add_option("--samples", samples, "number of theta samples (default 201)");

  auto* optimize = app.add_subcommand("optimize", "search the 11-parameter family");
  optimize->add_option("--objective", objective, "a or b")->check(CLI::IsMember({"a", "b"}));
  optimize->add_option("--starts", starts, "number of multistart points (default 16)");
  optimize->add_option("--budget", budget, "objective evaluations per start (default 2000)");
  optimize->add_option("--seed", seed, "random seed (default 1)");
  optimize->add_option("--out", out)->required();
  optimize->add_option("--trace", trace_path, "optional evaluation-trace CSV");
  optimize->add_option("--rationalize", rationalize_den,
                       "snap parameters to rationals with this max denominator");

  auto* solve_cmd = app.add_subcommand("solve", "adaptive solve of a test problem");
  solve_cmd->add_option("--pair", pair_spec)->required();
  solve_cmd->add_option("--problem", problem_name, "A3|D5|E2|rotation")->required();
  solve_cmd->add_option("--atol", atol, "absolute tolerance")->required();
  solve_cmd->add_option("--out", out, "steps CSV")->required();

  auto* stability = app.add_subcommand("stability", "stability-region boundary as CSV");
  stability->add_option("--pair", pair_spec)->required();
  stability->add_option("--scale", scale_mode, "equal-cost or unit")
      ->check(CLI::IsMember({"equal-cost", "unit"}));
  stability->add_option("--window", window, "re0,re1,im0,im1");
  stability->add_option("--out", out)->required();

  auto* dense = app.add_subcommand("dense", "local-error profile T_p(theta) as CSV");
  dense->add_option("--pair", pair_spec)->required();
  dense->add_option("--curve", curve, "t5, t6 or t7 (default t6)");
  dense->add_option("--out", out)->required();

  auto* bench = app.add_subcommand("bench", "work-precision CSVs over pairs and problems");
  bench->add_option("--pairs", pairs_arg, "comma-separated pair files / builtins")->required();
  bench->add_option("--problems", problems_arg, "comma-separated problem names");
  bench->add_option("--atols", atols_arg, "grid, e.g. 1e-3:1e-9:0.5dec");
  bench->add_option("--out", out, "output directory")->required();

  auto* circle = app.add_subcommand("circle", "single quarter-turn step data as CSV");
  circle->add_option("--pair", pair_spec)->required();
  circle->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;      // usage errors exit with 2
  }

  try {
    if (derive->parsed()) return run_derive(params_arg, out);
    if (verify->parsed()) return run_verify(pair_spec, order);
    if (metrics->parsed()) return run_metrics(pair_spec);
    if (interp->parsed()) return run_interp(pair_spec, out, samples);
    if (optimize->parsed())
      return run_optimize(objective, starts, budget, seed, out, trace_path, rationalize_den);
    if (solve_cmd->parsed()) return run_solve(pair_spec, problem_name, atol, out);
    if (stability->parsed()) return run_stability(pair_spec, scale_mode, window, out);
    if (dense->parsed()) return run_dense(pair_spec, curve, out);
    if (bench->parsed()) return run_bench(pairs_arg, problems_arg, atols_arg, out);
    if (circle->parsed()) return run_circle(pair_spec, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
