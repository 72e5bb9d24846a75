// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "borch/allocation.hpp"
#include "borch/borch_numeric.hpp"
#include "borch/distribution.hpp"
#include "borch/errors.hpp"
#include "borch/exchange.hpp"
#include "borch/limits.hpp"
#include "borch/oracle.hpp"
#include "borch/pool.hpp"
#include "borch/text.hpp"

namespace borch::cli {

// Exit codes: 0 success, 1 verification failure, 2 input error, 3 solver
// failure.
inline constexpr int kOk = 0;
inline constexpr int kVerificationFailed = 1;
inline constexpr int kInputError = 2;
inline constexpr int kSolverError = 3;

namespace detail {

struct PoolFlags {
  double a0 = 1.0, w0 = 0.0, a1 = 1.0, w1 = 0.0;
  long long n = 1;
  std::string pool_file;
};

inline void add_pool_flags(CLI::App* sub, PoolFlags& f) {
  auto* a0 = sub->add_option("--a0", f.a0, "Originator risk aversion")
                 ->capture_default_str();
  auto* w0 = sub->add_option("--w0", f.w0, "Originator initial wealth")
                 ->capture_default_str();
  auto* n = sub->add_option("--n", f.n, "Number of homogeneous reinsurers")
                ->capture_default_str();
  auto* a1 = sub->add_option("--a1", f.a1, "Reinsurer risk aversion")
                 ->capture_default_str();
  auto* w1 = sub->add_option("--w1", f.w1, "Reinsurer initial wealth")
                 ->capture_default_str();
  auto* pool = sub->add_option("--pool", f.pool_file,
                               "Pool config file (heterogeneous panels)");
  pool->excludes(a0)->excludes(w0)->excludes(n)->excludes(a1)->excludes(w1);
}

inline Pool build_pool(const PoolFlags& f) {
  if (!f.pool_file.empty()) return read_pool_file(f.pool_file);
  if (f.n < 0) throw std::invalid_argument("--n must be >= 0");
  return Pool::homogeneous({UtilitySpec::exponential(f.a0), f.w0},
                           {UtilitySpec::exponential(f.a1), f.w1}, f.n);
}

inline std::vector<long long> parse_n_list(const std::string& text) {
  std::vector<long long> out;
  for (std::string_view item : borch::detail::split(text, ','))
    out.push_back(borch::detail::parse_int(item, "--n-list"));
  return out;
}

// Output target that is either a file or the provided stream.
struct Sink {
  std::ofstream file;
  std::ostream* stream = nullptr;

  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream = &fallback;
    } else {
      file.open(path);
      if (!file) throw ParseError("cannot open output file '" + path + "'");
      stream = &file;
    }
  }
  std::ostream& get() { return *stream; }
};

struct CheckRow {
  std::string name;
  int status;  // 0 pass, 1 fail, 2 skipped
  std::string detail;
};

inline std::string brief(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

inline int print_checks(std::ostream& out, const std::vector<CheckRow>& rows) {
  int failures = 0;
  for (const CheckRow& r : rows) {
    const char* status = r.status == 0 ? "PASS" : r.status == 1 ? "FAIL" : "SKIPPED";
    out << std::left << std::setw(22) << r.name << status;
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << '\n';
    if (r.status == 1) ++failures;
  }
  if (failures == 0)
    out << "verification: all checks passed\n";
  else
    out << "verification: " << failures << " check(s) failed\n";
  return failures == 0 ? kOk : kVerificationFailed;
}

inline double scaled_clearing_gap(const Allocation& alloc) {
  double worst = 0.0;
  for (std::size_t k = 0; k < alloc.state_count(); ++k)
    worst = std::max(worst, std::abs(alloc.clearing_gap(k)) /
                                (1.0 + std::abs(alloc.state_value(k))));
  return worst;
}

inline int cmd_allocate(const std::string& dist_file, const PoolFlags& flags,
                        const std::string& out_file, std::ostream& out) {
  const DiscreteDistribution dist = read_distribution_file(dist_file);
  const Pool pool = build_pool(flags);
  const OptimalSolve solve = allocate_optimal(pool, dist);
  Sink sink(out_file, out);
  std::ostream& os = sink.get();
  os << "# lambda1="
     << (solve.report.lambdas.empty() ? "nan" : fmt17(solve.report.lambdas.front())) << '\n';
  if (solve.report.lambdas.size() > 1) {
    os << "# lambdas=";
    for (std::size_t g = 0; g < solve.report.lambdas.size(); ++g)
      os << (g ? "," : "") << fmt17(solve.report.lambdas[g]);
    os << '\n';
  }
  os << "# kappa=" << fmt17(solve.report.log_mgf_at_a) << '\n';
  os << "# a=" << fmt17(solve.report.aggregate_a) << '\n';
  os << "# max_participation_residual="
     << fmt17(solve.report.max_participation_residual()) << '\n';
  os << "# originator_gain="
     << fmt17(solve.report.originator_utility - solve.report.originator_utility_unshared)
     << '\n';
  write_allocation_csv(os, solve.allocation);
  return kOk;
}

inline int cmd_sweep(const std::string& dist_file, const PoolFlags& flags,
                     const std::string& n_list_text, const std::string& out_file,
                     std::ostream& out) {
  const DiscreteDistribution dist = read_distribution_file(dist_file);
  const std::vector<long long> n_list = parse_n_list(n_list_text);
  if (n_list.size() < 3)
    throw std::invalid_argument("--n-list: rate fit needs at least 3 points");
  const Agent originator{UtilitySpec::exponential(flags.a0), flags.w0};
  const Agent reinsurer{UtilitySpec::exponential(flags.a1), flags.w1};
  const std::vector<SweepPoint> points = sweep(originator, reinsurer, dist, n_list);

  Sink sink(out_file, out);
  std::ostream& os = sink.get();
  os << "n,a,sup_err_x0,sup_x1\n";
  for (const SweepPoint& p : points)
    os << p.n << ',' << fmt17(p.aggregate_a) << ',' << fmt17(p.sup_err_originator) << ','
       << fmt17(p.sup_reinsurer) << '\n';
  try {
    const RateFit fit = estimate_rate(points);
    os << "# slope=" << fmt17(fit.slope) << " intercept=" << fmt17(fit.intercept) << '\n';
    if (!fit.excluded_zero_error.empty()) {
      os << "# note=zero-error points excluded from the fit: n=";
      for (std::size_t i = 0; i < fit.excluded_zero_error.size(); ++i)
        os << (i ? "," : "") << fit.excluded_zero_error[i];
      os << '\n';
    }
  } catch (const std::invalid_argument& e) {
    os << "# slope=nan intercept=nan\n";
    os << "# note=" << e.what() << '\n';
  }
  return kOk;
}

inline int cmd_verify(const std::string& dist_file, const PoolFlags& flags,
                      long long trials, std::uint64_t seed,
                      const std::string& check_alloc_file, std::ostream& out) {
  const DiscreteDistribution dist = read_distribution_file(dist_file);
  const Pool pool = build_pool(flags);
  std::vector<CheckRow> rows;

  if (!check_alloc_file.empty()) {
    const Allocation candidate = read_allocation_csv_file(check_alloc_file);
    borch::detail::check_dimensions(pool, candidate, dist);
    const double gap = scaled_clearing_gap(candidate);
    rows.push_back({"clearing", gap <= 1e-12 ? 0 : 1, "max scaled gap " + brief(gap)});
    double worst_violation = 0.0;
    for (double r : participation_residuals(pool, candidate, dist))
      worst_violation = std::min(worst_violation, r);
    rows.push_back({"participation", worst_violation >= -1e-10 ? 0 : 1,
                    "worst residual " + brief(worst_violation)});
    const OptimalSolve opt = allocate_optimal(pool, dist);
    const Agent& o = pool.originator();
    const double candidate_u0 = expected_utility(o.utility, o.wealth,
                                                 candidate.originator_row(),
                                                 candidate.probabilities());
    const double gain_gap = candidate_u0 - opt.report.originator_utility;
    rows.push_back({"dominance", gain_gap <= 1e-12 ? 0 : 1,
                    "originator utility gap " + brief(gain_gap)});
    return print_checks(out, rows);
  }

  const OptimalSolve closed = allocate_optimal(pool, dist);
  const BindingSolve numeric = solve_binding(pool, dist);

  const double gap = scaled_clearing_gap(closed.allocation);
  rows.push_back({"clearing", gap <= 1e-12 ? 0 : 1, "max scaled gap " + brief(gap)});

  const double residual = closed.report.max_participation_residual();
  rows.push_back({"participation", residual <= 1e-10 ? 0 : 1,
                  "max |residual| " + brief(residual)});

  const double spread =
      borch_relative_spread(pool, closed.allocation, closed.report.lambdas);
  rows.push_back({"borch_ratio", spread <= 1e-9 ? 0 : 1, "relative spread " + brief(spread)});

  double sup = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    sup = std::max(sup, std::abs(closed.allocation.originator_share(k) -
                                 numeric.allocation.originator_share(k)));
    for (std::size_t g = 0; g < pool.group_count(); ++g)
      sup = std::max(sup, std::abs(closed.allocation.reinsurer_share(g, k) -
                                   numeric.allocation.reinsurer_share(g, k)));
  }
  rows.push_back({"closed_vs_numeric", sup <= 1e-8 ? 0 : 1,
                  "sup share difference " + brief(sup) + ", " +
                      std::to_string(numeric.report.iterations) + " sweeps"});

  if (pool.reinsurer_count() >= 1 && pool.homogeneous_reinsurers()) {
    const double lambda_closed = solve_lambda_homogeneous(pool, dist);
    const double lambda_numeric = numeric.report.lambdas.front();
    const double rel = std::abs(lambda_numeric - lambda_closed) / lambda_closed;
    rows.push_back({"lambda_homogeneous", rel <= 1e-8 ? 0 : 1,
                    "relative difference " + brief(rel)});
  } else {
    rows.push_back({"lambda_homogeneous", 2,
                    pool.reinsurer_count() < 1 ? "no reinsurers" : "heterogeneous panel"});
  }

  if (pool.reinsurer_count() >= 1 && pool.reinsurer_count() <= 2) {
    std::vector<Agent> agents{pool.originator()};
    std::vector<double> lambdas;
    for (std::size_t g = 0; g < pool.group_count(); ++g)
      for (long long c = 0; c < pool.groups()[g].count; ++c) {
        agents.push_back(pool.groups()[g].agent);
        lambdas.push_back(closed.report.lambdas[g]);
      }
    const long long grid = agents.size() == 3 ? 1000 : 100000;
    const auto expanded = closed.allocation.expanded_shares();
    double oracle_sup = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      const std::vector<double> split =
          maximize_state_weighted(agents, lambdas, dist.atoms()[k].value, grid);
      for (std::size_t i = 0; i < split.size(); ++i)
        oracle_sup = std::max(oracle_sup, std::abs(split[i] - expanded[i][k]));
    }
    rows.push_back({"oracle_grid", oracle_sup <= 1e-6 ? 0 : 1,
                    "sup share difference " + brief(oracle_sup)});
  } else {
    rows.push_back({"oracle_grid", 2, "needs 1 or 2 reinsurers"});
  }

  if (trials > 0) {
    const DominanceReport rep = dominance_test(pool, dist, trials, seed);
    const bool ok = rep.violations == 0 && rep.max_weighted_gap <= 1e-12;
    rows.push_back({"dominance", ok ? 0 : 1,
                    "evaluated " + std::to_string(rep.evaluated) + ", skipped " +
                        std::to_string(rep.skipped) + ", max gap " + brief(rep.max_gap)});
  } else {
    rows.push_back({"dominance", 2, "--trials 0"});
  }

  return print_checks(out, rows);
}

}  // namespace detail

/// Parses and runs one command; args exclude the program name. Returns the
/// documented exit code and writes to the provided streams only.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal risk sharing between an originator and a reinsurer panel "
               "under exponential utility"};
  app.require_subcommand(1);

  std::string dist_file, out_file, n_list_text, check_alloc_file;
  detail::PoolFlags flags;
  long long trials = 1000;
  std::uint64_t seed = 42;

  CLI::App* allocate = app.add_subcommand(
      "allocate", "Solve the optimal allocation and emit it as CSV");
  allocate->add_option("--dist", dist_file, "Loss distribution file (value,probability)")
      ->required();
  detail::add_pool_flags(allocate, flags);
  allocate->add_option("--out", out_file, "Output file (default: stdout)");

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Sweep the panel size and fit the convergence rate");
  sweep_cmd->add_option("--dist", dist_file, "Loss distribution file (value,probability)")
      ->required();
  sweep_cmd->add_option("--a0", flags.a0, "Originator risk aversion")->capture_default_str();
  sweep_cmd->add_option("--w0", flags.w0, "Originator initial wealth")->capture_default_str();
  sweep_cmd->add_option("--a1", flags.a1, "Reinsurer risk aversion")->capture_default_str();
  sweep_cmd->add_option("--w1", flags.w1, "Reinsurer initial wealth")->capture_default_str();
  n_list_text = "1,2,5,10,100,1000,10000,100000,1000000";
  sweep_cmd->add_option("--n-list", n_list_text, "Comma-separated panel sizes")
      ->capture_default_str();
  sweep_cmd->add_option("--out", out_file, "Output file (default: stdout)");

  CLI::App* verify = app.add_subcommand(
      "verify", "Cross-check the closed form against the numeric solver and oracle");
  verify->add_option("--dist", dist_file, "Loss distribution file (value,probability)")
      ->required();
  detail::add_pool_flags(verify, flags);
  verify->add_option("--trials", trials, "Random allocations for the dominance test")
      ->capture_default_str();
  verify->add_option("--seed", seed, "Seed for the dominance test")->capture_default_str();
  verify->add_option("--check-alloc", check_alloc_file,
                     "Check an existing allocation CSV instead of solving");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    const CLI::App* target = &app;
    for (const CLI::App* sub : {allocate, sweep_cmd, verify})
      if (sub->parsed()) target = sub;
    out << target->help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return kInputError;
  }

  try {
    if (allocate->parsed())
      return detail::cmd_allocate(dist_file, flags, out_file, out);
    if (sweep_cmd->parsed())
      return detail::cmd_sweep(dist_file, flags, n_list_text, out_file, out);
    return detail::cmd_verify(dist_file, flags, trials, seed, check_alloc_file, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SolveError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace borch::cli
