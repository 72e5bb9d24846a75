// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "borch/allocation.hpp"
#include "borch/borch_numeric.hpp"
#include "borch/distribution.hpp"
#include "borch/exchange.hpp"
#include "borch/pool.hpp"

namespace borch {

// Brute-force verification, deliberately free of any optimality formula:
// the weighted objective is maximised state by state over an explicit grid
// of splits, and candidate allocations are generated at random to confirm
// that nothing feasible beats the solved optimum.

namespace detail {

constexpr double kGoldenRatio = 0.6180339887498949;

// Maximum of a one-dimensional unimodal function: expand the bracket around
// the seed until the middle beats both ends, then golden-section.
template <typename F>
double line_max(const F& f, double seed, double step) {
  double a = seed - step, b = seed + step;
  double fa = f(a), fm = f(seed), fb = f(b);
  for (int i = 0; i < 200 && (fa > fm || fb > fm); ++i) {
    if (fa > fm) {
      b = seed; fb = fm;
      seed = a; fm = fa;
      a -= 2.0 * (b - seed);
      fa = f(a);
    } else {
      a = seed; fa = fm;
      seed = b; fm = fb;
      b += 2.0 * (seed - a);
      fb = f(b);
    }
  }
  double x1 = b - kGoldenRatio * (b - a), x2 = a + kGoldenRatio * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2; f1 = f2;
      x2 = a + kGoldenRatio * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1; f2 = f1;
      x1 = b - kGoldenRatio * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// Uniform on [-1, 1), identical on every platform for a given mt19937_64.
inline double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace detail

/// Exhaustive maximisation of sum_i lambda_i u_i(w_i - x_i) over splits of x,
/// for two or three agents (agents[0] carries lambda_0 = 1). Shares are
/// confined to [-R, x + R] with R = 10 (1 + |x| + sum |w_i|); a grid scan
/// locates the basin and golden-section passes polish the split.
inline std::vector<double> maximize_state_weighted(std::span<const Agent> agents,
                                                   std::span<const double> lambdas,
                                                   double x, long long grid) {
  if (agents.size() != 2 && agents.size() != 3)
    throw std::invalid_argument("grid oracle handles 2 or 3 agents");
  if (lambdas.size() + 1 != agents.size())
    throw std::invalid_argument("need one lambda per non-originator agent");
  if (grid < 1000) throw std::invalid_argument("grid must be at least 1000");
  for (const Agent& a : agents) validate_agent(a);

  std::vector<double> weight{1.0};
  weight.insert(weight.end(), lambdas.begin(), lambdas.end());
  double wsum = 0.0;
  for (const Agent& a : agents) wsum += std::abs(a.wealth);
  const double radius = 10.0 * (1.0 + std::abs(x) + wsum);
  const double lo = -radius, hi = x + radius;

  const auto value_of = [&](std::size_t i, double share) {
    const double pos = agents[i].wealth - share;
    if (!in_domain(agents[i].utility, pos))
      return -std::numeric_limits<double>::infinity();
    return weight[i] * utility_value(agents[i].utility, pos);
  };

  const double step = (hi - lo) / static_cast<double>(grid - 1);

  if (agents.size() == 2) {
    const auto objective = [&](double x1) { return value_of(0, x - x1) + value_of(1, x1); };
    double best = lo, best_val = -std::numeric_limits<double>::infinity();
    for (long long j = 0; j < grid; ++j) {
      const double x1 = lo + static_cast<double>(j) * step;
      const double v = objective(x1);
      if (v > best_val) {
        best_val = v;
        best = x1;
      }
    }
    const double x1 = detail::line_max(objective, best, step);
    return {x - x1, x1};
  }

  const auto objective = [&](double x1, double x2) {
    const double x0 = x - x1 - x2;
    if (x0 < lo || x0 > hi) return -std::numeric_limits<double>::infinity();
    return value_of(0, x0) + value_of(1, x1) + value_of(2, x2);
  };
  double b1 = lo, b2 = lo, best_val = -std::numeric_limits<double>::infinity();
  for (long long j = 0; j < grid; ++j) {
    const double x1 = lo + static_cast<double>(j) * step;
    for (long long k = 0; k < grid; ++k) {
      const double x2 = lo + static_cast<double>(k) * step;
      const double v = objective(x1, x2);
      if (v > best_val) {
        best_val = v;
        b1 = x1;
        b2 = x2;
      }
    }
  }
  // Coordinate polish; one pass is not enough when the coordinates couple,
  // so iterate until the point stops moving.
  double h = step;
  for (int pass = 0; pass < 100; ++pass) {
    const double p1 = b1, p2 = b2;
    b1 = detail::line_max([&](double t) { return objective(t, b2); }, b1, h);
    b2 = detail::line_max([&](double t) { return objective(b1, t); }, b2, h);
    const double moved = std::max(std::abs(b1 - p1), std::abs(b2 - p2));
    h = std::max(2.0 * moved, 1e-9);
    if (moved < 1e-10) break;
  }
  return {x - b1 - b2, b1, b2};
}

/// Outcome of the random-allocation dominance test. Gaps are measured against
/// the solved optimum; positive means a candidate beat it.
struct DominanceReport {
  long long trials_requested = 0;
  long long evaluated = 0;   // candidates that met every participation constraint
  long long skipped = 0;     // trials whose redraw budget ran out
  long long violations = 0;  // evaluated candidates beating the optimum by > 1e-12
  double max_gap = -std::numeric_limits<double>::infinity();
  double max_weighted_gap = -std::numeric_limits<double>::infinity();
};

/// Draws `trials` random clearing allocations around the optimum (trial 0 is
/// the optimum itself; perturbation scale cycles through 0.01, 0.1, 1.0),
/// rejects draws violating participation, and reports the largest originator
/// and weighted-objective gaps observed.
inline DominanceReport dominance_test(const Pool& p, const DiscreteDistribution& d,
                                      long long trials, std::uint64_t seed) {
  if (trials < 0) throw std::invalid_argument("trials must be >= 0");
  DominanceReport report;
  report.trials_requested = trials;
  if (trials == 0) return report;

  const OptimalSolve opt = p.all_exponential()
                               ? allocate_optimal(p, d)
                               : [&] {
                                   BindingSolve b = solve_binding(p, d);
                                   return OptimalSolve{std::move(b.allocation),
                                                       std::move(b.report)};
                                 }();
  const Agent& o = p.originator();
  const std::size_t m = d.size();
  const std::size_t n_groups = p.group_count();
  const std::vector<double>& probs = opt.allocation.probabilities();
  const double best_u0 = expected_utility(o.utility, o.wealth,
                                          opt.allocation.originator_row(), probs);
  const double best_weighted =
      weighted_objective(p, opt.allocation, opt.report.lambdas);

  std::mt19937_64 rng(seed);
  constexpr double kDeltas[3] = {0.01, 0.1, 1.0};
  constexpr int kRedrawBudget = 8;
  constexpr double kFeasibilitySlack = -1e-12;

  std::vector<std::vector<double>> cand(n_groups, std::vector<double>(m));
  std::vector<double> cand0(m);

  for (long long t = 0; t < trials; ++t) {
    const double delta = t == 0 ? 0.0 : kDeltas[t % 3];
    bool accepted = false;
    for (int attempt = 0; attempt < kRedrawBudget && !accepted; ++attempt) {
      bool in_domains = true;
      for (std::size_t k = 0; k < m; ++k) {
        double taken = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
          cand[g][k] = opt.allocation.reinsurer_share(g, k) +
                       delta * detail::uniform_pm1(rng);
          taken += static_cast<double>(p.groups()[g].count) * cand[g][k];
          in_domains = in_domains &&
                       in_domain(p.groups()[g].agent.utility,
                                 p.groups()[g].agent.wealth - cand[g][k]);
        }
        cand0[k] = d.atoms()[k].value - taken;
        in_domains = in_domains && in_domain(o.utility, o.wealth - cand0[k]);
      }
      if (!in_domains) continue;  // utility is -inf there, trivially dominated
      // The weighted objective needs no participation: every clearing
      // allocation is dominated.
      double weighted = expected_utility(o.utility, o.wealth, cand0, probs);
      bool feasible = true;
      for (std::size_t g = 0; g < n_groups; ++g) {
        const Agent& agent = p.groups()[g].agent;
        const double eu = expected_utility(agent.utility, agent.wealth, cand[g], probs);
        weighted += opt.report.lambdas[g] * static_cast<double>(p.groups()[g].count) * eu;
        if (eu - utility_value(agent.utility, agent.wealth) < kFeasibilitySlack)
          feasible = false;
      }
      report.max_weighted_gap = std::max(report.max_weighted_gap, weighted - best_weighted);
      if (!feasible) continue;
      accepted = true;
      ++report.evaluated;
      const double gap = expected_utility(o.utility, o.wealth, cand0, probs) - best_u0;
      report.max_gap = std::max(report.max_gap, gap);
      if (gap > 1e-12) ++report.violations;
    }
    if (!accepted) ++report.skipped;
  }
  return report;
}

}  // namespace borch
