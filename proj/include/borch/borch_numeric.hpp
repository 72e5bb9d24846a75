// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "borch/allocation.hpp"
#include "borch/distribution.hpp"
#include "borch/errors.hpp"
#include "borch/pool.hpp"

namespace borch {

// General-utility solver. Each state is solved by bisection on the shadow
// value: at the optimum the weighted marginal utilities agree across agents,
//     lambda_i u'_i(w_i - X_i) = Lambda,
// so X_i(Lambda) = w_i - inverse_marginal(u_i, Lambda/lambda_i) and the total
// allocated share is strictly increasing in Lambda. An outer iteration then
// moves log lambda until every participation residual vanishes. This path
// shares no formulas with the closed-form exchange module and is used to
// validate it.

/// Borch split of one state value: the common shadow value and the per-agent
/// shares, which sum to the state value within 1e-12 scaled by 1 + |x|.
struct StateSolution {
  double state_value = 0.0;
  double shadow_value = 0.0;
  std::vector<double> shares;
};

namespace detail {

constexpr double kInnerTolerance = 1e-13;   // clearing gap, scaled by 1 + |x|
constexpr double kInnerAcceptable = 1e-12;  // fallback when the bracket is ulp-tight
constexpr double kOuterTolerance = 1e-10;   // max |participation residual|
constexpr int kMaxExpansions = 200;
constexpr int kMaxBisections = 300;
constexpr int kMaxOuterSweeps = 500;

// Share of one agent at log-shadow L, safe for any L: the exponent is clamped
// to the representable range, so limits degrade to +-huge instead of NaN.
inline double share_at(const Agent& agent, double log_lambda, double log_shadow) {
  const double e = std::clamp(log_shadow - log_lambda, -745.0, 709.0);
  return agent.wealth - inverse_marginal(agent.utility, std::exp(e));
}

inline double log_marginal(const UtilitySpec& u, double x) {
  switch (u.kind()) {
    case UtilityKind::Exponential: return -u.parameter() * x;
    case UtilityKind::Power: return -u.parameter() * std::log(x);
    case UtilityKind::Quadratic: return std::log(1.0 - x / u.parameter());
  }
  throw std::logic_error("unreachable");
}

// Open range of shares reachable by one agent as Lambda sweeps (0, inf).
inline std::pair<double, double> share_range(const Agent& agent) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (agent.utility.kind()) {
    case UtilityKind::Exponential: return {-inf, inf};
    case UtilityKind::Power: return {-inf, agent.wealth};
    case UtilityKind::Quadratic: return {agent.wealth - agent.utility.parameter(), inf};
  }
  throw std::logic_error("unreachable");
}

struct GroupedAgents {
  std::vector<Agent> agents;      // slot 0 is the originator
  std::vector<double> counts;     // slot 0 is 1
  std::vector<double> log_lambda; // slot 0 is 0
};

// Bisection in log Lambda. Returns the log shadow value and per-slot shares.
inline std::pair<double, std::vector<double>> solve_state_grouped(const GroupedAgents& ga,
                                                                  double x) {
  const std::size_t m = ga.agents.size();
  double reach_lo = 0.0, reach_hi = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto [lo, hi] = share_range(ga.agents[i]);
    reach_lo += ga.counts[i] * lo;  // -inf propagates
    reach_hi += ga.counts[i] * hi;
  }
  if (!(reach_lo < x && x < reach_hi)) throw InfeasibleStateError(x);

  const auto clearing = [&](double log_shadow) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      total += ga.counts[i] * share_at(ga.agents[i], ga.log_lambda[i], log_shadow);
    return total;
  };

  // Bracket from the marginals at the equal split when that split is inside
  // every domain, else from Lambda = 1.
  double total_agents = 0.0;
  for (double c : ga.counts) total_agents += c;
  const double split = x / total_agents;
  double lo = 0.0, hi = 0.0;
  bool split_ok = true;
  for (std::size_t i = 0; i < m && split_ok; ++i)
    split_ok = in_domain(ga.agents[i].utility, ga.agents[i].wealth - split);
  if (split_ok) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t i = 0; i < m; ++i) {
      const double l = ga.log_lambda[i] +
                       log_marginal(ga.agents[i].utility, ga.agents[i].wealth - split);
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }

  constexpr double kLog2 = 0.6931471805599453;
  int expansions = 0;
  while (clearing(lo) > x) {
    lo -= kLog2;
    if (++expansions > kMaxExpansions)
      throw SolveError("shadow-value bracket expansion exhausted (low side)");
  }
  expansions = 0;
  while (clearing(hi) < x) {
    hi += kLog2;
    if (++expansions > kMaxExpansions)
      throw SolveError("shadow-value bracket expansion exhausted (high side)");
  }

  const double tol = kInnerTolerance * (1.0 + std::abs(x));
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxBisections; ++it) {
    mid = 0.5 * (lo + hi);
    const double gap = clearing(mid) - x;
    if (std::abs(gap) <= tol) break;
    if (gap < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max({1.0, std::abs(lo), std::abs(hi)})) {
      mid = 0.5 * (lo + hi);
      if (std::abs(clearing(mid) - x) <= kInnerAcceptable * (1.0 + std::abs(x))) break;
      throw SolveError("state bisection stalled at " + std::to_string(x));
    }
  }

  std::vector<double> shares(m);
  for (std::size_t i = 0; i < m; ++i)
    shares[i] = share_at(ga.agents[i], ga.log_lambda[i], mid);
  return {mid, std::move(shares)};
}

}  // namespace detail

/// Borch split of a single state across individually listed agents.
/// agents[0] is the originator with implicit lambda_0 = 1; lambdas holds one
/// weight per remaining agent.
inline StateSolution solve_state(std::span<const Agent> agents, std::span<const double> lambdas,
                                 double x) {
  if (agents.size() < 2)
    throw std::invalid_argument("state solve needs the originator plus at least one agent");
  if (lambdas.size() + 1 != agents.size())
    throw std::invalid_argument("need one lambda per non-originator agent");
  detail::GroupedAgents ga;
  ga.agents.assign(agents.begin(), agents.end());
  ga.counts.assign(agents.size(), 1.0);
  ga.log_lambda.resize(agents.size(), 0.0);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i]))
      throw std::invalid_argument("multipliers must be positive and finite");
    ga.log_lambda[i + 1] = std::log(lambdas[i]);
  }
  for (const Agent& a : ga.agents) validate_agent(a);
  auto [log_shadow, shares] = detail::solve_state_grouped(ga, x);
  return {x, std::exp(log_shadow), std::move(shares)};
}

struct BindingSolve {
  Allocation allocation;
  SolveReport report;
};

/// Solves the participation-binding exchange numerically: states by bisection
/// on the shadow value, multipliers by a damped fixed-point iteration in
/// log lambda whose step is the certainty-equivalent shortfall scaled by the
/// agent's risk aversion. Once the step-to-step contraction ratio stabilises
/// the remaining geometric tail is extrapolated in one move, so exponential
/// pools converge in a handful of sweeps regardless of panel size.
inline BindingSolve solve_binding(const Pool& p, const DiscreteDistribution& d) {
  const std::size_t n_groups = p.group_count();
  const std::size_t m = d.size();

  std::vector<double> support(m), probability(m);
  for (std::size_t k = 0; k < m; ++k) {
    support[k] = d.atoms()[k].value;
    probability[k] = d.atoms()[k].probability;
  }

  const auto make_report = [&](std::vector<double> lambdas, const Allocation& alloc,
                               int sweeps) {
    SolveReport report;
    report.lambdas = std::move(lambdas);
    if (p.all_exponential()) {
      report.aggregate_a = aggregate_tolerance(p);
      report.log_mgf_at_a = cgf(d, report.aggregate_a);
    }
    report.total_wealth = p.total_wealth();
    report.participation_residuals = participation_residuals(p, alloc, d);
    const Agent& o = p.originator();
    report.originator_utility =
        expected_utility(o.utility, o.wealth, alloc.originator_row(), alloc.probabilities());
    report.originator_utility_unshared =
        expected_utility(o.utility, o.wealth, alloc.support(), alloc.probabilities());
    report.iterations = sweeps;
    return report;
  };

  if (n_groups == 0) {
    Allocation alloc{support, probability, support, {}};
    SolveReport report = make_report({}, alloc, 0);
    return {std::move(alloc), std::move(report)};
  }

  detail::GroupedAgents ga;
  ga.agents.push_back(p.originator());
  ga.counts.push_back(1.0);
  ga.log_lambda.push_back(0.0);
  for (const ReinsurerGroup& g : p.groups()) {
    ga.agents.push_back(g.agent);
    ga.counts.push_back(static_cast<double>(g.count));
    ga.log_lambda.push_back(0.0);
  }

  struct Evaluation {
    std::vector<double> originator;            // per state
    std::vector<std::vector<double>> groups;   // [group][state]
    std::vector<double> residuals;             // per group
    double norm = 0.0;
  };

  const auto evaluate = [&]() {
    Evaluation ev;
    ev.originator.resize(m);
    ev.groups.assign(n_groups, std::vector<double>(m));
    for (std::size_t k = 0; k < m; ++k) {
      auto [log_shadow, shares] = detail::solve_state_grouped(ga, support[k]);
      (void)log_shadow;
      ev.originator[k] = shares[0];
      for (std::size_t g = 0; g < n_groups; ++g) ev.groups[g][k] = shares[g + 1];
    }
    ev.residuals.resize(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
      const Agent& agent = p.groups()[g].agent;
      const double eu =
          expected_utility(agent.utility, agent.wealth, ev.groups[g], probability);
      ev.residuals[g] = eu - utility_value(agent.utility, agent.wealth);
      ev.norm = std::max(ev.norm, std::abs(ev.residuals[g]));
    }
    return ev;
  };

  // Certainty-equivalent shortfall per group converted to a log-lambda step;
  // for exponential agents this equals log E[e^{a_i X_i}].
  const auto direction = [&](const Evaluation& ev) {
    std::vector<double> dir(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
      const Agent& agent = p.groups()[g].agent;
      const double eu = ev.residuals[g] + utility_value(agent.utility, agent.wealth);
      const double ce = inverse_utility(agent.utility, eu);
      dir[g] = -absolute_risk_aversion(agent.utility, agent.wealth) * (ce - agent.wealth);
    }
    return dir;
  };

  const auto finish = [&](const Evaluation& ev, int sweeps) {
    std::vector<ReinsurerShareRow> rows(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g)
      rows[g] = {ev.groups[g], p.groups()[g].count};
    Allocation alloc{support, probability, ev.originator, std::move(rows)};
    std::vector<double> lambdas(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) lambdas[g] = std::exp(ga.log_lambda[g + 1]);
    SolveReport report = make_report(std::move(lambdas), alloc, sweeps);
    return BindingSolve{std::move(alloc), std::move(report)};
  };

  double eta = 1.0;
  Evaluation cur = evaluate();
  int sweeps = 1;
  bool have_prev = false, have_gprev = false, have_rho = false;
  std::vector<double> prev_log_lambda, prev_dir, g_prev;
  double prev_norm = 0.0, rho_prev = 0.0;

  const auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  while (true) {
    if (cur.norm <= detail::kOuterTolerance) return finish(cur, sweeps);
    if (sweeps >= detail::kMaxOuterSweeps)
      throw SolveError("participation iteration did not converge in " +
                           std::to_string(detail::kMaxOuterSweeps) + " sweeps",
                       cur.residuals);

    if (have_prev && cur.norm >= prev_norm) {
      // The step made things worse: halve it and retry from the last
      // accepted point.
      eta *= 0.5;
      if (eta < 1e-6)
        throw SolveError("participation iteration stalled", cur.residuals);
      for (std::size_t g = 0; g < n_groups; ++g)
        ga.log_lambda[g + 1] = prev_log_lambda[g] + eta * prev_dir[g];
      cur = evaluate();
      ++sweeps;
      have_gprev = have_rho = false;
      continue;
    }

    std::vector<double> dir = direction(cur);
    double boost = 1.0;
    if (have_gprev) {
      const double denom = dot(g_prev, g_prev);
      const double rho = denom > 0.0 ? dot(dir, g_prev) / denom : 0.0;
      if (have_rho && eta == 1.0 && rho > 0.05 && rho < 0.995 &&
          std::abs(rho - rho_prev) <= 0.05 * rho + 1e-12) {
        boost = 1.0 / (1.0 - rho);  // jump the remaining geometric tail
        have_gprev = have_rho = false;
      } else {
        rho_prev = rho;
        have_rho = true;
        g_prev = dir;
      }
    } else {
      g_prev = dir;
      have_gprev = true;
    }

    prev_log_lambda.assign(ga.log_lambda.begin() + 1, ga.log_lambda.end());
    prev_dir = dir;
    prev_norm = cur.norm;
    have_prev = true;
    for (std::size_t g = 0; g < n_groups; ++g)
      ga.log_lambda[g + 1] += eta * boost * dir[g];
    cur = evaluate();
    ++sweeps;
    eta = std::min(1.0, eta * 1.4);
  }
}

}  // namespace borch
