// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "borch/allocation.hpp"
#include "borch/distribution.hpp"
#include "borch/pool.hpp"

namespace borch {

// Closed-form Pareto-optimal exchange for exponential pools.
//
// With aggregate tolerance 1/a = sum_i 1/a_i and kappa = log E[e^{aX}], the
// optimal shares are
//     X_0 = (a/a_0) X + (1/a - 1/a_0) kappa
//     X_i = (a/a_i) X - (1/a_i) kappa        for every reinsurer i,
// which clear the market in every state and make every reinsurer's
// participation constraint bind: E[e^{a_i X_i}] = E[e^{aX - kappa}] = 1.
// The wealths cancel out of the shares entirely; they only enter the
// recovered multipliers.

namespace detail {

inline void require_exponential(const Pool& p) {
  if (!p.all_exponential())
    throw std::invalid_argument("closed-form exchange needs exponential agents");
}

// Sum of reinsurer tolerances, 1/a - 1/a_0.
inline double reinsurer_tolerance(const Pool& p) {
  double t = 0.0;
  for (const ReinsurerGroup& g : p.groups())
    t += static_cast<double>(g.count) / g.agent.utility.parameter();
  return t;
}

// Multipliers consistent with the binding optimum, lambda_0 = 1:
//   log lambda_i = kappa - a w + a_i w_i + a S,
//   S = sum_j log(lambda_j)/a_j = (a_0/a) ((kappa - a w) T + (w - w_0)),
// where T = 1/a - 1/a_0. Then lambda_i u'_i(w_i - X_i) = e^{a(X - w) + a S}
// for every agent, the Borch first-order condition.
inline std::vector<double> recover_lambdas(const Pool& p, double a, double kappa) {
  const double w = p.total_wealth();
  const double w0 = p.originator().wealth;
  const double a0 = p.originator().utility.parameter();
  const double t = reinsurer_tolerance(p);
  const double s = (a0 / a) * ((kappa - a * w) * t + (w - w0));
  std::vector<double> lambdas;
  lambdas.reserve(p.group_count());
  for (const ReinsurerGroup& g : p.groups()) {
    const double ai = g.agent.utility.parameter();
    lambdas.push_back(std::exp(kappa - a * w + ai * g.agent.wealth + a * s));
  }
  return lambdas;
}

}  // namespace detail

/// Homogeneous-panel multiplier: the unique lambda_1 > 0 with
///   (1 - n a / a_1) log lambda_1 = log E[e^{aX}] - a w + a_1 w_1.
/// The factor is evaluated as a_1 / (n a_0 + a_1), which is exact where the
/// subtraction form cancels for large n.
inline double solve_lambda_homogeneous(const Pool& p, const DiscreteDistribution& d) {
  detail::require_exponential(p);
  if (p.reinsurer_count() < 1)
    throw std::invalid_argument("multiplier solve needs at least one reinsurer");
  if (!p.homogeneous_reinsurers())
    throw std::invalid_argument("multiplier solve needs a homogeneous panel");
  const double a0 = p.originator().utility.parameter();
  const double a1 = p.groups().front().agent.utility.parameter();
  const double w1 = p.groups().front().agent.wealth;
  const double n = static_cast<double>(p.reinsurer_count());
  const double a = aggregate_tolerance(p);
  const double kappa = cgf(d, a);
  const double factor = a1 / (n * a0 + a1);
  return std::exp((kappa - a * p.total_wealth() + a1 * w1) / factor);
}

/// Allocation induced by given multipliers (one per reinsurer group,
/// lambda_0 = 1):
///   X_i = (a/a_i)(X - w) - log(lambda_i)/a_i + w_i + (a/a_i) S.
/// Clearing is verified at construction, not assumed.
inline Allocation allocate_given_lambdas(const Pool& p, std::span<const double> lambdas,
                                         const DiscreteDistribution& d) {
  detail::require_exponential(p);
  if (lambdas.size() != p.group_count())
    throw std::invalid_argument("lambda count does not match pool groups");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l))
      throw std::invalid_argument("multipliers must be positive and finite");

  const double a = aggregate_tolerance(p);
  const double w = p.total_wealth();
  double s = 0.0;
  for (std::size_t g = 0; g < lambdas.size(); ++g)
    s += static_cast<double>(p.groups()[g].count) * std::log(lambdas[g]) /
         p.groups()[g].agent.utility.parameter();

  const std::size_t m = d.size();
  std::vector<double> support(m), probability(m), originator(m);
  std::vector<ReinsurerShareRow> rows(p.group_count());
  for (std::size_t g = 0; g < rows.size(); ++g) {
    rows[g].share.resize(m);
    rows[g].multiplicity = p.groups()[g].count;
  }
  const double a0 = p.originator().utility.parameter();
  const double w0 = p.originator().wealth;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = d.atoms()[k].value;
    support[k] = x;
    probability[k] = d.atoms()[k].probability;
    originator[k] = (a / a0) * (x - w) + w0 + (a / a0) * s;
    for (std::size_t g = 0; g < rows.size(); ++g) {
      const double ai = p.groups()[g].agent.utility.parameter();
      rows[g].share[k] = (a / ai) * (x - w) - std::log(lambdas[g]) / ai +
                         p.groups()[g].agent.wealth + (a / ai) * s;
    }
  }
  return {std::move(support), std::move(probability), std::move(originator), std::move(rows)};
}

struct OptimalSolve {
  Allocation allocation;
  SolveReport report;
};

/// The binding optimum in reduced form. Works for any exponential panel,
/// heterogeneous included; n = 0 degenerates to the originator keeping X.
inline OptimalSolve allocate_optimal(const Pool& p, const DiscreteDistribution& d) {
  detail::require_exponential(p);
  const double a = aggregate_tolerance(p);
  const double kappa = cgf(d, a);
  const double a0 = p.originator().utility.parameter();
  // 1/a - 1/a_0 accumulated directly from the reinsurer tolerances so the
  // kappa terms cancel against the reinsurer rows to machine precision.
  const double t = detail::reinsurer_tolerance(p);

  const std::size_t m = d.size();
  std::vector<double> support(m), probability(m), originator(m);
  std::vector<ReinsurerShareRow> rows(p.group_count());
  for (std::size_t g = 0; g < rows.size(); ++g) {
    rows[g].share.resize(m);
    rows[g].multiplicity = p.groups()[g].count;
  }
  for (std::size_t k = 0; k < m; ++k) {
    const double x = d.atoms()[k].value;
    support[k] = x;
    probability[k] = d.atoms()[k].probability;
    originator[k] = (a / a0) * x + t * kappa;
    for (std::size_t g = 0; g < rows.size(); ++g) {
      const double ai = p.groups()[g].agent.utility.parameter();
      rows[g].share[k] = (a / ai) * x - kappa / ai;
    }
  }
  Allocation alloc{std::move(support), std::move(probability), std::move(originator),
                   std::move(rows)};

  SolveReport report;
  report.lambdas = detail::recover_lambdas(p, a, kappa);
  report.log_mgf_at_a = kappa;
  report.aggregate_a = a;
  report.total_wealth = p.total_wealth();
  report.participation_residuals = participation_residuals(p, alloc, d);
  const Agent& o = p.originator();
  report.originator_utility =
      expected_utility(o.utility, o.wealth, alloc.originator_row(), alloc.probabilities());
  report.originator_utility_unshared =
      expected_utility(o.utility, o.wealth, alloc.support(), alloc.probabilities());
  return {std::move(alloc), std::move(report)};
}

}  // namespace borch
