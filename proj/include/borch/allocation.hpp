// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "borch/distribution.hpp"
#include "borch/errors.hpp"
#include "borch/pool.hpp"
#include "borch/text.hpp"

namespace borch {

/// Shares of one reinsurer group across states; `multiplicity` is the number
/// of identical reinsurers holding this row.
struct ReinsurerShareRow {
  std::vector<double> share;
  long long multiplicity = 1;
};

/// Per-agent, per-state split of the loss. Rows mirror the pool's reinsurer
/// groups. Market clearing (shares summing to the state value) is verified at
/// construction; use from_rows_unchecked only to ingest candidate data whose
/// clearing is itself under test.
class Allocation {
 public:
  static constexpr double kClearingTolerance = 1e-12;

  Allocation(std::vector<double> support, std::vector<double> probability,
             std::vector<double> originator_share, std::vector<ReinsurerShareRow> rows)
      : Allocation(std::move(support), std::move(probability), std::move(originator_share),
                   std::move(rows), /*check_clearing=*/true) {}

  static Allocation from_rows_unchecked(std::vector<double> support,
                                        std::vector<double> probability,
                                        std::vector<double> originator_share,
                                        std::vector<ReinsurerShareRow> rows) {
    return {std::move(support), std::move(probability), std::move(originator_share),
            std::move(rows), /*check_clearing=*/false};
  }

  std::size_t state_count() const noexcept { return support_.size(); }
  std::size_t group_count() const noexcept { return rows_.size(); }

  double state_value(std::size_t k) const { return support_[k]; }
  double state_probability(std::size_t k) const { return probability_[k]; }
  double originator_share(std::size_t k) const { return originator_[k]; }
  double reinsurer_share(std::size_t g, std::size_t k) const { return rows_[g].share[k]; }
  long long multiplicity(std::size_t g) const { return rows_[g].multiplicity; }

  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& probabilities() const noexcept { return probability_; }
  const std::vector<double>& originator_row() const noexcept { return originator_; }
  const std::vector<ReinsurerShareRow>& reinsurer_rows() const noexcept { return rows_; }

  long long reinsurer_count() const noexcept {
    long long n = 0;
    for (const ReinsurerShareRow& r : rows_) n += r.multiplicity;
    return n;
  }

  double clearing_gap(std::size_t k) const {
    double total = originator_[k];
    for (const ReinsurerShareRow& r : rows_)
      total += static_cast<double>(r.multiplicity) * r.share[k];
    return total - support_[k];
  }

  double max_clearing_gap() const {
    double g = 0.0;
    for (std::size_t k = 0; k < support_.size(); ++k)
      g = std::max(g, std::abs(clearing_gap(k)));
    return g;
  }

  /// Uncompressed [agent][state] view, originator first then each group
  /// repeated multiplicity times. Intended for small pools.
  std::vector<std::vector<double>> expanded_shares() const {
    std::vector<std::vector<double>> out;
    out.push_back(originator_);
    for (const ReinsurerShareRow& r : rows_)
      for (long long c = 0; c < r.multiplicity; ++c) out.push_back(r.share);
    return out;
  }

 private:
  Allocation(std::vector<double> support, std::vector<double> probability,
             std::vector<double> originator_share, std::vector<ReinsurerShareRow> rows,
             bool check_clearing)
      : support_(std::move(support)),
        probability_(std::move(probability)),
        originator_(std::move(originator_share)),
        rows_(std::move(rows)) {
    const std::size_t m = support_.size();
    if (m == 0) throw std::invalid_argument("allocation needs at least one state");
    if (probability_.size() != m || originator_.size() != m)
      throw std::invalid_argument("allocation row lengths disagree");
    for (const ReinsurerShareRow& r : rows_) {
      if (r.share.size() != m)
        throw std::invalid_argument("allocation row lengths disagree");
      if (r.multiplicity < 1)
        throw std::invalid_argument("row multiplicity must be >= 1");
      for (double s : r.share)
        if (!std::isfinite(s)) throw std::invalid_argument("share values must be finite");
    }
    for (double s : originator_)
      if (!std::isfinite(s)) throw std::invalid_argument("share values must be finite");
    if (check_clearing) {
      for (std::size_t k = 0; k < m; ++k) {
        const double tol = kClearingTolerance * (1.0 + std::abs(support_[k]));
        if (std::abs(clearing_gap(k)) > tol)
          throw std::invalid_argument("allocation does not clear at state " +
                                      fmt17(support_[k]) + " (gap " +
                                      fmt17(clearing_gap(k)) + ")");
      }
    }
  }

  std::vector<double> support_;
  std::vector<double> probability_;
  std::vector<double> originator_;
  std::vector<ReinsurerShareRow> rows_;
};

/// Diagnostics from one solve. lambdas are the Lagrange weights per reinsurer
/// group (lambda_0 = 1 implicit); log_mgf_at_a is kappa = log E[e^{aX}] and
/// aggregate_a the pool tolerance, populated for exponential pools.
struct SolveReport {
  std::vector<double> lambdas;
  double log_mgf_at_a = std::numeric_limits<double>::quiet_NaN();
  double aggregate_a = std::numeric_limits<double>::quiet_NaN();
  double total_wealth = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> participation_residuals;
  double originator_utility = std::numeric_limits<double>::quiet_NaN();
  double originator_utility_unshared = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;

  double max_participation_residual() const {
    double m = 0.0;
    for (double r : participation_residuals) m = std::max(m, std::abs(r));
    return m;
  }
};

inline double expected_utility(const UtilitySpec& u, double wealth,
                               std::span<const double> shares,
                               std::span<const double> probabilities) {
  double e = 0.0;
  for (std::size_t k = 0; k < shares.size(); ++k)
    e += probabilities[k] * utility_value(u, wealth - shares[k]);
  return e;
}

namespace detail {

inline void check_dimensions(const Pool& p, const Allocation& alloc,
                             const DiscreteDistribution& d) {
  if (alloc.group_count() != p.group_count())
    throw std::invalid_argument("allocation group count does not match pool");
  for (std::size_t g = 0; g < p.group_count(); ++g)
    if (alloc.multiplicity(g) != p.groups()[g].count)
      throw std::invalid_argument("allocation multiplicities do not match pool");
  if (alloc.state_count() != d.size())
    throw std::invalid_argument("allocation support does not match distribution");
  for (std::size_t k = 0; k < d.size(); ++k)
    if (alloc.state_value(k) != d.atoms()[k].value)
      throw std::invalid_argument("allocation support does not match distribution");
}

}  // namespace detail

/// Per reinsurer group: E[u_i(w_i - X_i)] - u_i(w_i). Zero means the
/// participation constraint binds; negative means it is violated.
inline std::vector<double> participation_residuals(const Pool& p, const Allocation& alloc,
                                                   const DiscreteDistribution& d) {
  detail::check_dimensions(p, alloc, d);
  std::vector<double> out;
  out.reserve(p.group_count());
  for (std::size_t g = 0; g < p.group_count(); ++g) {
    const Agent& agent = p.groups()[g].agent;
    const double eu = expected_utility(agent.utility, agent.wealth,
                                       alloc.reinsurer_rows()[g].share, alloc.probabilities());
    out.push_back(eu - utility_value(agent.utility, agent.wealth));
  }
  return out;
}

/// Originator's expected-utility gain over keeping the whole loss.
inline double originator_gain(const Pool& p, const Allocation& alloc,
                              const DiscreteDistribution& d) {
  detail::check_dimensions(p, alloc, d);
  const Agent& o = p.originator();
  const double shared =
      expected_utility(o.utility, o.wealth, alloc.originator_row(), alloc.probabilities());
  const double unshared =
      expected_utility(o.utility, o.wealth, alloc.support(), alloc.probabilities());
  return shared - unshared;
}

/// sum_i lambda_i E[u_i(w_i - X_i)] with lambda_0 = 1 and group members counted.
inline double weighted_objective(const Pool& p, const Allocation& alloc,
                                 std::span<const double> lambdas) {
  if (lambdas.size() != p.group_count())
    throw std::invalid_argument("lambda count does not match pool groups");
  const Agent& o = p.originator();
  double total =
      expected_utility(o.utility, o.wealth, alloc.originator_row(), alloc.probabilities());
  for (std::size_t g = 0; g < p.group_count(); ++g) {
    const Agent& agent = p.groups()[g].agent;
    const double eu = expected_utility(agent.utility, agent.wealth,
                                       alloc.reinsurer_rows()[g].share, alloc.probabilities());
    total += lambdas[g] * static_cast<double>(p.groups()[g].count) * eu;
  }
  return total;
}

/// Largest state-wise relative spread of the weighted marginal utilities
/// lambda_i u'_i(w_i - X_i) across agents; zero at an exact Borch optimum.
inline double borch_relative_spread(const Pool& p, const Allocation& alloc,
                                    std::span<const double> lambdas) {
  if (lambdas.size() != p.group_count())
    throw std::invalid_argument("lambda count does not match pool groups");
  double worst = 0.0;
  for (std::size_t k = 0; k < alloc.state_count(); ++k) {
    const Agent& o = p.originator();
    double lo = marginal(o.utility, o.wealth - alloc.originator_share(k));
    double hi = lo;
    for (std::size_t g = 0; g < p.group_count(); ++g) {
      const Agent& agent = p.groups()[g].agent;
      const double m =
          lambdas[g] * marginal(agent.utility, agent.wealth - alloc.reinsurer_share(g, k));
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    worst = std::max(worst, (hi - lo) / (0.5 * (hi + lo)));
  }
  return worst;
}

inline constexpr const char* kAllocationCsvHeader =
    "state_value,probability,x0,x_reinsurer,multiplicity";

/// CSV body: one row per state per reinsurer group (exactly one row per state
/// for homogeneous pools), 17 significant digits. Pools with no reinsurers
/// emit one row per state with an empty share and multiplicity 0.
inline void write_allocation_csv(std::ostream& out, const Allocation& alloc) {
  out << kAllocationCsvHeader << '\n';
  for (std::size_t k = 0; k < alloc.state_count(); ++k) {
    if (alloc.group_count() == 0) {
      out << fmt17(alloc.state_value(k)) << ',' << fmt17(alloc.state_probability(k)) << ','
          << fmt17(alloc.originator_share(k)) << ",,0\n";
      continue;
    }
    for (std::size_t g = 0; g < alloc.group_count(); ++g)
      out << fmt17(alloc.state_value(k)) << ',' << fmt17(alloc.state_probability(k)) << ','
          << fmt17(alloc.originator_share(k)) << ',' << fmt17(alloc.reinsurer_share(g, k))
          << ',' << alloc.multiplicity(g) << '\n';
  }
}

/// Reads the CSV format written above. Clearing is deliberately not enforced
/// so that externally edited allocations can be checked and reported on.
inline Allocation parse_allocation_csv(std::istream& in,
                                       const std::string& source = "<input>") {
  std::vector<double> support, probability, originator;
  std::vector<ReinsurerShareRow> rows;
  bool header_seen = false;
  bool empty_pool = false;
  std::size_t block_rows = 0;  // reinsurer rows seen in the current state block
  std::string line;
  for (long long lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const std::string where = source + " line " + std::to_string(lineno);
    if (!header_seen) {
      if (body != kAllocationCsvHeader)
        throw ParseError(where + ": expected header '" + kAllocationCsvHeader + "'");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(body, ',');
    if (fields.size() != 5)
      throw ParseError(where + ": expected 5 comma-separated fields");
    const double value = detail::parse_double(fields[0], where);
    const double prob = detail::parse_double(fields[1], where);
    const double x0 = detail::parse_double(fields[2], where);
    const long long mult = detail::parse_int(fields[4], where);
    const bool new_state = support.empty() || value != support.back();
    if (new_state) {
      if (!support.empty() && !empty_pool && block_rows != rows.size())
        throw ParseError(where + ": state " + fmt17(support.back()) +
                         " has an incomplete group block");
      support.push_back(value);
      probability.push_back(prob);
      originator.push_back(x0);
      block_rows = 0;
    } else {
      if (prob != probability.back() || x0 != originator.back())
        throw ParseError(where + ": probability/x0 disagree within state block");
    }
    if (mult == 0 && detail::trim(fields[3]).empty()) {
      if (!rows.empty()) throw ParseError(where + ": empty share in a reinsurer pool");
      empty_pool = true;
      continue;
    }
    if (empty_pool) throw ParseError(where + ": share row after an empty-pool row");
    const double share = detail::parse_double(fields[3], where);
    if (support.size() == 1) {
      rows.push_back({{share}, mult});
    } else {
      if (block_rows >= rows.size())
        throw ParseError(where + ": more group rows than in the first state");
      if (rows[block_rows].multiplicity != mult)
        throw ParseError(where + ": multiplicity differs from the first state");
      rows[block_rows].share.push_back(share);
    }
    ++block_rows;
  }
  if (!header_seen) throw ParseError(source + ": missing allocation header");
  if (support.empty()) throw ParseError(source + ": no allocation rows");
  if (!empty_pool && block_rows != rows.size())
    throw ParseError(source + ": last state has an incomplete group block");
  try {
    return Allocation::from_rows_unchecked(std::move(support), std::move(probability),
                                           std::move(originator), std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline Allocation read_allocation_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open allocation file '" + path + "'");
  return parse_allocation_csv(in, path);
}

}  // namespace borch
