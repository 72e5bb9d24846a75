// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "borch/distribution.hpp"
#include "borch/exchange.hpp"
#include "borch/pool.hpp"

namespace borch {

// Panel-growth experiment: as homogeneous reinsurers are added, the
// originator's optimal retained risk converges to E[X] in every state and
// each reinsurer's share to zero. The sweep measures both sup-norm errors,
// which for a finite support is exactly almost-sure convergence.

/// One panel size of the sweep.
struct SweepPoint {
  long long n = 0;
  double sup_err_originator = 0.0;  // max over states |X_0(v) - E[X]|
  double sup_reinsurer = 0.0;       // max over states |X_1(v)|
  double aggregate_a = 0.0;
};

namespace detail {

/// Worker cap for sweep parallelism: hardware concurrency clamped by the
/// BORCH_LLN_THREADS environment variable when it parses as a positive int.
inline unsigned thread_budget(std::size_t work_items) {
  unsigned budget = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BORCH_LLN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0)
      budget = static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return static_cast<unsigned>(std::min<std::size_t>(budget, std::max<std::size_t>(work_items, 1)));
}

}  // namespace detail

/// Solves the optimal exchange for each panel size in n_list (strictly
/// increasing, all >= 1) and records the sup-norm errors. Points are
/// independent and computed concurrently within the thread budget.
inline std::vector<SweepPoint> sweep(const Agent& originator, const Agent& reinsurer_template,
                                     const DiscreteDistribution& d,
                                     std::span<const long long> n_list) {
  if (originator.utility.kind() != UtilityKind::Exponential ||
      reinsurer_template.utility.kind() != UtilityKind::Exponential)
    throw std::invalid_argument("sweep needs exponential agents");
  if (n_list.empty()) throw std::invalid_argument("sweep needs a nonempty n list");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1) throw std::invalid_argument("panel sizes must be >= 1");
    if (i > 0 && n_list[i] <= n_list[i - 1])
      throw std::invalid_argument("panel sizes must be strictly increasing");
  }

  const double mean = expectation(d);
  std::vector<SweepPoint> points(n_list.size());
  const auto compute = [&](std::size_t i) {
    const Pool pool = Pool::homogeneous(originator, reinsurer_template, n_list[i]);
    const OptimalSolve solve = allocate_optimal(pool, d);
    SweepPoint pt;
    pt.n = n_list[i];
    pt.aggregate_a = solve.report.aggregate_a;
    for (std::size_t k = 0; k < solve.allocation.state_count(); ++k) {
      pt.sup_err_originator =
          std::max(pt.sup_err_originator,
                   std::abs(solve.allocation.originator_share(k) - mean));
      pt.sup_reinsurer =
          std::max(pt.sup_reinsurer, std::abs(solve.allocation.reinsurer_share(0, k)));
    }
    points[i] = pt;
  };

  const unsigned workers = detail::thread_budget(n_list.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_list.size(); ++i) compute(i);
    return points;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned t = 0; t < workers; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < n_list.size(); i += workers) compute(i);
    });
  for (std::thread& th : threads) th.join();
  return points;
}

/// Log-log least-squares fit of the originator error against n.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points_used = 0;
  std::vector<long long> excluded_zero_error;  // zero-error points left out
};

/// Fits log(sup_err_originator) = slope * log(n) + intercept by ordinary
/// least squares. Points with n < 10 are outside the asymptotic regime and
/// are skipped; zero-error points cannot be logged and are reported in the
/// fit. Throws when fewer than three usable points remain.
inline RateFit estimate_rate(std::span<const SweepPoint> points) {
  RateFit fit;
  std::vector<double> lx, ly;
  for (const SweepPoint& p : points) {
    if (p.n < 10) continue;
    if (!(p.sup_err_originator > 0.0)) {
      fit.excluded_zero_error.push_back(p.n);
      continue;
    }
    lx.push_back(std::log(static_cast<double>(p.n)));
    ly.push_back(std::log(p.sup_err_originator));
  }
  if (lx.size() < 3)
    throw std::invalid_argument("rate fit needs at least 3 usable points, got " +
                                std::to_string(lx.size()));
  const double nn = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= nn;
  my /= nn;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points_used = lx.size();
  return fit;
}

}  // namespace borch
