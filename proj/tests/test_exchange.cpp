// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "borch/exchange.hpp"

using namespace borch;

namespace {

// log((1 + e^0.5)/2) by direct two-term summation.
const double kKappaHalf = std::log(0.5 * (1.0 + std::exp(0.5)));

Agent expo(double a, double w) { return {UtilitySpec::exponential(a), w}; }

DiscreteDistribution bernoulli_half() {
  return DiscreteDistribution({{0.0, 0.5}, {1.0, 0.5}});
}

DiscreteDistribution skewed() {
  return DiscreteDistribution({{0.0, 0.5}, {0.1, 0.3}, {0.5, 0.2}});
}

// E[e^{a1 X1}] for the first reinsurer row, summed directly.
double reinsurer_exp_moment(const Pool& p, const Allocation& alloc) {
  const double a1 = p.groups().front().agent.utility.parameter();
  double e = 0.0;
  for (std::size_t k = 0; k < alloc.state_count(); ++k)
    e += alloc.state_probability(k) * std::exp(a1 * alloc.reinsurer_share(0, k));
  return e;
}

}  // namespace

TEST_CASE("homogeneous multiplier solve") {
  // point mass at 0, all wealth 0: kappa = 0 and w = 0 force log lambda = 0
  CHECK(solve_lambda_homogeneous(Pool::homogeneous(expo(1, 0), expo(1, 0), 1),
                                 DiscreteDistribution::point_mass(0.0)) == 1.0);

  // n=1, unit agents, Bernoulli(1/2): factor 1/2, so log lambda = 2 kappa
  const Pool unit = Pool::homogeneous(expo(1, 0), expo(1, 0), 1);
  const double lambda = solve_lambda_homogeneous(unit, bernoulli_half());
  CHECK(lambda == doctest::Approx(1.7539310924648255).epsilon(1e-15));
  CHECK(lambda == doctest::Approx(std::exp(2.0 * kKappaHalf)).epsilon(1e-15));
  // and the induced allocation leaves the reinsurer exactly indifferent
  const Allocation alloc = allocate_given_lambdas(unit, std::vector<double>{lambda},
                                                  bernoulli_half());
  CHECK(std::abs(participation_residuals(unit, alloc, bernoulli_half())[0]) < 1e-12);

  // same but w1 = 1: log lambda = (kappa - 0.5 + 1)/0.5
  const Pool rich = Pool::homogeneous(expo(1, 0), expo(1, 1.0), 1);
  const double lambda_rich = solve_lambda_homogeneous(rich, bernoulli_half());
  CHECK(lambda_rich == doctest::Approx(std::exp(2.0 * kKappaHalf + 1.0)).epsilon(1e-14));
  const Allocation alloc_rich =
      allocate_given_lambdas(rich, std::vector<double>{lambda_rich}, bernoulli_half());
  CHECK(std::abs(participation_residuals(rich, alloc_rich, bernoulli_half())[0]) < 1e-12);

  CHECK_THROWS_AS(solve_lambda_homogeneous(Pool::homogeneous(expo(1, 0), expo(1, 0), 0),
                                           bernoulli_half()),
                  std::invalid_argument);
  const Pool het = Pool::heterogeneous(expo(1, 0), {expo(1, 0), expo(2, 0)});
  CHECK_THROWS_AS(solve_lambda_homogeneous(het, bernoulli_half()), std::invalid_argument);
}

TEST_CASE("allocation for given multipliers") {
  // unit lambdas, equal unit agents: everything splits in half
  const Pool unit = Pool::homogeneous(expo(1, 0), expo(1, 0), 1);
  const Allocation half =
      allocate_given_lambdas(unit, std::vector<double>{1.0}, bernoulli_half());
  for (std::size_t k = 0; k < half.state_count(); ++k) {
    CHECK(half.originator_share(k) ==
          doctest::Approx(0.5 * half.state_value(k)).epsilon(1e-15).scale(1.0));
    CHECK(half.reinsurer_share(0, k) ==
          doctest::Approx(0.5 * half.state_value(k)).epsilon(1e-15).scale(1.0));
  }

  // unit lambdas and zero wealth split in proportion to the tolerances 1/a_i
  const Pool uneven = Pool::heterogeneous(expo(1, 0), {expo(2, 0), expo(2, 0)});
  const Allocation quarters = allocate_given_lambdas(
      uneven, std::vector<double>{1.0, 1.0}, bernoulli_half());
  for (std::size_t k = 0; k < quarters.state_count(); ++k) {
    const double x = quarters.state_value(k);
    CHECK(quarters.originator_share(k) == doctest::Approx(0.5 * x).scale(1.0));
    CHECK(quarters.reinsurer_share(0, k) == doctest::Approx(0.25 * x).scale(1.0));
    CHECK(quarters.reinsurer_share(1, k) == doctest::Approx(0.25 * x).scale(1.0));
  }
  CHECK(quarters.max_clearing_gap() <= 1e-12);

  CHECK_THROWS_AS(
      allocate_given_lambdas(unit, std::vector<double>{1.0, 2.0}, bernoulli_half()),
      std::invalid_argument);
  CHECK_THROWS_AS(allocate_given_lambdas(unit, std::vector<double>{-1.0}, bernoulli_half()),
                  std::invalid_argument);
}

TEST_CASE("optimal allocation closed form") {
  // n = 0: the originator keeps the loss
  const auto solo = allocate_optimal(Pool::homogeneous(expo(1, 0), expo(1, 0), 0),
                                     bernoulli_half());
  for (std::size_t k = 0; k < solo.allocation.state_count(); ++k)
    CHECK(solo.allocation.originator_share(k) == solo.allocation.state_value(k));
  CHECK(solo.report.lambdas.empty());

  // degenerate loss: kappa = a c cancels the state, reinsurers take nothing
  const auto point = allocate_optimal(Pool::homogeneous(expo(1, 0), expo(1.5, 0.2), 5),
                                      DiscreteDistribution::point_mass(2.0));
  CHECK(point.allocation.originator_share(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(point.allocation.reinsurer_share(0, 0) == doctest::Approx(0.0).scale(1.0));

  // n=1, unit agents, Bernoulli(1/2): X1 = X/2 - kappa, X0 = X/2 + kappa
  const Pool unit = Pool::homogeneous(expo(1, 0), expo(1, 0), 1);
  const auto solve = allocate_optimal(unit, bernoulli_half());
  CHECK(solve.allocation.reinsurer_share(0, 0) ==
        doctest::Approx(-0.2809298036201614).epsilon(1e-15));
  CHECK(solve.allocation.reinsurer_share(0, 1) ==
        doctest::Approx(0.2190701963798386).epsilon(1e-15));
  CHECK(solve.allocation.originator_share(0) ==
        doctest::Approx(0.2809298036201614).epsilon(1e-15));
  CHECK(solve.allocation.originator_share(1) ==
        doctest::Approx(0.7809298036201614).epsilon(1e-15));
  CHECK(reinsurer_exp_moment(unit, solve.allocation) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(solve.report.max_participation_residual() < 1e-10);
  CHECK(solve.report.log_mgf_at_a == doctest::Approx(kKappaHalf).epsilon(1e-15));
  CHECK(solve.report.aggregate_a == doctest::Approx(0.5));

  // the recovered multiplier agrees with the direct homogeneous solve
  CHECK(solve.report.lambdas[0] ==
        doctest::Approx(solve_lambda_homogeneous(unit, bernoulli_half())).epsilon(1e-12));

  CHECK_THROWS_AS(
      allocate_optimal(Pool::homogeneous(expo(1, 0), {UtilitySpec::power(2.0), 1.0}, 1),
                       bernoulli_half()),
      std::invalid_argument);
}

TEST_CASE("optimal shares never depend on wealth") {
  const DiscreteDistribution d = skewed();
  const auto base = allocate_optimal(
      Pool::heterogeneous(expo(1, 0), {expo(0.5, 0), expo(2, 0)}), d);
  const auto shifted = allocate_optimal(
      Pool::heterogeneous(expo(1, 3.0), {expo(0.5, -1.0), expo(2, 0.7)}), d);
  for (std::size_t k = 0; k < d.size(); ++k) {
    CHECK(std::abs(base.allocation.originator_share(k) -
                   shifted.allocation.originator_share(k)) <= 1e-12);
    for (std::size_t g = 0; g < 2; ++g)
      CHECK(std::abs(base.allocation.reinsurer_share(g, k) -
                     shifted.allocation.reinsurer_share(g, k)) <= 1e-12);
  }
}

TEST_CASE("optimal allocation properties across pools") {
  const std::vector<Pool> pools{
      Pool::homogeneous(expo(1, 0), expo(1, 0), 1),
      Pool::homogeneous(expo(0.5, 1.0), expo(1, 0.5), 2),
      Pool::homogeneous(expo(2, -0.5), expo(1.25, 0.25), 10),
      Pool::heterogeneous(expo(1, 0.5), {expo(0.5, 0.2), expo(2, -0.3)}),
  };
  for (const DiscreteDistribution& d : {bernoulli_half(), skewed()}) {
    for (const Pool& p : pools) {
      const auto solve = allocate_optimal(p, d);
      // clearing, binding, Borch ratios
      CHECK(solve.allocation.max_clearing_gap() <= 1e-12);
      CHECK(solve.report.max_participation_residual() <= 1e-10);
      CHECK(borch_relative_spread(p, solve.allocation, solve.report.lambdas) <= 1e-9);
      // nondegenerate X forces the reinsurer share negative somewhere
      double lowest = 0.0;
      for (std::size_t k = 0; k < d.size(); ++k)
        lowest = std::min(lowest, solve.allocation.reinsurer_share(0, k));
      CHECK(lowest < 0.0);
      // sharing can only help the originator
      CHECK(originator_gain(p, solve.allocation, d) >= 0.0);
    }
  }
}

TEST_CASE("homogeneous multiplier path reproduces the reduced form") {
  for (const DiscreteDistribution& d : {bernoulli_half(), skewed()}) {
    for (const Pool& p : {Pool::homogeneous(expo(1, 0), expo(1, 0), 1),
                          Pool::homogeneous(expo(2, 1.0), expo(1, 0.3), 10)}) {
      const double lambda = solve_lambda_homogeneous(p, d);
      const Allocation via_lambda =
          allocate_given_lambdas(p, std::vector<double>{lambda}, d);
      const auto direct = allocate_optimal(p, d);
      for (std::size_t k = 0; k < d.size(); ++k) {
        CHECK(std::abs(via_lambda.originator_share(k) -
                       direct.allocation.originator_share(k)) <= 1e-10);
        CHECK(std::abs(via_lambda.reinsurer_share(0, k) -
                       direct.allocation.reinsurer_share(0, k)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("participation residuals and originator gain") {
  const Pool p = Pool::homogeneous(expo(1, 0.3), expo(1, 0.3), 1);
  const DiscreteDistribution d = bernoulli_half();

  // taking nothing is utility-neutral
  const Allocation idle({0.0, 1.0}, {0.5, 0.5}, {0.0, 1.0}, {{{0.0, 0.0}, 1}});
  CHECK(participation_residuals(p, idle, d)[0] == 0.0);

  // bearing a nonnegative, nondegenerate loss without premium hurts
  const Allocation greedy({0.0, 1.0}, {0.5, 0.5}, {0.0, 0.0}, {{{0.0, 1.0}, 1}});
  CHECK(participation_residuals(p, greedy, d)[0] < 0.0);

  const auto optimal = allocate_optimal(p, d);
  for (double r : participation_residuals(p, optimal.allocation, d))
    CHECK(std::abs(r) < 1e-10);

  const Pool wrong = Pool::heterogeneous(expo(1, 0), {expo(1, 0), expo(1, 0)});
  CHECK_THROWS_AS(participation_residuals(wrong, idle, d), std::invalid_argument);
  CHECK_THROWS_AS(originator_gain(wrong, idle, d), std::invalid_argument);

  // nothing shared, nothing gained
  const auto solo = allocate_optimal(Pool::homogeneous(expo(1, 0), expo(1, 0), 0), d);
  CHECK(originator_gain(Pool::homogeneous(expo(1, 0), expo(1, 0), 0), solo.allocation, d) ==
        0.0);

  // no risk to shed
  const DiscreteDistribution fixed = DiscreteDistribution::point_mass(1.5);
  const auto point = allocate_optimal(p, fixed);
  CHECK(std::abs(originator_gain(p, point.allocation, fixed)) <= 1e-14);

  // genuine risk, strict gain
  CHECK(originator_gain(p, optimal.allocation, d) > 0.0);
}

TEST_CASE("allocations refuse rows that do not clear") {
  CHECK_THROWS_AS(Allocation({0.0, 1.0}, {0.5, 0.5}, {0.0, 0.9}, {{{0.0, 0.0}, 1}}),
                  std::invalid_argument);
  CHECK_NOTHROW(Allocation::from_rows_unchecked({0.0, 1.0}, {0.5, 0.5}, {0.0, 0.9},
                                                {{{0.0, 0.0}, 1}}));
  CHECK_THROWS_AS(Allocation({0.0, 1.0}, {0.5, 0.5}, {0.0}, {{{0.0, 0.0}, 1}}),
                  std::invalid_argument);
}
