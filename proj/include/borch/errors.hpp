// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace borch {

/// Malformed input text (distribution, pool, or allocation files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solve did not reach its tolerance.
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& what, std::vector<double> residuals = {})
      : std::runtime_error(what), residuals_(std::move(residuals)) {}

  // Participation residuals at the point where the solve gave up (may be empty).
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// A state whose clearing level cannot be reached inside the utility domains.
class InfeasibleStateError : public SolveError {
 public:
  explicit InfeasibleStateError(double state_value)
      : SolveError("state value " + std::to_string(state_value) +
                   " is unreachable within the agents' utility domains"),
        state_value_(state_value) {}

  double state_value() const noexcept { return state_value_; }

 private:
  double state_value_;
};

}  // namespace borch
