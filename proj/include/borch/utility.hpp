// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

namespace borch {

enum class UtilityKind { Exponential, Power, Quadratic };

/// Strictly increasing, strictly concave utility families:
///   Exponential(a): u(x) = (1 - e^{-a x}) / a   on all of R,  a > 0
///   Power(g):       u(x) = x^{1-g} / (1 - g)    on x > 0,     g > 0, g != 1
///   Quadratic(b):   u(x) = x - x^2 / (2 b)      on x < b,     b > 0
class UtilitySpec {
 public:
  static UtilitySpec exponential(double risk_aversion) {
    if (!(risk_aversion > 0.0) || !std::isfinite(risk_aversion))
      throw std::invalid_argument("exponential utility needs risk aversion a > 0");
    return {UtilityKind::Exponential, risk_aversion};
  }

  static UtilitySpec power(double gamma) {
    if (!(gamma > 0.0) || gamma == 1.0 || !std::isfinite(gamma))
      throw std::invalid_argument("power utility needs gamma > 0, gamma != 1");
    return {UtilityKind::Power, gamma};
  }

  static UtilitySpec quadratic(double satiation) {
    if (!(satiation > 0.0) || !std::isfinite(satiation))
      throw std::invalid_argument("quadratic utility needs satiation level b > 0");
    return {UtilityKind::Quadratic, satiation};
  }

  UtilityKind kind() const noexcept { return kind_; }

  // The family parameter: a, gamma, or b depending on kind.
  double parameter() const noexcept { return param_; }

  friend bool operator==(const UtilitySpec& l, const UtilitySpec& r) noexcept {
    return l.kind_ == r.kind_ && l.param_ == r.param_;
  }

 private:
  UtilitySpec(UtilityKind k, double p) : kind_(k), param_(p) {}
  UtilityKind kind_;
  double param_;
};

inline bool in_domain(const UtilitySpec& u, double x) noexcept {
  switch (u.kind()) {
    case UtilityKind::Exponential: return std::isfinite(x);
    case UtilityKind::Power: return x > 0.0 && std::isfinite(x);
    case UtilityKind::Quadratic: return x < u.parameter();
  }
  return false;
}

inline double utility_value(const UtilitySpec& u, double x) {
  if (!in_domain(u, x)) throw std::domain_error("utility argument outside domain");
  switch (u.kind()) {
    case UtilityKind::Exponential: {
      const double a = u.parameter();
      return (1.0 - std::exp(-a * x)) / a;
    }
    case UtilityKind::Power: {
      const double g = u.parameter();
      return std::pow(x, 1.0 - g) / (1.0 - g);
    }
    case UtilityKind::Quadratic: {
      const double b = u.parameter();
      return x - x * x / (2.0 * b);
    }
  }
  throw std::logic_error("unreachable");
}

inline double marginal(const UtilitySpec& u, double x) {
  if (!in_domain(u, x)) throw std::domain_error("utility argument outside domain");
  switch (u.kind()) {
    case UtilityKind::Exponential: return std::exp(-u.parameter() * x);
    case UtilityKind::Power: return std::pow(x, -u.parameter());
    case UtilityKind::Quadratic: return 1.0 - x / u.parameter();
  }
  throw std::logic_error("unreachable");
}

/// Closed-form inverse of the marginal. Every family's marginal maps its
/// domain onto (0, inf), so the only admissible inputs are y > 0.
inline double inverse_marginal(const UtilitySpec& u, double y) {
  if (!(y > 0.0) || !std::isfinite(y))
    throw std::domain_error("inverse_marginal needs y > 0");
  switch (u.kind()) {
    case UtilityKind::Exponential: return -std::log(y) / u.parameter();
    case UtilityKind::Power: return std::pow(y, -1.0 / u.parameter());
    case UtilityKind::Quadratic: return u.parameter() * (1.0 - y);
  }
  throw std::logic_error("unreachable");
}

/// Inverse of the utility itself: the sure wealth with utility level v.
inline double inverse_utility(const UtilitySpec& u, double v) {
  switch (u.kind()) {
    case UtilityKind::Exponential: {
      const double a = u.parameter();
      if (!(a * v < 1.0)) throw std::domain_error("utility level out of range");
      return -std::log1p(-a * v) / a;
    }
    case UtilityKind::Power: {
      const double g = u.parameter();
      if (!((1.0 - g) * v > 0.0)) throw std::domain_error("utility level out of range");
      return std::pow((1.0 - g) * v, 1.0 / (1.0 - g));
    }
    case UtilityKind::Quadratic: {
      const double b = u.parameter();
      if (!(v < 0.5 * b)) throw std::domain_error("utility level out of range");
      return b * (1.0 - std::sqrt(1.0 - 2.0 * v / b));
    }
  }
  throw std::logic_error("unreachable");
}

/// Absolute risk aversion -u''(x)/u'(x); the natural scale for converting
/// certainty-equivalent gaps into multiplier updates.
inline double absolute_risk_aversion(const UtilitySpec& u, double x) {
  switch (u.kind()) {
    case UtilityKind::Exponential: return u.parameter();
    case UtilityKind::Power:
      if (!in_domain(u, x)) throw std::domain_error("utility argument outside domain");
      return u.parameter() / x;
    case UtilityKind::Quadratic:
      if (!in_domain(u, x)) throw std::domain_error("utility argument outside domain");
      return 1.0 / (u.parameter() - x);
  }
  throw std::logic_error("unreachable");
}

}  // namespace borch
