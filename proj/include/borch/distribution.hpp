// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "borch/errors.hpp"
#include "borch/text.hpp"

namespace borch {

struct Atom {
  double value = 0.0;
  double probability = 0.0;
};

/// Finite-support law of the loss. Atoms are kept sorted ascending by value,
/// every probability is strictly positive, and the probabilities sum to one
/// within 1e-12.
class DiscreteDistribution {
 public:
  static constexpr double kProbabilitySumTolerance = 1e-12;
  static constexpr double kSampleMergeTolerance = 1e-12;

  explicit DiscreteDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty())
      throw std::invalid_argument("distribution needs at least one atom");
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& a, const Atom& b) { return a.value < b.value; });
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const Atom& a = atoms_[i];
      if (!std::isfinite(a.value))
        throw std::invalid_argument("atom value must be finite");
      if (!std::isfinite(a.probability) || a.probability <= 0.0)
        throw std::invalid_argument("atom probability must be in (0, 1]");
      if (i > 0 && !(atoms_[i - 1].value < a.value))
        throw std::invalid_argument("atom values must be pairwise distinct");
      total += a.probability;
    }
    if (std::abs(total - 1.0) > kProbabilitySumTolerance)
      throw std::invalid_argument("atom probabilities must sum to 1, got " + fmt17(total));
  }

  static DiscreteDistribution point_mass(double value) {
    return DiscreteDistribution({{value, 1.0}});
  }

  /// Builds the empirical law of a sample: every observation becomes an
  /// equal-weight atom, values closer than the merge tolerance collapse into
  /// one atom with accumulated weight.
  static DiscreteDistribution from_samples(std::span<const double> samples) {
    if (samples.empty())
      throw std::invalid_argument("empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double unit = 1.0 / static_cast<double>(sorted.size());
    std::vector<Atom> atoms;
    for (double v : sorted) {
      if (!atoms.empty() && v - atoms.back().value <= kSampleMergeTolerance)
        atoms.back().probability += unit;
      else
        atoms.push_back({v, unit});
    }
    return DiscreteDistribution(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double min_value() const noexcept { return atoms_.front().value; }
  double max_value() const noexcept { return atoms_.back().value; }

 private:
  std::vector<Atom> atoms_;
};

inline double expectation(const DiscreteDistribution& d) {
  double m = 0.0;
  for (const Atom& a : d.atoms()) m += a.value * a.probability;
  return m;
}

inline double variance(const DiscreteDistribution& d) {
  const double m = expectation(d);
  double v = 0.0;
  for (const Atom& a : d.atoms()) {
    const double c = a.value - m;
    v += a.probability * c * c;
  }
  return v;
}

/// log E[e^{sX}]. The exponent is shifted by max_k(s v_k) so no intermediate
/// term overflows; exactly zero at s = 0.
inline double cgf(const DiscreteDistribution& d, double s) {
  if (!std::isfinite(s))
    throw std::invalid_argument("cgf needs finite s");
  if (s == 0.0) return 0.0;
  double shift = -std::numeric_limits<double>::infinity();
  for (const Atom& a : d.atoms()) shift = std::max(shift, s * a.value);
  double sum = 0.0;
  for (const Atom& a : d.atoms()) sum += a.probability * std::exp(s * a.value - shift);
  return shift + std::log(sum);
}

/// (1/s) log E[e^{sX}] for s >= 0, extended by continuity: returns E[X]
/// exactly at s = 0, and below the smallness threshold
/// s * (max - min) < 1e-4 switches to the second-order expansion
/// E[X] + (s/2) Var[X], where direct division would amplify rounding.
inline double entropic_certainty(const DiscreteDistribution& d, double s) {
  if (!(s >= 0.0) || !std::isfinite(s))
    throw std::invalid_argument("entropic_certainty needs s >= 0");
  if (s == 0.0) return expectation(d);
  const double spread = d.max_value() - d.min_value();
  if (s * spread < 1e-4) return expectation(d) + 0.5 * s * variance(d);
  return cgf(d, s) / s;
}

/// Reads `value,probability` lines; '#' starts a comment, blank lines are
/// ignored.
inline DiscreteDistribution parse_distribution(std::istream& in,
                                               const std::string& source = "<input>") {
  std::vector<Atom> atoms;
  std::string line;
  for (long long lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view body{line};
    if (const auto hash = body.find('#'); hash != std::string_view::npos)
      body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const std::string where = source + " line " + std::to_string(lineno);
    const auto fields = detail::split(body, ',');
    if (fields.size() != 2)
      throw ParseError(where + ": expected 'value,probability'");
    atoms.push_back({detail::parse_double(fields[0], where),
                     detail::parse_double(fields[1], where)});
  }
  try {
    return DiscreteDistribution(std::move(atoms));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline DiscreteDistribution read_distribution_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open distribution file '" + path + "'");
  return parse_distribution(in, path);
}

}  // namespace borch
