// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "borch/errors.hpp"
#include "borch/text.hpp"
#include "borch/utility.hpp"

namespace borch {

/// One participant: a utility function and initial wealth.
struct Agent {
  UtilitySpec utility;
  double wealth = 0.0;
};

inline void validate_agent(const Agent& a) {
  if (!std::isfinite(a.wealth))
    throw std::invalid_argument("agent wealth must be finite");
  if (a.utility.kind() != UtilityKind::Exponential && !in_domain(a.utility, a.wealth))
    throw std::invalid_argument("agent wealth lies outside the utility domain");
}

/// Identical reinsurers are stored once with a count, so homogeneous panels
/// with n up to 1e6 stay O(1) in memory.
struct ReinsurerGroup {
  Agent agent;
  long long count = 1;
};

/// Originator (index 0) plus a panel of reinsurers. n = 0 is legal: the
/// originator keeps the whole loss.
class Pool {
 public:
  Pool(Agent originator, std::vector<ReinsurerGroup> groups)
      : originator_(std::move(originator)), groups_(std::move(groups)) {
    validate_agent(originator_);
    for (const ReinsurerGroup& g : groups_) {
      validate_agent(g.agent);
      if (g.count < 1) throw std::invalid_argument("reinsurer group count must be >= 1");
    }
  }

  static Pool homogeneous(Agent originator, Agent reinsurer, long long n) {
    if (n < 0) throw std::invalid_argument("reinsurer count must be >= 0");
    std::vector<ReinsurerGroup> groups;
    if (n > 0) groups.push_back({std::move(reinsurer), n});
    return {std::move(originator), std::move(groups)};
  }

  static Pool heterogeneous(Agent originator, const std::vector<Agent>& reinsurers) {
    std::vector<ReinsurerGroup> groups;
    groups.reserve(reinsurers.size());
    for (const Agent& a : reinsurers) groups.push_back({a, 1});
    return {std::move(originator), std::move(groups)};
  }

  const Agent& originator() const noexcept { return originator_; }
  const std::vector<ReinsurerGroup>& groups() const noexcept { return groups_; }
  std::size_t group_count() const noexcept { return groups_.size(); }

  long long reinsurer_count() const noexcept {
    long long n = 0;
    for (const ReinsurerGroup& g : groups_) n += g.count;
    return n;
  }

  bool all_exponential() const noexcept {
    if (originator_.utility.kind() != UtilityKind::Exponential) return false;
    for (const ReinsurerGroup& g : groups_)
      if (g.agent.utility.kind() != UtilityKind::Exponential) return false;
    return true;
  }

  /// True when every reinsurer shares one utility and wealth.
  bool homogeneous_reinsurers() const noexcept {
    for (const ReinsurerGroup& g : groups_)
      if (!(g.agent.utility == groups_.front().agent.utility &&
            g.agent.wealth == groups_.front().agent.wealth))
        return false;
    return true;
  }

  double total_wealth() const noexcept {
    double w = originator_.wealth;
    for (const ReinsurerGroup& g : groups_)
      w += static_cast<double>(g.count) * g.agent.wealth;
    return w;
  }

 private:
  Agent originator_;
  std::vector<ReinsurerGroup> groups_;
};

/// Aggregate risk tolerance a with 1/a = sum_i 1/a_i over the originator and
/// every reinsurer. Requires an all-exponential pool.
inline double aggregate_tolerance(const Pool& p) {
  if (!p.all_exponential())
    throw std::invalid_argument("aggregate tolerance needs exponential agents");
  double inv = 1.0 / p.originator().utility.parameter();
  for (const ReinsurerGroup& g : p.groups())
    inv += static_cast<double>(g.count) / g.agent.utility.parameter();
  return 1.0 / inv;
}

namespace detail {

// Parses "a=<v>, w=<v>" style key lists into the provided slots.
inline void parse_key_values(std::string_view body, const std::string& where,
                             std::vector<std::pair<std::string_view, double*>> slots,
                             long long* count_slot = nullptr) {
  std::vector<bool> seen(slots.size(), false);
  bool count_seen = false;
  for (std::string_view item : split(body, ',')) {
    item = trim(item);
    if (item.empty()) throw ParseError(where + ": empty field");
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(where + ": expected key=value, got '" + std::string(item) + "'");
    const auto key = trim(item.substr(0, eq));
    const auto val = item.substr(eq + 1);
    if (count_slot != nullptr && key == "n") {
      *count_slot = parse_int(val, where);
      count_seen = true;
      continue;
    }
    bool matched = false;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (key == slots[i].first) {
        *slots[i].second = parse_double(val, where);
        seen[i] = matched = true;
        break;
      }
    }
    if (!matched) throw ParseError(where + ": unknown key '" + std::string(key) + "'");
  }
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!seen[i])
      throw ParseError(where + ": missing key '" + std::string(slots[i].first) + "'");
  if (count_slot != nullptr && !count_seen)
    throw ParseError(where + ": missing key 'n'");
}

}  // namespace detail

/// Pool config text. One `originator: a=<v>, w=<v>` line, then either a
/// homogeneous `reinsurers: n=<int>, a=<v>, w=<v>` line or repeated
/// `reinsurer: a=<v>, w=<v>` lines (or a mix). '#' comments allowed.
inline Pool parse_pool(std::istream& in, const std::string& source = "<input>") {
  bool have_originator = false;
  Agent originator{UtilitySpec::exponential(1.0), 0.0};
  std::vector<ReinsurerGroup> groups;
  std::string line;
  for (long long lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view body{line};
    if (const auto hash = body.find('#'); hash != std::string_view::npos)
      body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const std::string where = source + " line " + std::to_string(lineno);
    const auto colon = body.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(where + ": expected '<section>: key=value, ...'");
    const auto section = detail::trim(body.substr(0, colon));
    const auto rest = body.substr(colon + 1);
    double a = 0.0, w = 0.0;
    try {
      if (section == "originator") {
        if (have_originator) throw ParseError(where + ": duplicate originator line");
        detail::parse_key_values(rest, where, {{"a", &a}, {"w", &w}});
        originator = {UtilitySpec::exponential(a), w};
        have_originator = true;
      } else if (section == "reinsurer") {
        detail::parse_key_values(rest, where, {{"a", &a}, {"w", &w}});
        groups.push_back({{UtilitySpec::exponential(a), w}, 1});
      } else if (section == "reinsurers") {
        long long n = 0;
        detail::parse_key_values(rest, where, {{"a", &a}, {"w", &w}}, &n);
        if (n < 0) throw ParseError(where + ": n must be >= 0");
        if (n > 0) groups.push_back({{UtilitySpec::exponential(a), w}, n});
      } else {
        throw ParseError(where + ": unknown section '" + std::string(section) + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (!have_originator) throw ParseError(source + ": missing originator line");
  try {
    return {std::move(originator), std::move(groups)};
  } catch (const std::invalid_argument& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline Pool read_pool_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pool file '" + path + "'");
  return parse_pool(in, path);
}

}  // namespace borch
