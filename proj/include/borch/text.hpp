// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "borch/errors.hpp"

namespace borch {

/// Formats a double with 17 significant digits, enough for a lossless
/// text round trip of any 64-bit value.
inline std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

inline double parse_double(std::string_view token, const std::string& where) {
  const std::string t{trim(token)};
  if (t.empty()) throw ParseError(where + ": missing number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ParseError(where + ": not a number: '" + t + "'");
  return v;
}

inline long long parse_int(std::string_view token, const std::string& where) {
  const std::string t{trim(token)};
  if (t.empty()) throw ParseError(where + ": missing integer");
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw ParseError(where + ": not an integer: '" + t + "'");
  return v;
}

}  // namespace detail
}  // namespace borch
