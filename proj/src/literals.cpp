#include "pilotwave/literals.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "pilotwave/errors.hpp"

namespace pilotwave {

namespace {

double to_number(std::string_view s, std::string_view whole) {
  double v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw ConfigError("cannot parse number '" + std::string(whole) + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

double parse_real(std::string_view text) {
  std::string_view s = trim(text);
  double sign = 1.0;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    if (s.front() == '-') sign = -1.0;
    s.remove_prefix(1);
  }
  const auto pi_at = s.find("pi");
  if (pi_at == std::string_view::npos) return sign * to_number(s, text);

  std::string_view coef = s.substr(0, pi_at);
  std::string_view rest = s.substr(pi_at + 2);
  if (!coef.empty() && coef.back() == '*') coef.remove_suffix(1);
  double numerator = std::numbers::pi;
  if (!coef.empty()) numerator = to_number(coef, text) * std::numbers::pi;
  if (rest.empty()) return sign * numerator;
  if (rest.front() != '/') throw ConfigError("cannot parse '" + std::string(text) + "'");
  const double denom = to_number(rest.substr(1), text);
  if (denom == 0.0) throw ConfigError("division by zero in '" + std::string(text) + "'");
  return sign * (numerator / denom);
}

std::pair<std::size_t, std::size_t> parse_grid(std::string_view text) {
  const std::string_view s = trim(text);
  auto parse_dim = [&](std::string_view d) -> std::size_t {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), v);
    if (d.empty() || ec != std::errc() || ptr != d.data() + d.size() || v == 0)
      throw ConfigError("cannot parse grid '" + std::string(text) + "'");
    return v;
  };
  const auto x = s.find_first_of("xX");
  if (x == std::string_view::npos) {
    const std::size_t n = parse_dim(s);
    return {n, n};
  }
  return {parse_dim(s.substr(0, x)), parse_dim(s.substr(x + 1))};
}

}  // namespace pilotwave
