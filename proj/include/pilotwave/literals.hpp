#pragma once

#include <cstddef>
#include <string_view>
#include <utility>

namespace pilotwave {

// Parses "0.5", "pi", "2pi", "2*pi", "pi/32", "3pi/4", "-pi/2", "1e-6".
// Multiples of pi are resolved as (a * pi) / b with a single rounding
// in each step. Throws ConfigError on anything else.
[[nodiscard]] double parse_real(std::string_view text);

// "400x400" or "400" (square).
[[nodiscard]] std::pair<std::size_t, std::size_t> parse_grid(std::string_view text);

}  // namespace pilotwave
