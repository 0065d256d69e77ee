#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace tp::detail {

// Shortest round-trip decimal; non-finite values spelled inf, -inf, nan.
inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void put_number(std::ostream& os, double v) { os << fmt_double(v); }

}  // namespace tp::detail
