#pragma once

#include <cmath>
#include <numbers>

namespace lenmap {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail Q(x) = 1 - Phi(x), accurate far into the tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse of the standard normal CDF for p in (0, 1).
///
/// Wichura's algorithm AS 241 (PPND16), relative accuracy about 1e-16. Uses
/// only rational functions, `log` and `sqrt`, so results are reproducible on
/// any IEEE-754 platform with a correctly behaving libm.
double normal_quantile(double p);

}  // namespace lenmap
