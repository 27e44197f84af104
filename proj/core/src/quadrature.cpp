#include "lenmap/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lenmap/errors.hpp"
#include "lenmap/normal.hpp"

namespace lenmap {

namespace {

constexpr double kOverflowSentinel = 1e150;
constexpr int kGaussOrder = 16;
constexpr double kTailPanelWidth = 0.25;
// Fitted z^2 coefficients above this count as non-decaying. The slack only
// absorbs rounding at the exact boundary exp(z^2/2) * exp(-z^2/2).
constexpr double kExponentSlack = 1e-9;

struct GaussRule {
  std::array<double, kGaussOrder> nodes{};
  std::array<double, kGaussOrder> weights{};
};

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
const GaussRule& gauss_rule() {
  static const GaussRule rule = [] {
    GaussRule r;
    constexpr int n = kGaussOrder;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      r.nodes[static_cast<std::size_t>(i)] = x;
      r.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

// phi(sqrt(q) z)^2 exp(-z^2/2), formed in log space once phi is huge or the
// Gaussian factor is near underflow.
double integrand(const Activation& act, double sqrt_q, double z) {
  const double x = sqrt_q * z;
  if (z * z < 1200.0) {
    const double v = act(x);
    if (std::fabs(v) < kOverflowSentinel) return v * v * std::exp(-0.5 * z * z);
  }
  return std::exp(2.0 * act.log_abs(x) - 0.5 * z * z);
}

double panel_integral(const Activation& act, double sqrt_q, double lo, double hi) {
  const auto& rule = gauss_rule();
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (int i = 0; i < kGaussOrder; ++i) {
    const auto k = static_cast<std::size_t>(i);
    sum += rule.weights[k] * integrand(act, sqrt_q, mid + half * rule.nodes[k]);
  }
  return sum * half;
}

// Composite rule on [lo, hi] with `panels` equal panels.
double composite(const Activation& act, double sqrt_q, double lo, double hi, int panels) {
  const double width = (hi - lo) / panels;
  double sum = 0.0;
  double carry = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double b = p + 1 == panels ? hi : a + width;
    // Neumaier summation keeps the refinement difference meaningful.
    const double term = panel_integral(act, sqrt_q, a, b);
    const double t = sum + term;
    carry += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + carry;
}

// Least-squares slope of log f(z) against z^2 over the probe decade of one
// side. Returns -inf when f vanishes there.
double fitted_exponent(const Activation& act, double sqrt_q, double sign, double max_truncation) {
  constexpr int kPoints = 64;
  const double lo = max_truncation / 10.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (int k = 0; k < kPoints; ++k) {
    const double z = lo + (max_truncation - lo) * k / (kPoints - 1);
    const double g = 2.0 * act.log_abs(sign * sqrt_q * z) - 0.5 * z * z;
    if (!std::isfinite(g)) continue;
    const double x = z * z;
    sx += x;
    sy += g;
    sxx += x * x;
    sxy += x * g;
    ++count;
  }
  if (count < 2) return -std::numeric_limits<double>::infinity();
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

bool integrand_diverges(const Activation& act, double q, double max_truncation) {
  const double sqrt_q = std::sqrt(q);
  return fitted_exponent(act, sqrt_q, 1.0, max_truncation) >= -kExponentSlack ||
         fitted_exponent(act, sqrt_q, -1.0, max_truncation) >= -kExponentSlack;
}

double side_integral(const Activation& act, double sqrt_q, double lo, double hi) {
  return panel_integral(act, sqrt_q, lo, hi) + panel_integral(act, sqrt_q, -hi, -lo);
}

// Smallest a with two-sided tail mass <= beta at a single q.
double truncation_for(const Activation& act, double q, double beta, double max_truncation) {
  const double sqrt_q = std::sqrt(q);
  const double far = 2.0 * max_truncation;
  const int panels = static_cast<int>(std::ceil(far / kTailPanelWidth));
  std::vector<double> tail(static_cast<std::size_t>(panels) + 1, 0.0);
  std::vector<double> piece(static_cast<std::size_t>(panels), 0.0);
  for (int j = 0; j < panels; ++j) {
    const double mass = side_integral(act, sqrt_q, j * kTailPanelWidth, (j + 1) * kTailPanelWidth);
    if (!std::isfinite(mass) || mass > kOverflowSentinel) {
      throw DivergedError("tail integrand overflows at q = " + std::to_string(q));
    }
    piece[static_cast<std::size_t>(j)] = mass;
  }
  // A tail that still carries more mass far out than at mid-range is not
  // decaying.
  if (piece.back() > 0.0 && piece.back() >= piece[piece.size() / 2]) {
    throw DivergedError("tail mass does not decay at q = " + std::to_string(q));
  }
  for (int j = panels - 1; j >= 0; --j) {
    tail[static_cast<std::size_t>(j)] = tail[static_cast<std::size_t>(j) + 1] + piece[static_cast<std::size_t>(j)];
  }
  if (tail[0] <= beta) return 0.0;
  int j = 1;
  while (j <= panels && tail[static_cast<std::size_t>(j)] > beta) ++j;
  if (j > panels) return far;
  // Bisect inside panel [j-1, j]: tail(a) = mass on [a, z_j] + tail_j.
  double lo = (j - 1) * kTailPanelWidth;
  double hi = j * kTailPanelWidth;
  const double tail_hi = tail[static_cast<std::size_t>(j)];
  for (int iter = 0; iter < 40 && hi - lo > 1e-10; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double t = tail_hi + side_integral(act, sqrt_q, mid, j * kTailPanelWidth);
    (t > beta ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (!(rel_tol > 0.0 && abs_tol > 0.0)) throw std::invalid_argument("tolerances must be > 0");
  if (!(max_truncation >= 8.0 && std::isfinite(max_truncation))) {
    throw std::invalid_argument("max_truncation must be finite and >= 8");
  }
  if (panels < 64 || panels % 2 != 0) throw std::invalid_argument("panels must be even and >= 64");
  if (max_panels < panels) throw std::invalid_argument("max_panels must be >= panels");
  if (!(tail_beta > 0.0 && tail_beta <= 1e-6)) {
    throw std::invalid_argument("tail_beta must lie in (0, 1e-6]");
  }
}

std::string_view to_string(MomentStatus status) {
  switch (status) {
    case MomentStatus::finite: return "finite";
    case MomentStatus::diverged: return "diverged";
    case MomentStatus::nonconvergent: return "nonconvergent";
  }
  return "unknown";
}

TruncationPoint tail_truncation_point(const Activation& act, double r, double s, double beta,
                                      double max_truncation) {
  if (!(r > 0.0 && r <= s && std::isfinite(s))) {
    throw std::invalid_argument("tail_truncation_point needs finite 0 < r <= s");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("tail_truncation_point needs beta > 0");

  constexpr int kGrid = 16;
  const int count = r == s ? 1 : kGrid;
  double a = 0.0;
  for (int k = 0; k < count; ++k) {
    const double q = count == 1 ? r : (k + 1 == count ? s : r + (s - r) * k / (count - 1));
    if (integrand_diverges(act, q, max_truncation)) {
      throw DivergedError("integrand does not decay at q = " + std::to_string(q));
    }
    a = std::max(a, truncation_for(act, q, beta, max_truncation));
  }
  if (a > max_truncation) return {max_truncation, false};
  return {a, true};
}

GaussianMoment truncated_second_moment(const Activation& act, double q, double a,
                                       const QuadratureSpec& spec) {
  if (!(q > 0.0 && std::isfinite(q))) throw std::invalid_argument("q must be finite and > 0");
  if (!(a >= 0.0 && std::isfinite(a))) throw std::invalid_argument("a must be finite and >= 0");
  spec.validate();

  GaussianMoment result;
  result.q = q;
  result.truncation_used = a;
  if (act.is_zero_ae() || a == 0.0) return result;

  const double sqrt_q = std::sqrt(q);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int panels = spec.panels; panels <= spec.max_panels; panels *= 2) {
    const int half = panels / 2;
    const double current =
        norm * (composite(act, sqrt_q, -a, 0.0, half) + composite(act, sqrt_q, 0.0, a, half));
    if (!std::isfinite(current) || current > kOverflowSentinel) {
      result.status = MomentStatus::diverged;
      result.value = std::numeric_limits<double>::infinity();
      return result;
    }
    if (!std::isnan(previous)) {
      const double diff = std::fabs(current - previous);
      if (diff <= std::max(spec.abs_tol, spec.rel_tol * current)) {
        result.value = current;
        result.est_error = diff;
        return result;
      }
    }
    previous = current;
  }
  result.status = MomentStatus::nonconvergent;
  result.value = previous;
  return result;
}

GaussianMoment gaussian_second_moment(const Activation& act, double q, const QuadratureSpec& spec) {
  if (!(q > 0.0 && std::isfinite(q))) throw std::invalid_argument("q must be finite and > 0");
  spec.validate();

  GaussianMoment result;
  result.q = q;
  if (act.is_zero_ae()) return result;

  if (integrand_diverges(act, q, spec.max_truncation)) {
    result.status = MomentStatus::diverged;
    result.value = std::numeric_limits<double>::infinity();
    return result;
  }
  TruncationPoint cut;
  try {
    cut = tail_truncation_point(act, q, q, spec.tail_beta, spec.max_truncation);
  } catch (const DivergedError&) {
    result.status = MomentStatus::diverged;
    result.value = std::numeric_limits<double>::infinity();
    return result;
  }

  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double tail_error = cut.certified ? norm * spec.tail_beta : 0.0;
  QuadratureSpec inner = spec;
  // Leave room in the budget for the tail mass outside [-a, a].
  inner.abs_tol = std::max(spec.abs_tol - tail_error, 0.25 * spec.abs_tol);
  result = truncated_second_moment(act, q, cut.a, inner);
  if (!cut.certified && result.status == MomentStatus::finite) {
    result.status = MomentStatus::nonconvergent;
  }
  result.est_error += tail_error;
  return result;
}

double gaussian_tv_distance(double sigma1, double sigma2) {
  if (!(sigma1 > 0.0 && sigma2 > 0.0 && std::isfinite(sigma1) && std::isfinite(sigma2))) {
    throw std::invalid_argument("gaussian_tv_distance needs positive finite sigmas");
  }
  double lo = std::min(sigma1, sigma2);
  double hi = std::max(sigma1, sigma2);
  if (lo == hi) return 0.0;
  // Densities cross at +-x*, x*^2 = 2 lo^2 hi^2 ln(hi/lo) / (hi^2 - lo^2).
  // The narrower density dominates inside; TV = P_lo(|X| < x*) - P_hi(|X| < x*).
  const double ratio = hi / lo;
  const double crossing = lo * hi * std::sqrt(2.0 * std::log(ratio) / ((hi - lo) * (hi + lo)));
  const double a = crossing / (lo * std::numbers::sqrt2);
  const double b = crossing / (hi * std::numbers::sqrt2);
  // erf(a) - erf(b) written through erfc to keep precision when a is large.
  return std::erfc(b) - std::erfc(a);
}

}  // namespace lenmap
