#include "lenmap/activation.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lenmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw std::invalid_argument("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::string format_number(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

}  // namespace

std::string_view to_string(GrowthHint hint) {
  switch (hint) {
    case GrowthHint::bounded: return "bounded";
    case GrowthHint::polynomial: return "polynomial";
    case GrowthHint::subgaussian_exponential: return "subgaussian-exponential";
    case GrowthHint::gaussian_or_faster: return "gaussian-or-faster";
    case GrowthHint::singular: return "singular";
  }
  return "unknown";
}

std::string_view to_string(PermissibilityVerdict verdict) {
  switch (verdict) {
    case PermissibilityVerdict::permissible_evidence: return "permissible-evidence";
    case PermissibilityVerdict::violates_boundedness: return "violates-boundedness";
    case PermissibilityVerdict::violates_growth: return "violates-growth";
    case PermissibilityVerdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

Activation Activation::zero() { return {ActivationKind::zero, 0.0, 1.0}; }
Activation Activation::identity() { return {ActivationKind::identity, 0.0, 1.0}; }
Activation Activation::relu() { return {ActivationKind::relu, 0.0, 1.0}; }
Activation Activation::heaviside() { return {ActivationKind::heaviside, 0.0, 1.0}; }
Activation Activation::tanh() { return {ActivationKind::tanh, 0.0, 1.0}; }
Activation Activation::reciprocal() { return {ActivationKind::reciprocal, 0.0, 1.0}; }

Activation Activation::exp_square(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("exp_square requires a finite alpha > 0");
  }
  return {ActivationKind::exp_square, alpha, 1.0};
}

Activation Activation::scaled(double c) const {
  if (!std::isfinite(c)) throw std::invalid_argument("scale factor must be finite");
  return {kind_, alpha_, scale_ * c};
}

Activation Activation::parse(std::string_view text) {
  double scale = 1.0;
  constexpr std::string_view kScale = "scale:";
  while (text.starts_with(kScale)) {
    text.remove_prefix(kScale.size());
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("scale prefix must look like scale:<c>:<activation>");
    }
    scale *= parse_number(text.substr(0, colon), "scale factor");
    text.remove_prefix(colon + 1);
  }

  Activation base = [&] {
    if (text == "relu") return relu();
    if (text == "heaviside") return heaviside();
    if (text == "tanh") return tanh();
    if (text == "identity") return identity();
    if (text == "reciprocal") return reciprocal();
    if (text == "zero") return zero();
    constexpr std::string_view kExp = "exp_square:";
    if (text.starts_with(kExp)) return exp_square(parse_number(text.substr(kExp.size()), "alpha"));
    throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
  }();
  return base.scaled(scale);
}

std::string Activation::name() const {
  std::string base;
  switch (kind_) {
    case ActivationKind::zero: base = "zero"; break;
    case ActivationKind::identity: base = "identity"; break;
    case ActivationKind::relu: base = "relu"; break;
    case ActivationKind::heaviside: base = "heaviside"; break;
    case ActivationKind::tanh: base = "tanh"; break;
    case ActivationKind::reciprocal: base = "reciprocal"; break;
    case ActivationKind::exp_square: base = "exp_square:" + format_number(alpha_); break;
  }
  if (scale_ == 1.0) return base;
  return "scale:" + format_number(scale_) + ":" + base;
}

GrowthHint Activation::growth_hint() const {
  switch (kind_) {
    case ActivationKind::zero:
    case ActivationKind::heaviside:
    case ActivationKind::tanh: return GrowthHint::bounded;
    case ActivationKind::identity:
    case ActivationKind::relu: return GrowthHint::polynomial;
    case ActivationKind::reciprocal: return GrowthHint::singular;
    case ActivationKind::exp_square: return GrowthHint::gaussian_or_faster;
  }
  return GrowthHint::bounded;
}

double Activation::eval_base(double x) const {
  switch (kind_) {
    case ActivationKind::zero: return 0.0;
    case ActivationKind::identity: return x;
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::heaviside: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::reciprocal: {
      if (x == 0.0) return 0.0;
      const double v = 1.0 / x;
      return std::isinf(v) ? std::copysign(std::numeric_limits<double>::max(), x) : v;
    }
    case ActivationKind::exp_square: {
      const double e = alpha_ * x * x;
      return e < std::log(std::numeric_limits<double>::max()) ? std::exp(e)
                                                              : std::numeric_limits<double>::max();
    }
  }
  return 0.0;
}

double Activation::log_abs_base(double x) const {
  switch (kind_) {
    case ActivationKind::zero: return -kInf;
    case ActivationKind::identity: return x != 0.0 ? std::log(std::fabs(x)) : -kInf;
    case ActivationKind::relu: return x > 0.0 ? std::log(x) : -kInf;
    case ActivationKind::heaviside: return x > 0.0 ? 0.0 : -kInf;
    case ActivationKind::tanh: return x != 0.0 ? std::log(std::fabs(std::tanh(x))) : -kInf;
    case ActivationKind::reciprocal: return x != 0.0 ? -std::log(std::fabs(x)) : -kInf;
    case ActivationKind::exp_square: return alpha_ * x * x;
  }
  return -kInf;
}

double Activation::operator()(double z) const { return eval_base(scale_ * z); }

double Activation::log_abs(double z) const { return log_abs_base(scale_ * z); }

PermissibilityReport audit_permissibility(const Activation& act, const ProbeGrid& grid) {
  if (!(std::isfinite(grid.min_abs) && std::isfinite(grid.max_abs) && grid.min_abs > 0.0 &&
        grid.min_abs < grid.max_abs)) {
    throw std::invalid_argument("probe grid needs finite 0 < min_abs < max_abs");
  }
  if (grid.points_per_sign < 500) {
    throw std::invalid_argument("probe grid needs at least 500 points per sign");
  }

  PermissibilityReport report;
  report.probe_lo = -grid.max_abs;
  report.probe_hi = grid.max_abs;
  const double log_cap = std::log(grid.bound_cap);
  const int n = grid.points_per_sign;
  const double log_ratio = std::log(grid.max_abs / grid.min_abs);
  const double outer_decade = grid.max_abs / 10.0;

  std::vector<double> magnitudes(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    magnitudes[static_cast<std::size_t>(k)] =
        k == n - 1 ? grid.max_abs : grid.min_abs * std::exp(log_ratio * k / (n - 1));
  }

  bool saw_nan = false;
  double max_log = -kInf;
  auto probe = [&](double x) {
    const double l = act.log_abs(x);
    if (std::isnan(l) || std::isnan(act(x))) {
      saw_nan = true;
      return l;
    }
    if (l > max_log) {
      max_log = l;
      report.max_abs_at = x;
    }
    if (l > log_cap) report.interval_bounded = false;
    return l;
  };

  std::string chase_note;
  for (const double sign : {-1.0, 1.0}) {
    std::vector<double> logs(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double x = sign * magnitudes[static_cast<std::size_t>(k)];
      const double l = probe(x);
      logs[static_cast<std::size_t>(k)] = l;
      if (std::fabs(x) >= outer_decade && std::isfinite(l)) {
        report.growth_exponent_estimate = std::max(report.growth_exponent_estimate, l / (x * x));
      }
    }
    // If |phi| keeps rising all the way into the origin, follow it toward the
    // smallest normal double: the cap is only reachable that way.
    bool rising = true;
    for (int k = 0; k + 1 < n && magnitudes[static_cast<std::size_t>(k)] <= 10.0 * grid.min_abs;
         ++k) {
      const auto i = static_cast<std::size_t>(k);
      if (!(logs[i] > logs[i + 1])) {
        rising = false;
        break;
      }
    }
    if (rising && report.interval_bounded) {
      for (double m = grid.min_abs / 10.0; m >= std::numeric_limits<double>::min(); m /= 10.0) {
        probe(sign * m);
        if (!report.interval_bounded) {
          chase_note = "|phi| rises without bound toward 0; exceeded the cap at |x| = " +
                       format_number(m) + ". ";
          break;
        }
      }
    }
  }
  report.max_abs_value = std::exp(max_log);

  report.notes = chase_note +
                 "Numerical evidence only: a finite probe cannot prove boundedness or "
                 "exp(o(x^2)) growth, and measurability is not checked.";
  if (saw_nan) {
    report.verdict = PermissibilityVerdict::inconclusive;
    report.notes += " The activation produced NaN on the probe grid.";
  } else if (report.growth_exponent_estimate > grid.growth_threshold) {
    report.verdict = PermissibilityVerdict::violates_growth;
  } else if (!report.interval_bounded) {
    report.verdict = PermissibilityVerdict::violates_boundedness;
  } else if (grid.max_abs < 10.0) {
    report.verdict = PermissibilityVerdict::inconclusive;
    report.notes += " The probe does not reach |x| >= 10, so growth is not assessed.";
  } else {
    report.verdict = PermissibilityVerdict::permissible_evidence;
  }
  return report;
}

}  // namespace lenmap
