#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace lenmap {

/// Coarse growth class of an activation, for display only. Nothing in the
/// library branches on it.
enum class GrowthHint { bounded, polynomial, subgaussian_exponential, gaussian_or_faster, singular };

std::string_view to_string(GrowthHint hint);

enum class ActivationKind { zero, identity, relu, heaviside, tanh, reciprocal, exp_square };

/// A scalar activation function phi, optionally precomposed with a scaling of
/// its argument: phi_c(z) = phi(c * z).
///
/// Values are immutable. Singular points are patched so `operator()` is total:
///   - reciprocal(0) = 0, and 1/z saturates at +-DBL_MAX for subnormal z;
///   - heaviside(0) = 0 (indicator of z > 0);
///   - exp_square saturates at DBL_MAX instead of overflowing to inf. Use
///     `log_abs` when the true magnitude matters.
class Activation {
 public:
  static Activation zero();
  static Activation identity();
  static Activation relu();
  static Activation heaviside();
  static Activation tanh();
  static Activation reciprocal();
  static Activation exp_square(double alpha);

  /// Parses `relu`, `heaviside`, `tanh`, `identity`, `reciprocal`, `zero`,
  /// `exp_square:<alpha>`, each optionally prefixed by one or more
  /// `scale:<c>:`. Throws std::invalid_argument on anything else.
  static Activation parse(std::string_view text);

  /// phi(z * c).
  Activation scaled(double c) const;

  double operator()(double z) const;

  /// log|phi(z)|, computed without forming phi(z) where that would overflow.
  /// Returns -inf where phi(z) = 0.
  double log_abs(double z) const;

  ActivationKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double scale() const { return scale_; }
  GrowthHint growth_hint() const;

  /// Canonical name, re-parseable by `parse`.
  std::string name() const;

  /// True for activations that vanish almost everywhere.
  bool is_zero_ae() const { return kind_ == ActivationKind::zero || scale_ == 0.0; }

  friend bool operator==(const Activation&, const Activation&) = default;

 private:
  Activation(ActivationKind kind, double alpha, double scale)
      : kind_(kind), alpha_(alpha), scale_(scale) {}

  double eval_base(double x) const;
  double log_abs_base(double x) const;

  ActivationKind kind_;
  double alpha_;
  double scale_;
};

enum class PermissibilityVerdict { permissible_evidence, violates_boundedness, violates_growth, inconclusive };

std::string_view to_string(PermissibilityVerdict verdict);

/// Logarithmic probe grid over |x| in [min_abs, max_abs], both signs.
struct ProbeGrid {
  double min_abs = 1e-6;
  double max_abs = 1e3;
  int points_per_sign = 4096;
  /// |phi(x)| above this on any probed point counts as unbounded.
  double bound_cap = 1e300;
  /// Growth exponents above this on the outermost decade count as too fast.
  double growth_threshold = 1e-2;
};

struct PermissibilityReport {
  bool interval_bounded = true;
  /// max over the outermost decade of log|phi(x)| / x^2, clipped below at 0.
  double growth_exponent_estimate = 0.0;
  PermissibilityVerdict verdict = PermissibilityVerdict::inconclusive;
  double probe_lo = 0.0;
  double probe_hi = 0.0;
  /// Largest |phi(x)| seen, and where.
  double max_abs_value = 0.0;
  double max_abs_at = 0.0;
  std::string notes;
};

/// Numerical evidence for the two analytic permissibility conditions:
/// boundedness on finite intervals and |phi(x)| <= exp(o(x^2)). The verdict
/// is heuristic; it cannot prove either condition, and measurability is
/// never checked.
///
/// Throws std::invalid_argument if the grid is not finite, 0 < min < max, or
/// has fewer than 500 points per sign (1000 total).
PermissibilityReport audit_permissibility(const Activation& act, const ProbeGrid& grid = {});

}  // namespace lenmap
