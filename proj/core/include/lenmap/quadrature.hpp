#pragma once

#include "lenmap/activation.hpp"

namespace lenmap {

/// Tolerances and budgets for Gaussian moments of an activation.
struct QuadratureSpec {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  /// Largest truncation point ever used; also the outer edge of the probe
  /// decade [max_truncation / 10, max_truncation] of the divergence test.
  double max_truncation = 40.0;
  /// Initial number of composite panels on [-a, a]; must be even so that
  /// z = 0 is a panel boundary.
  int panels = 256;
  /// Maximum tail mass of the unnormalized integrand outside [-a, a].
  double tail_beta = 1e-12;
  /// Refinement stops with NonConvergent beyond this many panels.
  int max_panels = 1 << 17;

  /// Throws std::invalid_argument unless rel_tol, abs_tol > 0,
  /// max_truncation >= 8, panels >= 64 (even), tail_beta in (0, 1e-6].
  void validate() const;
};

enum class MomentStatus { finite, diverged, nonconvergent };

std::string_view to_string(MomentStatus status);

/// E_{z ~ N(0,1)}[phi(sqrt(q) z)^2].
struct GaussianMoment {
  double value = 0.0;
  MomentStatus status = MomentStatus::finite;
  double truncation_used = 0.0;
  /// Refinement difference plus normalized tail mass. Not meaningful unless
  /// status is finite.
  double est_error = 0.0;
  double q = 0.0;

  bool finite() const { return status == MomentStatus::finite; }
};

struct TruncationPoint {
  double a = 0.0;
  /// False when the tail bound could not be met below max_truncation; `a` is
  /// then max_truncation.
  bool certified = true;
};

/// Smallest a (to about 1e-9) such that the numerically estimated two-sided
/// tail integral of phi(sqrt(q) z)^2 exp(-z^2/2) outside [-a, a] is at most
/// `beta`, for 16 values of q spread evenly over [r, s] (one value if r == s).
///
/// Throws DivergedError when the integrand does not decay in the probe decade
/// at some q, and std::invalid_argument unless 0 < r <= s and beta > 0.
TruncationPoint tail_truncation_point(const Activation& act, double r, double s, double beta,
                                      double max_truncation = QuadratureSpec{}.max_truncation);

/// E[phi(sqrt(q) z)^2] by composite 16-point Gauss-Legendre on [-a, a], with
/// a from tail_truncation_point and a panel boundary at 0. Panels double until
/// the refinement difference plus tail mass meets the tolerance.
///
/// Divergence is a status, not an exception: `diverged` when the integrand's
/// fitted z^2 exponent in the probe decade is >= 0 or partial sums exceed
/// 1e150; `nonconvergent` when the panel budget runs out.
///
/// Throws std::invalid_argument unless q > 0 and finite.
GaussianMoment gaussian_second_moment(const Activation& act, double q,
                                      const QuadratureSpec& spec = {});

/// The same functional truncated at a fixed [-a, a], without tail control.
/// Returns a diverged status only on overflow.
GaussianMoment truncated_second_moment(const Activation& act, double q, double a,
                                       const QuadratureSpec& spec = {});

/// Exact total-variation distance between N(0, sigma1^2) and N(0, sigma2^2).
/// Throws std::invalid_argument unless both are positive and finite.
double gaussian_tv_distance(double sigma1, double sigma2);

}  // namespace lenmap
