#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lenmap/activation.hpp"
#include "lenmap/quadrature.hpp"

namespace lenmap {

enum class LayerStatus {
  finite,
  /// The Gaussian moment defining this layer does not exist; all later layers
  /// inherit the status.
  diverged,
  /// Quadrature could not meet its tolerance; all later layers inherit it.
  unresolved,
};

std::string_view to_string(LayerStatus status);

/// The deterministic wide-network length map
///   qtilde_0 = tr_0 = 1,
///   qtilde_l = sigma_w^2 tr_{l-1} + sigma_b^2,
///   tr_l     = E_{z ~ N(0,1)}[phi(sqrt(qtilde_l) z)^2].
/// Entries that are undefined hold NaN.
struct LengthMap {
  std::vector<double> qtilde;
  std::vector<double> trtilde;
  std::vector<LayerStatus> status;
  double sigma_w = 0.0;
  double sigma_b = 0.0;
  std::size_t depth = 0;

  bool all_finite() const;
  /// First layer whose status is not finite, if any.
  std::optional<std::size_t> first_nonfinite() const;
};

/// Throws std::invalid_argument unless sigma_w, sigma_b >= 0 and depth >= 1.
LengthMap compute_length_map(const Activation& act, double sigma_w, double sigma_b,
                             std::size_t depth, const QuadratureSpec& spec = {});

/// One step of the map: sigma_w^2 tr + sigma_b^2, then tr of that q.
/// qtilde == 0 is the point mass at zero, so tr = phi(0)^2.
GaussianMoment length_map_step(const Activation& act, double qtilde, const QuadratureSpec& spec);

/// Picard iteration of the map starting from the layer-0 convention tr_0 = 1
/// (so the first iterate is sigma_w^2 + sigma_b^2). Returns q* once
/// |q* - map(q*)| <= tol; nothing if max_iter is exhausted or the iterates
/// exceed 1e100.
///
/// Throws DivergedError if a moment along the way diverges or cannot be
/// resolved, std::invalid_argument unless sigma_w > 0, sigma_b >= 0, tol > 0.
std::optional<double> length_map_fixed_point(const Activation& act, double sigma_w,
                                             double sigma_b, double tol, int max_iter,
                                             const QuadratureSpec& spec = {});

}  // namespace lenmap
