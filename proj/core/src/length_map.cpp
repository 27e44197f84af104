#include "lenmap/length_map.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lenmap/errors.hpp"

namespace lenmap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kIterateCap = 1e100;

}  // namespace

std::string_view to_string(LayerStatus status) {
  switch (status) {
    case LayerStatus::finite: return "finite";
    case LayerStatus::diverged: return "diverged";
    case LayerStatus::unresolved: return "unresolved";
  }
  return "unknown";
}

bool LengthMap::all_finite() const { return !first_nonfinite().has_value(); }

std::optional<std::size_t> LengthMap::first_nonfinite() const {
  for (std::size_t l = 0; l < status.size(); ++l) {
    if (status[l] != LayerStatus::finite) return l;
  }
  return std::nullopt;
}

GaussianMoment length_map_step(const Activation& act, double qtilde, const QuadratureSpec& spec) {
  if (qtilde == 0.0) {
    const double at_zero = act(0.0);
    GaussianMoment m;
    m.value = at_zero * at_zero;
    return m;
  }
  return gaussian_second_moment(act, qtilde, spec);
}

LengthMap compute_length_map(const Activation& act, double sigma_w, double sigma_b,
                             std::size_t depth, const QuadratureSpec& spec) {
  if (!(sigma_w >= 0.0 && sigma_b >= 0.0 && std::isfinite(sigma_w) && std::isfinite(sigma_b))) {
    throw std::invalid_argument("sigma_w and sigma_b must be finite and >= 0");
  }
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  spec.validate();

  LengthMap map;
  map.sigma_w = sigma_w;
  map.sigma_b = sigma_b;
  map.depth = depth;
  map.qtilde.assign(depth + 1, kNaN);
  map.trtilde.assign(depth + 1, kNaN);
  map.status.assign(depth + 1, LayerStatus::finite);
  map.qtilde[0] = 1.0;
  map.trtilde[0] = 1.0;

  const double var_w = sigma_w * sigma_w;
  const double var_b = sigma_b * sigma_b;
  for (std::size_t l = 1; l <= depth; ++l) {
    if (map.status[l - 1] != LayerStatus::finite) {
      map.status[l] = map.status[l - 1];
      continue;
    }
    map.qtilde[l] = var_w * map.trtilde[l - 1] + var_b;
    const GaussianMoment m = length_map_step(act, map.qtilde[l], spec);
    switch (m.status) {
      case MomentStatus::finite: map.trtilde[l] = m.value; break;
      case MomentStatus::diverged: map.status[l] = LayerStatus::diverged; break;
      case MomentStatus::nonconvergent: map.status[l] = LayerStatus::unresolved; break;
    }
  }
  return map;
}

std::optional<double> length_map_fixed_point(const Activation& act, double sigma_w,
                                             double sigma_b, double tol, int max_iter,
                                             const QuadratureSpec& spec) {
  if (!(sigma_w > 0.0 && sigma_b >= 0.0)) {
    throw std::invalid_argument("fixed point needs sigma_w > 0 and sigma_b >= 0");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");

  const double var_w = sigma_w * sigma_w;
  const double var_b = sigma_b * sigma_b;
  double q = var_w * 1.0 + var_b;
  for (int iter = 0; iter < max_iter; ++iter) {
    const GaussianMoment m = length_map_step(act, q, spec);
    if (!m.finite()) {
      throw DivergedError("moment " + std::string(to_string(m.status)) + " at q = " +
                          std::to_string(q));
    }
    const double next = var_w * m.value + var_b;
    if (std::fabs(next - q) <= tol) return q;
    if (!(std::fabs(next) <= kIterateCap)) return std::nullopt;
    q = next;
  }
  return std::nullopt;
}

}  // namespace lenmap
