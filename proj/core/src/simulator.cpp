#include "lenmap/simulator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lenmap/errors.hpp"
#include "lenmap/random.hpp"

namespace lenmap {

namespace {

constexpr double kOverflowSentinel = 1e150;
constexpr std::uint64_t kCounterLimit = std::uint64_t{1} << 32;

// Fixed-order dot product with eight partial sums.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[j + k] * b[j + k];
  }
  double sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; j < n; ++j) sum += a[j] * b[j];
  return sum;
}

// Neumaier-compensated mean of squares.
double mean_square(const std::vector<double>& v) {
  double sum = 0.0;
  double carry = 0.0;
  for (const double x : v) {
    const double term = x * x;
    const double t = sum + term;
    carry += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return (sum + carry) / static_cast<double>(v.size());
}

bool out_of_range(double x) { return !(std::fabs(x) <= kOverflowSentinel); }

}  // namespace

std::vector<double> make_input(const InputSpec& spec, std::size_t width) {
  std::vector<double> x(width, 1.0);
  switch (spec.pattern) {
    case InputPattern::all_ones: break;
    case InputPattern::alternating:
      for (std::size_t j = 1; j < width; j += 2) x[j] = -1.0;
      break;
    case InputPattern::random_signs: {
      CounterStream stream(key_from_seed(spec.seed), StreamId{0, 0, 0});
      for (auto& v : x) v = stream.uniform() < 0.5 ? -1.0 : 1.0;
      break;
    }
  }
  return x;
}

void NetworkConfig::validate() const {
  if (width < 1 || depth < 1) throw std::invalid_argument("width and depth must be >= 1");
  // Row index and layer index each occupy one 32-bit counter word; a row
  // stream holds width + 1 values.
  if (width >= kCounterLimit - 1 || depth >= kCounterLimit) {
    throw std::invalid_argument("width or depth too large");
  }
  if (!(sigma_w >= 0.0 && sigma_b >= 0.0 && std::isfinite(sigma_w) && std::isfinite(sigma_b))) {
    throw std::invalid_argument("sigma_w and sigma_b must be finite and >= 0");
  }
}

LayerObservables forward_once(const NetworkConfig& cfg, std::uint64_t trial_index,
                              const CaptureSpec& capture) {
  cfg.validate();
  if (trial_index >= kCounterLimit) throw std::invalid_argument("trial index must be < 2^32");
  if (capture.layer > cfg.depth) throw std::invalid_argument("capture layer exceeds depth");
  for (const auto unit : capture.units) {
    if (unit >= cfg.width) throw std::invalid_argument("capture unit exceeds width");
  }

  const std::size_t n = cfg.width;
  const PhiloxKey key = key_from_seed(cfg.master_seed);
  const double weight_scale = cfg.sigma_w / std::sqrt(static_cast<double>(n));
  const auto trial = static_cast<std::uint32_t>(trial_index);

  LayerObservables obs;
  obs.q.assign(cfg.depth + 1, 0.0);
  obs.r.assign(cfg.depth + 1, 0.0);
  obs.q[0] = 1.0;
  obs.r[0] = 1.0;

  std::vector<double> x = make_input(cfg.input, n);
  std::vector<double> h(n);
  std::vector<double> row(n + 1);

  for (std::size_t layer = 1; layer <= cfg.depth; ++layer) {
    const auto layer_id = static_cast<std::uint32_t>(layer);
    if (layer == cfg.depth && layer == capture.layer && capture.captured_rows_only &&
        !capture.units.empty()) {
      for (const auto unit : capture.units) {
        fill_normals(key, StreamId{static_cast<std::uint32_t>(unit), layer_id, trial}, row);
        const double pre = weight_scale * dot(row.data(), x.data(), n) + cfg.sigma_b * row[n];
        if (out_of_range(pre)) {
          throw OverflowError(layer, "pre-activation out of range in layer " + std::to_string(layer));
        }
        obs.captured.push_back(pre);
      }
      obs.q[layer] = std::numeric_limits<double>::quiet_NaN();
      obs.r[layer] = std::numeric_limits<double>::quiet_NaN();
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      fill_normals(key, StreamId{static_cast<std::uint32_t>(i), layer_id, trial}, row);
      const double pre = weight_scale * dot(row.data(), x.data(), n) + cfg.sigma_b * row[n];
      if (out_of_range(pre)) {
        throw OverflowError(layer, "pre-activation out of range in layer " + std::to_string(layer));
      }
      h[i] = pre;
    }
    obs.q[layer] = mean_square(h);

    if (layer == capture.layer) {
      if (capture.units.empty()) {
        obs.captured = h;
      } else {
        obs.captured.reserve(capture.units.size());
        for (const auto unit : capture.units) obs.captured.push_back(h[unit]);
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double act = cfg.activation(h[i]);
      if (out_of_range(act)) {
        throw OverflowError(layer, "activation out of range in layer " + std::to_string(layer));
      }
      x[i] = act;
    }
    obs.r[layer] = mean_square(x);
    if (out_of_range(obs.q[layer]) || out_of_range(obs.r[layer])) {
      throw OverflowError(layer, "layer length out of range in layer " + std::to_string(layer));
    }
  }
  return obs;
}

}  // namespace lenmap
