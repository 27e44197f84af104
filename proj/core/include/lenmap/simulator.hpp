#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lenmap/activation.hpp"
#include "lenmap/histogram.hpp"

namespace lenmap {

enum class InputPattern { all_ones, alternating, random_signs };

/// How x_0 in {-1, 1}^N is chosen.
struct InputSpec {
  InputPattern pattern = InputPattern::all_ones;
  /// Only used by random_signs.
  std::uint64_t seed = 0;
};

std::vector<double> make_input(const InputSpec& spec, std::size_t width);

/// A fully connected width-N, depth-D network with W entries ~ N(0, sigma_w^2/N)
/// and b entries ~ N(0, sigma_b^2). `sigma_w`, `sigma_b` are standard deviations.
struct NetworkConfig {
  std::size_t width = 1;
  std::size_t depth = 1;
  double sigma_w = 1.0;
  double sigma_b = 0.0;
  InputSpec input;
  Activation activation = Activation::relu();
  std::uint64_t master_seed = 0;

  /// Throws std::invalid_argument on width or depth 0, negative or non-finite
  /// sigmas, or width / depth too large for the 32-bit stream counters.
  void validate() const;
};

/// Which pre-activations to record from each trial.
struct CaptureSpec {
  /// Layer 1..D; 0 disables capture.
  std::size_t layer = 0;
  /// 0-based unit indices, in output order. Empty means every unit.
  std::vector<std::size_t> units;
  /// Upper bound on values kept in an ensemble's sample reservoir.
  std::size_t max_samples = std::numeric_limits<std::size_t>::max();
  /// When capturing listed units of the last layer, compute only those rows.
  /// q and r of that layer are then NaN.
  bool captured_rows_only = false;

  bool enabled() const { return layer != 0; }
  std::size_t units_per_trial(std::size_t width) const {
    return !enabled() ? 0 : units.empty() ? width : units.size();
  }
};

/// One draw of the length process.
struct LayerObservables {
  /// q[l] = mean of h_{l,i}^2, with q[0] = 1.
  std::vector<double> q;
  /// r[l] = mean of x_{l,i}^2, with r[0] = 1.
  std::vector<double> r;
  /// h_{layer, unit} for the captured units, in CaptureSpec order.
  std::vector<double> captured;
};

/// Runs one random network forward on x_0.
///
/// Weight row i of layer l in trial t is the stream (i, l, t) under the key
/// derived from master_seed: elements 0..N-1 are the standardized weights and
/// element N the standardized bias. Nothing larger than O(N) is stored, and the
/// output depends only on (cfg, trial_index, capture).
///
/// Throws OverflowError when some |h| or |x| exceeds 1e150 (or is NaN), and
/// std::invalid_argument on an invalid cfg / capture or trial_index >= 2^32.
LayerObservables forward_once(const NetworkConfig& cfg, std::uint64_t trial_index,
                              const CaptureSpec& capture = {});

/// Running mean / variance (Welford), mergeable with Chan's update.
class RunningMoments {
 public:
  void add(double x);
  void merge(const RunningMoments& other);

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const;

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Per-trial length trajectory, kept when EnsembleOptions::keep_trials is set.
struct TrialRecord {
  std::uint64_t trial = 0;
  std::vector<double> q;
  std::vector<double> r;
  /// Layer that overflowed, if the trial did not complete.
  std::optional<std::size_t> overflow_layer;
};

struct EnsembleOptions {
  CaptureSpec capture;
  /// Histogram of every captured value.
  std::optional<HistogramSpec> histogram;
  bool keep_trials = false;
  /// 0 picks LENMAP_WORKERS or the hardware concurrency.
  unsigned workers = 0;
};

/// Mergeable cross-trial accumulators.
struct EnsembleStats {
  /// Completed trials (overflowed ones are counted separately).
  std::uint64_t trial_count = 0;
  std::uint64_t overflow_count = 0;
  std::vector<RunningMoments> q;
  std::vector<RunningMoments> r;
  std::optional<Histogram> histogram;

  /// Captured values of whole trials, ordered by trial index; `stride` values
  /// per trial. Holds the earliest trials that fit in `reservoir_limit`.
  std::size_t stride = 0;
  std::size_t reservoir_limit = 0;
  std::vector<std::uint64_t> reservoir_trials;
  std::vector<double> reservoir;

  std::vector<TrialRecord> trials;

  static EnsembleStats empty(std::size_t depth, const EnsembleOptions& options,
                             std::size_t width);

  void add(std::uint64_t trial, const LayerObservables& obs, bool keep_trial);
  void add_overflow(std::uint64_t trial, std::size_t layer, bool keep_trial);
  /// Order-independent combination (up to floating-point reassociation of the
  /// moments).
  void merge(const EnsembleStats& other);

  /// Values of captured unit `k` (position in the capture list) across trials.
  std::vector<double> captured_column(std::size_t k) const;
};

/// Worker count: `requested` if nonzero, else LENMAP_WORKERS if set and valid,
/// else the hardware concurrency (at least 1).
unsigned resolve_workers(unsigned requested);

/// Runs trials 0..trials-1 and aggregates them. Trials are grouped into fixed
/// chunks that are merged in chunk order, so results do not depend on the
/// number of workers. Overflowing trials are counted, not fatal.
EnsembleStats simulate_ensemble(const NetworkConfig& cfg, std::uint64_t trials,
                                const EnsembleOptions& options = {});

}  // namespace lenmap
