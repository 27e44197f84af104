#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "lenmap/errors.hpp"
#include "lenmap/simulator.hpp"

namespace lenmap {

namespace {

// Trials per work unit. Fixed so the merge tree is the same for any worker
// count.
constexpr std::uint64_t kChunkTrials = 16;

}  // namespace

void RunningMoments::add(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const auto n_a = static_cast<double>(count_);
  const auto n_b = static_cast<double>(other.count_);
  const double n = n_a + n_b;
  const double delta = other.mean_ - mean_;
  mean_ = (n_a * mean_ + n_b * other.mean_) / n;
  m2_ += other.m2_ + delta * delta * n_a * n_b / n;
  count_ += other.count_;
}

double RunningMoments::variance() const {
  return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
}

EnsembleStats EnsembleStats::empty(std::size_t depth, const EnsembleOptions& options,
                                   std::size_t width) {
  EnsembleStats stats;
  stats.q.resize(depth + 1);
  stats.r.resize(depth + 1);
  if (options.histogram) stats.histogram.emplace(*options.histogram);
  stats.stride = options.capture.units_per_trial(width);
  stats.reservoir_limit = options.capture.max_samples;
  return stats;
}

void EnsembleStats::add(std::uint64_t trial, const LayerObservables& obs, bool keep_trial) {
  ++trial_count;
  for (std::size_t l = 0; l < q.size(); ++l) {
    q[l].add(obs.q[l]);
    r[l].add(obs.r[l]);
  }
  if (histogram) histogram->add(obs.captured);
  if (stride > 0 && reservoir.size() + stride <= reservoir_limit) {
    reservoir_trials.push_back(trial);
    reservoir.insert(reservoir.end(), obs.captured.begin(), obs.captured.end());
  }
  if (keep_trial) trials.push_back({trial, obs.q, obs.r, std::nullopt});
}

void EnsembleStats::add_overflow(std::uint64_t trial, std::size_t layer, bool keep_trial) {
  ++overflow_count;
  if (keep_trial) trials.push_back({trial, {}, {}, layer});
}

void EnsembleStats::merge(const EnsembleStats& other) {
  trial_count += other.trial_count;
  overflow_count += other.overflow_count;
  if (q.size() < other.q.size()) {
    q.resize(other.q.size());
    r.resize(other.r.size());
  }
  for (std::size_t l = 0; l < other.q.size(); ++l) {
    q[l].merge(other.q[l]);
    r[l].merge(other.r[l]);
  }
  if (other.histogram) {
    if (histogram) {
      histogram->merge(*other.histogram);
    } else {
      histogram = other.histogram;
    }
  }

  if (stride == 0) {
    stride = other.stride;
    reservoir_limit = other.reservoir_limit;
  }
  if (!other.reservoir_trials.empty()) {
    const bool in_order =
        reservoir_trials.empty() || reservoir_trials.back() < other.reservoir_trials.front();
    if (in_order) {
      for (std::size_t k = 0; k < other.reservoir_trials.size(); ++k) {
        if (reservoir.size() + stride > reservoir_limit) break;
        reservoir_trials.push_back(other.reservoir_trials[k]);
        const auto first = other.reservoir.begin() + static_cast<std::ptrdiff_t>(k * stride);
        reservoir.insert(reservoir.end(), first, first + static_cast<std::ptrdiff_t>(stride));
      }
    } else {
      // General case: merge by trial index, keep the earliest rows.
      std::vector<std::uint64_t> ids;
      std::vector<double> values;
      std::size_t a = 0;
      std::size_t b = 0;
      while ((a < reservoir_trials.size() || b < other.reservoir_trials.size()) &&
             values.size() + stride <= reservoir_limit) {
        const bool take_a =
            b == other.reservoir_trials.size() ||
            (a < reservoir_trials.size() && reservoir_trials[a] < other.reservoir_trials[b]);
        const auto& src_ids = take_a ? reservoir_trials : other.reservoir_trials;
        const auto& src_vals = take_a ? reservoir : other.reservoir;
        std::size_t& k = take_a ? a : b;
        ids.push_back(src_ids[k]);
        const auto first = src_vals.begin() + static_cast<std::ptrdiff_t>(k * stride);
        values.insert(values.end(), first, first + static_cast<std::ptrdiff_t>(stride));
        ++k;
      }
      reservoir_trials = std::move(ids);
      reservoir = std::move(values);
    }
  }

  if (!other.trials.empty()) {
    const bool in_order = trials.empty() || trials.back().trial < other.trials.front().trial;
    trials.insert(trials.end(), other.trials.begin(), other.trials.end());
    if (!in_order) {
      std::stable_sort(trials.begin(), trials.end(),
                       [](const TrialRecord& x, const TrialRecord& y) { return x.trial < y.trial; });
    }
  }
}

std::vector<double> EnsembleStats::captured_column(std::size_t k) const {
  if (k >= stride) throw std::out_of_range("captured column out of range");
  std::vector<double> column;
  column.reserve(reservoir_trials.size());
  for (std::size_t row = 0; row < reservoir_trials.size(); ++row) {
    column.push_back(reservoir[row * stride + k]);
  }
  return column;
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LENMAP_WORKERS"); env != nullptr && *env != '\0') {
    unsigned value = 0;
    const char* last = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, last, value);
    if (ec == std::errc{} && ptr == last && value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleStats simulate_ensemble(const NetworkConfig& cfg, std::uint64_t trials,
                                const EnsembleOptions& options) {
  cfg.validate();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (options.capture.layer > cfg.depth) {
    throw std::invalid_argument("capture layer exceeds depth");
  }

  const std::uint64_t chunks = (trials + kChunkTrials - 1) / kChunkTrials;
  std::vector<EnsembleStats> partial(chunks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::uint64_t chunk = next.fetch_add(1);
      if (chunk >= chunks) return;
      try {
        EnsembleStats stats = EnsembleStats::empty(cfg.depth, options, cfg.width);
        const std::uint64_t end = std::min(trials, (chunk + 1) * kChunkTrials);
        for (std::uint64_t t = chunk * kChunkTrials; t < end; ++t) {
          try {
            stats.add(t, forward_once(cfg, t, options.capture), options.keep_trials);
          } catch (const OverflowError& e) {
            stats.add_overflow(t, e.layer(), options.keep_trials);
          }
        }
        partial[chunk] = std::move(stats);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(options.workers), chunks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleStats total = EnsembleStats::empty(cfg.depth, options, cfg.width);
  for (auto& p : partial) total.merge(p);
  return total;
}

}  // namespace lenmap
