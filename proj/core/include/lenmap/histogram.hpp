#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lenmap {

struct HistogramSpec {
  double lo = -1.0;
  double hi = 1.0;
  int bins = 100;
};

/// Equal-width bins on [lo, hi) plus underflow (< lo) and overflow (>= hi,
/// and NaN) counters. The last bin is closed, so hi itself lands in it.
class Histogram {
 public:
  /// Throws std::invalid_argument unless bins >= 1 and lo < hi (both finite).
  explicit Histogram(const HistogramSpec& spec);

  void add(double x);
  void add(std::span<const double> xs);
  /// Throws std::invalid_argument if the binning differs.
  void merge(const Histogram& other);

  const HistogramSpec& spec() const { return spec_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t underflow() const { return underflow_; }
  std::uint64_t overflow() const { return overflow_; }
  std::uint64_t total() const;

  double bin_lo(int k) const;
  double bin_hi(int k) const;
  double bin_width() const { return (spec_.hi - spec_.lo) / spec_.bins; }

 private:
  HistogramSpec spec_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t underflow_ = 0;
  std::uint64_t overflow_ = 0;
};

Histogram histogram(std::span<const double> samples, int bins, double lo, double hi);

}  // namespace lenmap
