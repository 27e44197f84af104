#include "lenmap/histogram.hpp"

#include <cmath>
#include <stdexcept>

namespace lenmap {

Histogram::Histogram(const HistogramSpec& spec) : spec_(spec) {
  if (spec.bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (!(std::isfinite(spec.lo) && std::isfinite(spec.hi) && spec.lo < spec.hi)) {
    throw std::invalid_argument("histogram range needs finite lo < hi");
  }
  counts_.assign(static_cast<std::size_t>(spec.bins), 0);
}

void Histogram::add(double x) {
  if (x < spec_.lo) {
    ++underflow_;
    return;
  }
  if (!(x <= spec_.hi)) {
    ++overflow_;
    return;
  }
  auto k = static_cast<std::size_t>((x - spec_.lo) / (spec_.hi - spec_.lo) * spec_.bins);
  if (k >= counts_.size()) k = counts_.size() - 1;
  ++counts_[k];
}

void Histogram::add(std::span<const double> xs) {
  for (const double x : xs) add(x);
}

void Histogram::merge(const Histogram& other) {
  if (other.spec_.bins != spec_.bins || other.spec_.lo != spec_.lo || other.spec_.hi != spec_.hi) {
    throw std::invalid_argument("cannot merge histograms with different binning");
  }
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  underflow_ += other.underflow_;
  overflow_ += other.overflow_;
}

std::uint64_t Histogram::total() const {
  std::uint64_t sum = underflow_ + overflow_;
  for (const auto c : counts_) sum += c;
  return sum;
}

double Histogram::bin_lo(int k) const { return spec_.lo + k * bin_width(); }

double Histogram::bin_hi(int k) const {
  return k + 1 == spec_.bins ? spec_.hi : spec_.lo + (k + 1) * bin_width();
}

Histogram histogram(std::span<const double> samples, int bins, double lo, double hi) {
  Histogram h(HistogramSpec{lo, hi, bins});
  h.add(samples);
  return h;
}

}  // namespace lenmap
