#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lenmap/activation.hpp"
#include "lenmap/length_map.hpp"
#include "lenmap/simulator.hpp"

namespace lenmap {

struct BinomialInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// 95% Wilson score interval for `successes` out of `trials`.
/// Throws std::invalid_argument if trials == 0 or successes > trials.
BinomialInterval wilson_interval(std::uint64_t successes, std::uint64_t trials);

struct ConvergenceRequest {
  Activation activation = Activation::relu();
  double sigma_w = 1.0;
  double sigma_b = 0.0;
  std::size_t depth = 1;
  /// Strictly increasing.
  std::vector<std::size_t> widths;
  std::uint64_t trials = 100;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  InputSpec input;
  unsigned workers = 0;
};

struct WidthConvergence {
  std::size_t width = 0;
  std::uint64_t trials = 0;
  /// Trials with |q_l - qtilde_l| <= epsilon at every layer l = 1..D.
  std::uint64_t successes = 0;
  double success_fraction = 0.0;
  BinomialInterval ci;
  /// Same, one layer at a time (index l - 1).
  std::vector<std::uint64_t> layer_successes;
  std::vector<double> layer_fraction;
  std::vector<BinomialInterval> layer_ci;
  /// Overflowed trials, counted as failures.
  std::uint64_t overflow_count = 0;
};

struct ConvergenceReport {
  double epsilon = 0.0;
  LengthMap length_map;
  std::vector<WidthConvergence> widths;

  /// False if some width's interval lies entirely below the previous one's.
  bool nondecreasing_within_ci() const;
};

/// Runs an ensemble per width and compares every trial's length process with
/// the length map. Width k uses master seed `seed + k`.
///
/// Throws MapDivergedError if the length map is not finite at some layer, and
/// std::invalid_argument for empty or non-increasing widths, trials == 0 or
/// epsilon <= 0.
ConvergenceReport convergence_report(const ConvergenceRequest& request);

struct CrossMomentResult {
  /// mean(a^2 b^2) - mean(a^2) mean(b^2).
  double gap_estimate = 0.0;
  /// Bootstrap standard deviation of the estimator.
  double std_error = 0.0;
  /// NaN unless filled in by the caller.
  double theoretical_gap = 0.0;
  /// gap_estimate / std_error.
  double z_score = 0.0;
  std::size_t pairs = 0;
  int resamples = 0;
};

/// Plug-in estimator of E[a^2 b^2] - E[a^2] E[b^2] with a bootstrap standard
/// error over `resamples` resamples drawn from a counter stream keyed by
/// `seed`.
///
/// Throws InsufficientSamplesError below 1000 pairs, std::invalid_argument if
/// the spans differ in length or resamples < 2.
CrossMomentResult cross_moment_gap(std::span<const double> first, std::span<const double> second,
                                   std::uint64_t seed = 0, int resamples = 200);

/// E[h_{2,1}^2 h_{2,2}^2] - E[h_{2,1}^2] E[h_{2,2}^2] for an input with
/// r_0 = 1, which is sigma_w^4 Var(x_1^2) / N with x_1 = phi(h_1) and
/// h_1 ~ N(0, sigma_w^2 + sigma_b^2):
///   heaviside: sigma_w^4 / (4N)
///   relu:      5 sigma_w^4 (sigma_w^2 + sigma_b^2)^2 / (4N)
///
/// Throws UnsupportedActivationError for any other activation (scaled
/// variants included) and std::invalid_argument unless N >= 1.
double theoretical_gap(const Activation& act, double sigma_w, double sigma_b, std::size_t width);

double cauchy_cdf(double x, double location, double scale);
double gaussian_cdf(double x, double mean, double sigma);

/// sup_x |F_n(x) - F(x)| for the empirical CDF of `samples` (sorted or not).
/// NaN samples are rejected with std::invalid_argument.
template <typename Cdf>
double ks_statistic(std::span<const double> samples, Cdf&& cdf);

struct CauchyFit {
  double location = 0.0;
  double scale = 0.0;
  /// False if Newton failed and the golden-section fallback was used.
  bool newton_converged = true;
};

/// Maximum-likelihood Cauchy(x0, gamma) fit: Newton with backtracking from
/// (median, half interquartile range), falling back to a golden-section
/// search on gamma at x0 = median.
CauchyFit fit_cauchy(std::span<const double> samples);

/// Zero-mean Gaussian scale sqrt(mean x^2).
double fit_gaussian_sigma(std::span<const double> samples);

struct Reference {
  enum class Kind { cauchy, gaussian, auto_fit };
  Kind kind = Kind::auto_fit;
  double location = 0.0;
  /// Cauchy gamma or Gaussian sigma.
  double scale = 1.0;

  static Reference cauchy(double location, double scale) { return {Kind::cauchy, location, scale}; }
  static Reference gaussian(double sigma) { return {Kind::gaussian, 0.0, sigma}; }
  static Reference fitted() { return {}; }
};

struct DistributionFit {
  double cauchy_location = 0.0;
  double cauchy_scale = 0.0;
  double gaussian_sigma = 0.0;
  /// Against the given Cauchy reference, or the fitted Cauchy otherwise.
  double ks_vs_cauchy = 0.0;
  /// Against the given Gaussian reference, or the fitted Gaussian otherwise.
  double ks_vs_gaussian = 0.0;
  std::size_t sample_count = 0;
};

/// Throws InsufficientSamplesError below 100 samples, DegenerateSampleError
/// if all samples are equal, std::invalid_argument for a non-positive
/// reference scale or NaN samples.
DistributionFit fit_and_test_distribution(std::span<const double> samples,
                                          const Reference& reference = Reference::fitted());

double median(std::vector<double> values);

}  // namespace lenmap

#include "lenmap/detail/ks.hpp"
