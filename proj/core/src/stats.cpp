#include "lenmap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "lenmap/errors.hpp"
#include "lenmap/random.hpp"

namespace lenmap {

namespace {

constexpr double kZ95 = 1.959963984540054;

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(k);
  return sorted[k] + frac * (sorted[k + 1] - sorted[k]);
}

void reject_nan(std::span<const double> samples) {
  for (const double x : samples) {
    if (std::isnan(x)) throw std::invalid_argument("samples contain NaN");
  }
}

struct CauchyScore {
  double loglik;
  double g0;
  double g1;
  double h00;
  double h01;
  double h11;
};

// Log-likelihood in (x0, s = log gamma), with its gradient and Hessian.
CauchyScore cauchy_score(std::span<const double> xs, double x0, double s) {
  const double gamma = std::exp(s);
  const double g2 = gamma * gamma;
  const auto n = static_cast<double>(xs.size());
  double sum_log = 0.0;
  double a = 0.0;   // sum d / D
  double b = 0.0;   // sum 1 / D
  double c = 0.0;   // sum (d^2 - g2) / D^2
  double e = 0.0;   // sum d / D^2
  double f = 0.0;   // sum 1 / D^2
  for (const double x : xs) {
    const double d = x - x0;
    const double den = g2 + d * d;
    sum_log += std::log(den);
    a += d / den;
    b += 1.0 / den;
    c += (d * d - g2) / (den * den);
    e += d / (den * den);
    f += 1.0 / (den * den);
  }
  CauchyScore sc{};
  sc.loglik = n * s - sum_log;
  sc.g0 = 2.0 * a;
  sc.g1 = n - 2.0 * g2 * b;
  sc.h00 = 2.0 * c;
  sc.h01 = -4.0 * g2 * e;
  sc.h11 = -4.0 * g2 * b + 4.0 * g2 * g2 * f;
  return sc;
}

double cauchy_loglik_scale(std::span<const double> xs, double x0, double gamma) {
  double sum_log = 0.0;
  for (const double x : xs) sum_log += std::log(gamma * gamma + (x - x0) * (x - x0));
  return static_cast<double>(xs.size()) * std::log(gamma) - sum_log;
}

}  // namespace

BinomialInterval wilson_interval(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("wilson_interval needs trials >= 1");
  if (successes > trials) throw std::invalid_argument("successes exceed trials");
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

bool ConvergenceReport::nondecreasing_within_ci() const {
  for (std::size_t k = 1; k < widths.size(); ++k) {
    if (widths[k].ci.hi < widths[k - 1].ci.lo) return false;
  }
  return true;
}

ConvergenceReport convergence_report(const ConvergenceRequest& request) {
  if (request.widths.empty()) throw std::invalid_argument("convergence_report needs widths");
  for (std::size_t k = 1; k < request.widths.size(); ++k) {
    if (request.widths[k] <= request.widths[k - 1]) {
      throw std::invalid_argument("widths must be strictly increasing");
    }
  }
  if (request.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (!(request.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");

  ConvergenceReport report;
  report.epsilon = request.epsilon;
  report.length_map = compute_length_map(request.activation, request.sigma_w, request.sigma_b,
                                         request.depth);
  const LengthMap& map = report.length_map;
  // qtilde_l only needs tr_{l-1}.
  for (std::size_t l = 1; l <= request.depth; ++l) {
    if (!std::isfinite(map.qtilde[l])) {
      throw MapDivergedError(l, "length map is undefined at layer " + std::to_string(l) + " (" +
                                    std::string(to_string(map.status[l - 1])) + ")");
    }
  }

  for (std::size_t k = 0; k < request.widths.size(); ++k) {
    NetworkConfig cfg;
    cfg.width = request.widths[k];
    cfg.depth = request.depth;
    cfg.sigma_w = request.sigma_w;
    cfg.sigma_b = request.sigma_b;
    cfg.input = request.input;
    cfg.activation = request.activation;
    cfg.master_seed = request.seed + k;

    EnsembleOptions options;
    options.keep_trials = true;
    options.workers = request.workers;
    const EnsembleStats stats = simulate_ensemble(cfg, request.trials, options);

    WidthConvergence row;
    row.width = cfg.width;
    row.trials = request.trials;
    row.overflow_count = stats.overflow_count;
    row.layer_successes.assign(request.depth, 0);
    for (const TrialRecord& trial : stats.trials) {
      if (trial.overflow_layer) continue;
      bool all = true;
      for (std::size_t l = 1; l <= request.depth; ++l) {
        if (std::fabs(trial.q[l] - map.qtilde[l]) <= request.epsilon) {
          ++row.layer_successes[l - 1];
        } else {
          all = false;
        }
      }
      if (all) ++row.successes;
    }
    const auto n = static_cast<double>(row.trials);
    row.success_fraction = static_cast<double>(row.successes) / n;
    row.ci = wilson_interval(row.successes, row.trials);
    for (const std::uint64_t s : row.layer_successes) {
      row.layer_fraction.push_back(static_cast<double>(s) / n);
      row.layer_ci.push_back(wilson_interval(s, row.trials));
    }
    report.widths.push_back(std::move(row));
  }
  return report;
}

CrossMomentResult cross_moment_gap(std::span<const double> first, std::span<const double> second,
                                   std::uint64_t seed, int resamples) {
  if (first.size() != second.size()) {
    throw std::invalid_argument("cross_moment_gap needs paired samples");
  }
  if (first.size() < 1000) {
    throw InsufficientSamplesError("cross_moment_gap needs at least 1000 pairs, got " +
                                   std::to_string(first.size()));
  }
  if (resamples < 2) throw std::invalid_argument("resamples must be >= 2");

  const std::size_t n = first.size();
  std::vector<double> a2(n);
  std::vector<double> b2(n);
  for (std::size_t i = 0; i < n; ++i) {
    a2[i] = first[i] * first[i];
    b2[i] = second[i] * second[i];
  }
  auto gap_of = [&](auto&& index) {
    double sa = 0.0;
    double sb = 0.0;
    double sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = index(i);
      sa += a2[j];
      sb += b2[j];
      sab += a2[j] * b2[j];
    }
    const auto m = static_cast<double>(n);
    return sab / m - (sa / m) * (sb / m);
  };

  CrossMomentResult result;
  result.pairs = n;
  result.resamples = resamples;
  result.gap_estimate = gap_of([](std::size_t i) { return i; });
  result.theoretical_gap = std::numeric_limits<double>::quiet_NaN();

  const PhiloxKey key = key_from_seed(seed);
  RunningMoments boot;
  for (int r = 0; r < resamples; ++r) {
    CounterStream stream(key, {static_cast<std::uint32_t>(r), 0xB0u, 0u});
    boot.add(gap_of([&](std::size_t) { return static_cast<std::size_t>(stream.below(n)); }));
  }
  result.std_error = std::sqrt(boot.variance());
  result.z_score = result.gap_estimate / result.std_error;
  return result;
}

double theoretical_gap(const Activation& act, double sigma_w, double sigma_b, std::size_t width) {
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (!(sigma_w >= 0.0 && sigma_b >= 0.0)) throw std::invalid_argument("sigmas must be >= 0");
  const double n = static_cast<double>(width);
  const double w4 = sigma_w * sigma_w * sigma_w * sigma_w;
  if (act == Activation::heaviside()) return w4 / (4.0 * n);
  if (act == Activation::relu()) {
    const double v = sigma_w * sigma_w + sigma_b * sigma_b;
    return 5.0 * w4 * v * v / (4.0 * n);
  }
  throw UnsupportedActivationError("no closed-form gap for " + act.name());
}

double cauchy_cdf(double x, double location, double scale) {
  return 0.5 + std::atan((x - location) / scale) / std::numbers::pi;
}

double gaussian_cdf(double x, double mean, double sigma) {
  return 0.5 * std::erfc(-(x - mean) / (sigma * std::numbers::sqrt2));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

CauchyFit fit_cauchy(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_cauchy needs two samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double med = quantile_sorted(sorted, 0.5);
  double half_iqr = 0.5 * (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
  if (!(half_iqr > 0.0)) {
    half_iqr = 0.5 * (sorted.back() - sorted.front());
    if (!(half_iqr > 0.0)) throw DegenerateSampleError("all samples are identical");
  }

  double x0 = med;
  double s = std::log(half_iqr);
  CauchyScore sc = cauchy_score(samples, x0, s);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    const double det = sc.h00 * sc.h11 - sc.h01 * sc.h01;
    double d0 = 0.0;
    double d1 = 0.0;
    // Newton step if the Hessian is negative definite, gradient ascent otherwise.
    if (sc.h00 < 0.0 && det > 0.0) {
      d0 = -(sc.h11 * sc.g0 - sc.h01 * sc.g1) / det;
      d1 = -(-sc.h01 * sc.g0 + sc.h00 * sc.g1) / det;
    } else {
      const double scale2 = std::exp(2.0 * s);
      d0 = sc.g0 * scale2 / static_cast<double>(samples.size());
      d1 = sc.g1 / static_cast<double>(samples.size());
    }
    double t = 1.0;
    bool improved = false;
    CauchyScore next{};
    for (int k = 0; k < 40; ++k) {
      next = cauchy_score(samples, x0 + t * d0, s + t * d1);
      if (std::isfinite(next.loglik) && next.loglik >= sc.loglik) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
    x0 += t * d0;
    s += t * d1;
    const double change = std::fabs(t * d0) / std::exp(s) + std::fabs(t * d1);
    sc = next;
    if (change < 1e-12) {
      converged = true;
      break;
    }
  }
  const bool gradient_small =
      std::fabs(sc.g0) * std::exp(s) < 1e-6 * static_cast<double>(samples.size()) &&
      std::fabs(sc.g1) < 1e-6 * static_cast<double>(samples.size());
  if ((converged || gradient_small) && std::isfinite(s) && std::isfinite(x0)) {
    return {x0, std::exp(s), true};
  }

  // Golden-section search on log gamma with the location held at the median.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(half_iqr) - 10.0;
  double hi = std::log(half_iqr) + 10.0;
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = cauchy_loglik_scale(samples, med, std::exp(c));
  double fd = cauchy_loglik_scale(samples, med, std::exp(d));
  while (hi - lo > 1e-12) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = cauchy_loglik_scale(samples, med, std::exp(c));
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = cauchy_loglik_scale(samples, med, std::exp(d));
    }
  }
  return {med, std::exp(0.5 * (lo + hi)), false};
}

double fit_gaussian_sigma(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_gaussian_sigma needs samples");
  double sum = 0.0;
  double comp = 0.0;
  for (const double x : samples) {
    const double term = x * x;
    const double t = sum + term;
    comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return std::sqrt((sum + comp) / static_cast<double>(samples.size()));
}

DistributionFit fit_and_test_distribution(std::span<const double> samples,
                                          const Reference& reference) {
  if (samples.size() < 100) {
    throw InsufficientSamplesError("distribution fit needs at least 100 samples, got " +
                                   std::to_string(samples.size()));
  }
  reject_nan(samples);
  if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples[0]; })) {
    throw DegenerateSampleError("all samples are identical");
  }
  if (reference.kind != Reference::Kind::auto_fit &&
      !(reference.scale > 0.0 && std::isfinite(reference.scale) &&
        std::isfinite(reference.location))) {
    throw std::invalid_argument("reference scale must be positive and finite");
  }

  DistributionFit fit;
  fit.sample_count = samples.size();
  const CauchyFit cauchy = fit_cauchy(samples);
  fit.cauchy_location = cauchy.location;
  fit.cauchy_scale = cauchy.scale;
  fit.gaussian_sigma = fit_gaussian_sigma(samples);

  double c_loc = cauchy.location;
  double c_scale = cauchy.scale;
  double g_sigma = fit.gaussian_sigma;
  if (reference.kind == Reference::Kind::cauchy) {
    c_loc = reference.location;
    c_scale = reference.scale;
  } else if (reference.kind == Reference::Kind::gaussian) {
    g_sigma = reference.scale;
  }
  fit.ks_vs_cauchy =
      ks_statistic(samples, [&](double x) { return cauchy_cdf(x, c_loc, c_scale); });
  fit.ks_vs_gaussian = ks_statistic(samples, [&](double x) { return gaussian_cdf(x, 0.0, g_sigma); });
  return fit;
}

}  // namespace lenmap
