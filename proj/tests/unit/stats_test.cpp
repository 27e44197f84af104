#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lenmap/errors.hpp"
#include "lenmap/histogram.hpp"
#include "lenmap/normal.hpp"
#include "lenmap/random.hpp"
#include "lenmap/stats.hpp"

using namespace lenmap;

namespace {

std::vector<double> normal_sample(std::uint64_t seed, std::size_t n, std::uint32_t stream = 0) {
  std::vector<double> z(n);
  fill_normals(key_from_seed(seed), {stream, 0, 0}, z);
  return z;
}

// Midpoint quantiles: the "exact" sample of a distribution.
std::vector<double> quantile_sample(std::size_t n, double (*quantile)(double)) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = quantile((static_cast<double>(i) + 0.5) / n);
  return xs;
}

double cauchy_quantile_10(double p) { return 10.0 * std::tan(std::numbers::pi * (p - 0.5)); }

std::pair<std::vector<double>, std::vector<double>> layer_two_pairs(const Activation& act,
                                                                    double sw, double sb,
                                                                    std::uint64_t trials) {
  NetworkConfig cfg;
  cfg.width = 10;
  cfg.depth = 2;
  cfg.sigma_w = sw;
  cfg.sigma_b = sb;
  cfg.activation = act;
  cfg.master_seed = 2024;
  EnsembleOptions options;
  options.capture.layer = 2;
  options.capture.units = {0, 1};
  options.capture.captured_rows_only = true;
  const auto stats = simulate_ensemble(cfg, trials, options);
  return {stats.captured_column(0), stats.captured_column(1)};
}

}  // namespace

TEST(Wilson, KnownValues) {
  const auto ci = wilson_interval(8, 10);
  EXPECT_NEAR(ci.lo, 0.4901624, 1e-6);
  EXPECT_NEAR(ci.hi, 0.9433178, 1e-6);
  EXPECT_EQ(wilson_interval(0, 5).lo, 0.0);
  EXPECT_EQ(wilson_interval(5, 5).hi, 1.0);
  EXPECT_LT(wilson_interval(200, 200).lo, 1.0);
  EXPECT_GT(wilson_interval(200, 200).lo, 0.98);
  EXPECT_THROW(wilson_interval(1, 0), std::invalid_argument);
  EXPECT_THROW(wilson_interval(3, 2), std::invalid_argument);
}

TEST(CrossMoment, IndependentPairsCentredOnZero) {
  const auto a = normal_sample(1, 20000, 0);
  const auto b = normal_sample(1, 20000, 1);
  const auto g = cross_moment_gap(a, b, 3);
  EXPECT_GT(g.std_error, 0.0);
  EXPECT_LT(std::fabs(g.gap_estimate), 3.0 * g.std_error);
  EXPECT_EQ(g.pairs, 20000u);
  EXPECT_TRUE(std::isnan(g.theoretical_gap));
}

TEST(CrossMoment, UnbiasedOverRepetitions) {
  RunningMoments gaps;
  for (std::uint32_t rep = 0; rep < 100; ++rep) {
    const auto a = normal_sample(77, 2000, 2 * rep);
    const auto b = normal_sample(77, 2000, 2 * rep + 1);
    gaps.add(cross_moment_gap(a, b, rep, 20).gap_estimate);
  }
  EXPECT_LT(std::fabs(gaps.mean()), 3.0 * std::sqrt(gaps.variance() / 100.0));
}

TEST(CrossMoment, PerfectlyDependentPairs) {
  const auto a = normal_sample(5, 5000);
  const auto g = cross_moment_gap(a, a, 0);
  // Var(z^2) = 2.
  EXPECT_NEAR(g.gap_estimate, 2.0, 5.0 * g.std_error);
  EXPECT_GT(g.z_score, 10.0);
}

TEST(CrossMoment, BootstrapIsSeeded) {
  const auto a = normal_sample(9, 3000, 0);
  const auto b = normal_sample(9, 3000, 1);
  EXPECT_EQ(cross_moment_gap(a, b, 4).std_error, cross_moment_gap(a, b, 4).std_error);
  EXPECT_NE(cross_moment_gap(a, b, 4).std_error, cross_moment_gap(a, b, 5).std_error);
}

TEST(CrossMoment, Preconditions) {
  const auto a = normal_sample(1, 999);
  EXPECT_THROW(cross_moment_gap(a, a), InsufficientSamplesError);
  const auto b = normal_sample(1, 1000);
  const auto c = normal_sample(1, 1001);
  EXPECT_THROW(cross_moment_gap(b, c), std::invalid_argument);
  EXPECT_THROW(cross_moment_gap(b, b, 0, 1), std::invalid_argument);
}

TEST(TheoreticalGap, ClosedForms) {
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::heaviside(), 1.0, 0.0, 10), 0.025);
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::relu(), 1.0, 0.0, 10), 0.125);
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::relu(), 1.0, 0.0, 1'000'000), 1.25e-6);
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::relu(), 2.0, 0.0, 10), 5.0 * 256.0 / 40.0);
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::relu(), 1.0, 1.0, 10), 5.0 * 4.0 / 40.0);
  EXPECT_DOUBLE_EQ(theoretical_gap(Activation::heaviside(), 2.0, 3.0, 10), 16.0 / 40.0);
  for (const std::size_t n : {1, 7, 10, 1000}) {
    for (const auto& act : {Activation::relu(), Activation::heaviside()}) {
      EXPECT_EQ(theoretical_gap(act, 1.3, 0.2, 2 * n), theoretical_gap(act, 1.3, 0.2, n) / 2);
    }
  }
  EXPECT_THROW(theoretical_gap(Activation::tanh(), 1, 0, 10), UnsupportedActivationError);
  EXPECT_THROW(theoretical_gap(Activation::relu().scaled(2), 1, 0, 10), UnsupportedActivationError);
  EXPECT_THROW(theoretical_gap(Activation::relu(), 1, 0, 0), std::invalid_argument);
}

// Var(x^2) oracles for x = phi(h), h ~ N(0, v), by direct quadrature of the
// Gaussian density (independent of the library's moment code).
TEST(TheoreticalGap, VarianceOracle) {
  auto var_x2 = [](auto phi, double v) {
    constexpr int n = 400000;
    const double s = std::sqrt(v);
    const double lo = -12.0 * s;
    const double h = 24.0 * s / n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = lo + (i + 0.5) * h;
      const double w = std::exp(-0.5 * z * z / v) / std::sqrt(2.0 * std::numbers::pi * v) * h;
      const double x2 = phi(z) * phi(z);
      m2 += w * x2;
      m4 += w * x2 * x2;
    }
    return m4 - m2 * m2;
  };
  const auto relu = [](double z) { return z > 0 ? z : 0.0; };
  const auto step = [](double z) { return z > 0 ? 1.0 : 0.0; };
  for (const auto [sw, sb] : {std::pair{1.0, 0.0}, {1.0, 1.0}, {0.7, 0.4}}) {
    const double v = sw * sw + sb * sb;
    const double w4 = std::pow(sw, 4);
    EXPECT_NEAR(theoretical_gap(Activation::relu(), sw, sb, 10), w4 * var_x2(relu, v) / 10, 1e-6);
    EXPECT_NEAR(theoretical_gap(Activation::heaviside(), sw, sb, 10), w4 * var_x2(step, v) / 10,
                1e-6);
  }
}

TEST(TheoreticalGap, MatchesSimulation) {
  for (const auto& [act, sb] : {std::pair{Activation::heaviside(), 0.0},
                                {Activation::relu(), 0.0},
                                {Activation::relu(), 1.0}}) {
    const auto [a, b] = layer_two_pairs(act, 1.0, sb, 50'000);
    const auto g = cross_moment_gap(a, b, 1);
    const double theory = theoretical_gap(act, 1.0, sb, 10);
    EXPECT_LT(std::fabs(g.gap_estimate - theory), 3.5 * g.std_error)
        << act.name() << " sb=" << sb << " gap=" << g.gap_estimate << " se=" << g.std_error;
  }
}

TEST(Ks, Basics) {
  const std::vector<double> xs = {0.1, 0.2, 0.3, 0.4};
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_NEAR(ks_statistic(xs, uniform), 0.6, 1e-15);
  const std::vector<double> one = {0.5};
  EXPECT_DOUBLE_EQ(ks_statistic(one, uniform), 0.5);
  EXPECT_DOUBLE_EQ(ks_statistic(xs, [](double) { return 0.0; }), 1.0);
  const std::vector<double> nan = {0.1, NAN};
  EXPECT_THROW(ks_statistic(nan, uniform), std::invalid_argument);
}

TEST(Ks, InvariantUnderMonotoneTransform) {
  const auto z = normal_sample(12, 2000);
  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) e[i] = std::exp(z[i]);
  const double direct = ks_statistic(z, [](double x) { return normal_cdf(x); });
  const double mapped = ks_statistic(e, [](double y) { return normal_cdf(std::log(y)); });
  EXPECT_NEAR(direct, mapped, 1e-14);
  EXPECT_GE(direct, 0.0);
  EXPECT_LE(direct, 1.0);
}

TEST(Fit, GaussianQuantileSample) {
  const auto xs = quantile_sample(100000, normal_quantile);
  const auto fit = fit_and_test_distribution(xs, Reference::gaussian(1.0));
  EXPECT_LE(fit.ks_vs_gaussian, 0.005);
  EXPECT_NEAR(fit.gaussian_sigma, 1.0, 1e-3);
  EXPECT_GT(fit.ks_vs_cauchy, 0.02);
  EXPECT_EQ(fit.sample_count, 100000u);
}

TEST(Fit, CauchyQuantileSample) {
  const auto xs = quantile_sample(100000, cauchy_quantile_10);
  const auto fit = fit_and_test_distribution(xs, Reference::cauchy(0.0, 10.0));
  EXPECT_LE(fit.ks_vs_cauchy, 0.001);
  EXPECT_NEAR(fit.cauchy_scale, 10.0, 0.01);
  EXPECT_NEAR(fit.cauchy_location, 0.0, 0.01);
  EXPECT_GE(fit.ks_vs_gaussian, 0.1);
  const auto fitted = fit_and_test_distribution(xs);
  EXPECT_LE(fitted.ks_vs_cauchy, 0.001);
}

TEST(Fit, CauchyMleShiftedAndNoisy) {
  std::vector<double> u(20000);
  fill_uniforms(key_from_seed(31), {0, 0, 0}, u);
  std::vector<double> xs(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) xs[i] = 3.0 + 0.5 * std::tan(std::numbers::pi * (u[i] - 0.5));
  const auto fit = fit_cauchy(xs);
  EXPECT_GT(fit.scale, 0.0);
  EXPECT_NEAR(fit.location, 3.0, 0.03);
  EXPECT_NEAR(fit.scale, 0.5, 0.03);
  // Score equations vanish at the MLE.
  double s0 = 0.0;
  double s1 = 0.0;
  for (const double x : xs) {
    const double d = x - fit.location;
    const double den = fit.scale * fit.scale + d * d;
    s0 += d / den;
    s1 += fit.scale * fit.scale / den;
  }
  EXPECT_NEAR(s0 / xs.size(), 0.0, 1e-8);
  EXPECT_NEAR(s1 / xs.size(), 0.5, 1e-8);
}

TEST(Fit, TwoDistinctValues) {
  std::vector<double> xs(200, 1.0);
  xs[0] = 2.0;
  const auto fit = fit_and_test_distribution(xs);
  EXPECT_GT(fit.cauchy_scale, 0.0);
}

TEST(Fit, Errors) {
  const std::vector<double> same(500, 4.0);
  EXPECT_THROW(fit_and_test_distribution(same), DegenerateSampleError);
  const auto few = quantile_sample(99, normal_quantile);
  EXPECT_THROW(fit_and_test_distribution(few), InsufficientSamplesError);
  const auto xs = quantile_sample(200, normal_quantile);
  EXPECT_THROW(fit_and_test_distribution(xs, Reference::cauchy(0, 0)), std::invalid_argument);
  EXPECT_THROW(fit_and_test_distribution(xs, Reference::gaussian(-1)), std::invalid_argument);
}

TEST(Median, Values) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(HistogramTest, Examples) {
  const std::vector<double> ones = {1, 1, 1};
  const auto h = histogram(ones, 1, 0, 2);
  EXPECT_EQ(h.counts(), (std::vector<std::uint64_t>{3}));
  const std::vector<double> outside = {-5, 5};
  const auto o = histogram(outside, 2, -1, 1);
  EXPECT_EQ(o.counts(), (std::vector<std::uint64_t>{0, 0}));
  EXPECT_EQ(o.underflow(), 1u);
  EXPECT_EQ(o.overflow(), 1u);
  EXPECT_EQ(o.total(), 2u);
}

TEST(HistogramTest, EdgesAndMerge) {
  Histogram h({0, 1, 4});
  h.add(0.0);
  h.add(1.0);
  h.add(0.25);
  h.add(NAN);
  EXPECT_EQ(h.counts(), (std::vector<std::uint64_t>{1, 1, 0, 1}));
  EXPECT_EQ(h.overflow(), 1u);
  EXPECT_DOUBLE_EQ(h.bin_lo(1), 0.25);
  EXPECT_DOUBLE_EQ(h.bin_hi(3), 1.0);
  Histogram g({0, 1, 4});
  g.add(0.6);
  h.merge(g);
  EXPECT_EQ(h.counts()[2], 1u);
  EXPECT_EQ(h.total(), 5u);
  Histogram other({0, 2, 4});
  EXPECT_THROW(h.merge(other), std::invalid_argument);
  EXPECT_THROW(Histogram({1, 1, 4}), std::invalid_argument);
  EXPECT_THROW(Histogram({0, 1, 0}), std::invalid_argument);
}

TEST(HistogramTest, CauchyOverflowMass) {
  std::vector<double> u(10000);
  fill_uniforms(key_from_seed(8), {0, 0, 0}, u);
  std::vector<double> xs(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) xs[i] = 10.0 * std::tan(std::numbers::pi * (u[i] - 0.5));
  const auto h = histogram(xs, 100, -50, 50);
  const double outside = static_cast<double>(h.underflow() + h.overflow()) / xs.size();
  const double oracle = 2.0 * (1.0 - (0.5 + std::atan(5.0) / std::numbers::pi));
  EXPECT_NEAR(outside, oracle, 4.0 * std::sqrt(oracle * (1 - oracle) / xs.size()));
  const auto& c = h.counts();
  const auto peak = std::max_element(c.begin(), c.end()) - c.begin();
  EXPECT_GE(peak, 45);
  EXPECT_LE(peak, 54);
}

TEST(Convergence, IdentityWidens) {
  ConvergenceRequest request;
  request.activation = Activation::identity();
  request.depth = 3;
  request.widths = {64, 256, 1024};
  request.trials = 100;
  request.epsilon = 0.2;
  request.seed = 3;
  const auto report = convergence_report(request);
  ASSERT_EQ(report.widths.size(), 3u);
  EXPECT_TRUE(report.nondecreasing_within_ci());
  EXPECT_GE(report.widths[2].success_fraction, 0.95);
  for (const auto& row : report.widths) {
    EXPECT_GE(row.ci.lo, 0.0);
    EXPECT_LE(row.ci.hi, 1.0);
    EXPECT_LE(row.ci.lo, row.success_fraction);
    EXPECT_GE(row.ci.hi, row.success_fraction);
    ASSERT_EQ(row.layer_fraction.size(), 3u);
    for (const double f : row.layer_fraction) EXPECT_GE(f, row.success_fraction);
  }
  EXPECT_NEAR(report.length_map.qtilde[3], 1.0, 1e-10);
}

TEST(Convergence, Errors) {
  ConvergenceRequest request;
  request.activation = Activation::reciprocal();
  request.depth = 2;
  request.widths = {10, 100};
  try {
    convergence_report(request);
    FAIL() << "expected MapDivergedError";
  } catch (const MapDivergedError& e) {
    EXPECT_EQ(e.layer(), 2u);
  }
  request.activation = Activation::exp_square(1.0);
  request.sigma_w = 0.5;
  EXPECT_THROW(convergence_report(request), MapDivergedError);
  request.activation = Activation::relu();
  request.widths = {100, 100};
  EXPECT_THROW(convergence_report(request), std::invalid_argument);
  request.widths = {};
  EXPECT_THROW(convergence_report(request), std::invalid_argument);
  request.widths = {10};
  request.epsilon = 0.0;
  EXPECT_THROW(convergence_report(request), std::invalid_argument);
}

TEST(Convergence, NondecreasingCheck) {
  ConvergenceReport report;
  report.widths.resize(2);
  report.widths[0].ci = {0.8, 0.9};
  report.widths[1].ci = {0.6, 0.79};
  EXPECT_FALSE(report.nondecreasing_within_ci());
  report.widths[1].ci = {0.6, 0.85};
  EXPECT_TRUE(report.nondecreasing_within_ci());
}
