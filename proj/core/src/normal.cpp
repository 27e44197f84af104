#include "lenmap/normal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string_view>
#include <limits>
#include <span>

#include "lenmap/random.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define LENMAP_X86_DISPATCH 1
#include <immintrin.h>
#else
#define LENMAP_X86_DISPATCH 0
#endif

namespace lenmap {

namespace {

double central_quantile(double q) {
  const double r = 0.180625 - q * q;
  return q *
         (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
               6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
             1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
           1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
         (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
               3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
             5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
           4.2313330701600911252e+1) * r + 1.0);
}

// Tail branch, r = sqrt(-log(min(p, 1 - p))) - 1.6 when r <= 5.
double tail_near(double r) {
  return (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
               2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
             3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
           4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
         (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
               1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
             6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
           2.05319162663775882187e+0) * r + 1.0);
}

// r - 5 when r > 5.
double tail_far(double r) {
  return (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
               1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
             2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
           5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
         (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
               1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
             1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
           5.99832206555887937690e-1) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) return central_quantile(q);
  const double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  const double value = r <= 5.0 ? tail_near(r - 1.6) : tail_far(r - 5.0);
  return q < 0.0 ? -value : value;
}

namespace {

void fill_uniforms_scalar(const PhiloxKey& key, StreamId stream, std::uint32_t block,
                          std::span<double> out) {
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (; i + 1 < n; i += 2, ++block) {
    const auto w = philox4x32({block, stream.a, stream.b, stream.c}, key);
    out[i] = uniform_open(std::uint64_t{w[0]} | (std::uint64_t{w[1]} << 32));
    out[i + 1] = uniform_open(std::uint64_t{w[2]} | (std::uint64_t{w[3]} << 32));
  }
  if (i < n) {
    const auto w = philox4x32({block, stream.a, stream.b, stream.c}, key);
    out[i] = uniform_open(std::uint64_t{w[0]} | (std::uint64_t{w[1]} << 32));
  }
}

void central_scalar(const double* u, double* v, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) v[i] = central_quantile(u[i] - 0.5);
}

#if LENMAP_X86_DISPATCH

// Eight Philox blocks at a time, one per 32-bit lane.
__attribute__((target("avx2"))) std::size_t fill_uniforms_avx2(const PhiloxKey& key,
                                                               StreamId stream,
                                                               std::span<double> out) {
  const std::size_t blocks = out.size() / 16 * 8;
  const __m256i m0 = _mm256_set1_epi64x(detail::kPhiloxM0);
  const __m256i m1 = _mm256_set1_epi64x(detail::kPhiloxM1);
  const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  alignas(32) std::uint32_t w[4][8];
  for (std::size_t b = 0; b < blocks; b += 8) {
    __m256i x0 = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(b)), lane);
    __m256i x1 = _mm256_set1_epi32(static_cast<int>(stream.a));
    __m256i x2 = _mm256_set1_epi32(static_cast<int>(stream.b));
    __m256i x3 = _mm256_set1_epi32(static_cast<int>(stream.c));
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += detail::kPhiloxW0;
        k1 += detail::kPhiloxW1;
      }
      const __m256i e0 = _mm256_mul_epu32(x0, m0);
      const __m256i o0 = _mm256_mul_epu32(_mm256_srli_epi64(x0, 32), m0);
      const __m256i e1 = _mm256_mul_epu32(x2, m1);
      const __m256i o1 = _mm256_mul_epu32(_mm256_srli_epi64(x2, 32), m1);
      const __m256i hi0 = _mm256_blend_epi32(_mm256_srli_epi64(e0, 32), o0, 0xAA);
      const __m256i lo0 = _mm256_blend_epi32(e0, _mm256_slli_epi64(o0, 32), 0xAA);
      const __m256i hi1 = _mm256_blend_epi32(_mm256_srli_epi64(e1, 32), o1, 0xAA);
      const __m256i lo1 = _mm256_blend_epi32(e1, _mm256_slli_epi64(o1, 32), 0xAA);
      x0 = _mm256_xor_si256(_mm256_xor_si256(hi1, x1), _mm256_set1_epi32(static_cast<int>(k0)));
      x1 = lo1;
      x2 = _mm256_xor_si256(_mm256_xor_si256(hi0, x3), _mm256_set1_epi32(static_cast<int>(k1)));
      x3 = lo0;
    }
    _mm256_store_si256(reinterpret_cast<__m256i*>(w[0]), x0);
    _mm256_store_si256(reinterpret_cast<__m256i*>(w[1]), x1);
    _mm256_store_si256(reinterpret_cast<__m256i*>(w[2]), x2);
    _mm256_store_si256(reinterpret_cast<__m256i*>(w[3]), x3);
    double* dst = out.data() + 2 * b;
    for (int k = 0; k < 8; ++k) {
      dst[2 * k] = uniform_open(std::uint64_t{w[0][k]} | (std::uint64_t{w[1][k]} << 32));
      dst[2 * k + 1] = uniform_open(std::uint64_t{w[2][k]} | (std::uint64_t{w[3][k]} << 32));
    }
  }
  return blocks;
}

__attribute__((target("avx2"))) void central_avx2(const double* u, double* v, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) v[i] = central_quantile(u[i] - 0.5);
}

__attribute__((target("avx512f,avx512dq"))) inline __m512d uniform_open_avx512(__m256i lo,
                                                                              __m256i hi) {
  const __m512i bits = _mm512_or_si512(_mm512_cvtepu32_epi64(lo),
                                       _mm512_slli_epi64(_mm512_cvtepu32_epi64(hi), 32));
  return _mm512_mul_pd(
      _mm512_add_pd(_mm512_cvtepu64_pd(_mm512_srli_epi64(bits, 12)), _mm512_set1_pd(0.5)),
      _mm512_set1_pd(0x1.0p-52));
}

// Sixteen blocks at a time; the 64-bit to double conversion is exact because
// the value has at most 53 significant bits.
__attribute__((target("avx512f,avx512dq"))) std::size_t fill_uniforms_avx512(
    const PhiloxKey& key, StreamId stream, std::span<double> out) {
  const std::size_t blocks = out.size() / 32 * 16;
  const __m512i m0 = _mm512_set1_epi64(detail::kPhiloxM0);
  const __m512i m1 = _mm512_set1_epi64(detail::kPhiloxM1);
  const __m512i lane = _mm512_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);
  const __m512i even_idx = _mm512_setr_epi64(0, 8, 1, 9, 2, 10, 3, 11);
  const __m512i odd_idx = _mm512_setr_epi64(4, 12, 5, 13, 6, 14, 7, 15);
  constexpr __mmask16 kOdd = 0xAAAA;
  for (std::size_t b = 0; b < blocks; b += 16) {
    __m512i x0 = _mm512_add_epi32(_mm512_set1_epi32(static_cast<int>(b)), lane);
    __m512i x1 = _mm512_set1_epi32(static_cast<int>(stream.a));
    __m512i x2 = _mm512_set1_epi32(static_cast<int>(stream.b));
    __m512i x3 = _mm512_set1_epi32(static_cast<int>(stream.c));
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += detail::kPhiloxW0;
        k1 += detail::kPhiloxW1;
      }
      const __m512i e0 = _mm512_mul_epu32(x0, m0);
      const __m512i o0 = _mm512_mul_epu32(_mm512_srli_epi64(x0, 32), m0);
      const __m512i e1 = _mm512_mul_epu32(x2, m1);
      const __m512i o1 = _mm512_mul_epu32(_mm512_srli_epi64(x2, 32), m1);
      const __m512i hi0 = _mm512_mask_blend_epi32(kOdd, _mm512_srli_epi64(e0, 32), o0);
      const __m512i lo0 = _mm512_mask_blend_epi32(kOdd, e0, _mm512_slli_epi64(o0, 32));
      const __m512i hi1 = _mm512_mask_blend_epi32(kOdd, _mm512_srli_epi64(e1, 32), o1);
      const __m512i lo1 = _mm512_mask_blend_epi32(kOdd, e1, _mm512_slli_epi64(o1, 32));
      x0 = _mm512_xor_si512(_mm512_xor_si512(hi1, x1), _mm512_set1_epi32(static_cast<int>(k0)));
      x1 = lo1;
      x2 = _mm512_xor_si512(_mm512_xor_si512(hi0, x3), _mm512_set1_epi32(static_cast<int>(k1)));
      x3 = lo0;
    }
    double* dst = out.data() + 2 * b;
    for (int h = 0; h < 2; ++h) {
      const __m512d first = h == 0 ? uniform_open_avx512(_mm512_castsi512_si256(x0), _mm512_castsi512_si256(x1))
                                   : uniform_open_avx512(_mm512_extracti64x4_epi64(x0, 1),
                                                _mm512_extracti64x4_epi64(x1, 1));
      const __m512d second = h == 0 ? uniform_open_avx512(_mm512_castsi512_si256(x2), _mm512_castsi512_si256(x3))
                                    : uniform_open_avx512(_mm512_extracti64x4_epi64(x2, 1),
                                                 _mm512_extracti64x4_epi64(x3, 1));
      _mm512_storeu_pd(dst + 16 * h, _mm512_permutex2var_pd(first, even_idx, second));
      _mm512_storeu_pd(dst + 16 * h + 8, _mm512_permutex2var_pd(first, odd_idx, second));
    }
  }
  return blocks;
}

__attribute__((target("avx512f,avx512dq"))) void central_avx512(
    const double* u, double* v, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) v[i] = central_quantile(u[i] - 0.5);
}

// LENMAP_SIMD=scalar or avx2 caps the instruction set; results are identical
// either way.
int simd_cap() {
  static const int cap = [] {
    const char* env = std::getenv("LENMAP_SIMD");
    if (env == nullptr) return 2;
    const std::string_view v(env);
    return v == "scalar" ? 0 : v == "avx2" ? 1 : 2;
  }();
  return cap;
}

bool have_avx512() {
  static const bool value = simd_cap() >= 2 && __builtin_cpu_supports("avx512f") &&
                            __builtin_cpu_supports("avx512dq");
  return value;
}

bool have_avx2() {
  static const bool value = simd_cap() >= 1 && __builtin_cpu_supports("avx2");
  return value;
}

#endif

}  // namespace

void fill_uniforms(const PhiloxKey& key, StreamId stream, std::span<double> out) {
  std::size_t blocks = 0;
#if LENMAP_X86_DISPATCH
  if (have_avx512()) {
    blocks = fill_uniforms_avx512(key, stream, out);
  } else if (have_avx2()) {
    blocks = fill_uniforms_avx2(key, stream, out);
  }
#endif
  fill_uniforms_scalar(key, stream, static_cast<std::uint32_t>(blocks), out.subspan(2 * blocks));
}

void fill_normals(const PhiloxKey& key, StreamId stream, std::span<double> out) {
  fill_uniforms(key, stream, out);
  // The central branch covers 85% of draws; evaluate it everywhere, then
  // redo the tail draws one by one with the full quantile.
  constexpr std::size_t kChunk = 512;
  double uniforms[kChunk];
  std::uint32_t tail[kChunk];
  for (std::size_t base = 0; base < out.size(); base += kChunk) {
    const std::size_t m = std::min(kChunk, out.size() - base);
    double* v = out.data() + base;
    std::copy_n(v, m, uniforms);
#if LENMAP_X86_DISPATCH
    if (have_avx512()) {
      central_avx512(uniforms, v, m);
    } else if (have_avx2()) {
      central_avx2(uniforms, v, m);
    } else {
      central_scalar(uniforms, v, m);
    }
#else
    central_scalar(uniforms, v, m);
#endif
    std::size_t tails = 0;
    for (std::size_t i = 0; i < m; ++i) {
      tail[tails] = static_cast<std::uint32_t>(i);
      tails += std::fabs(uniforms[i] - 0.5) > 0.425 ? 1 : 0;
    }
    for (std::size_t k = 0; k < tails; ++k) v[tail[k]] = normal_quantile(uniforms[tail[k]]);
  }
}

}  // namespace lenmap
