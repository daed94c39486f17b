#include "kernels_impl.hpp"

#include <immintrin.h>

namespace tdpkit::kernels::avx2 {

namespace {

// Voxel tile: 4 ymm accumulators of 4 doubles each.
constexpr std::size_t kTile = 16;

inline __m256d widen(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }

} // namespace

void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out) {
  std::size_t i = begin;
  for (; i + kTile <= end; i += kTile) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    for (std::size_t s = 0; s < n; ++s) {
      const float* row = data + s * m + i;
      if (signs[s] > 0) {
        a0 = _mm256_add_pd(a0, widen(row));
        a1 = _mm256_add_pd(a1, widen(row + 4));
        a2 = _mm256_add_pd(a2, widen(row + 8));
        a3 = _mm256_add_pd(a3, widen(row + 12));
      } else {
        a0 = _mm256_sub_pd(a0, widen(row));
        a1 = _mm256_sub_pd(a1, widen(row + 4));
        a2 = _mm256_sub_pd(a2, widen(row + 8));
        a3 = _mm256_sub_pd(a3, widen(row + 12));
      }
    }
    double* o = out + (i - begin);
    _mm256_storeu_pd(o, a0);
    _mm256_storeu_pd(o + 4, a1);
    _mm256_storeu_pd(o + 8, a2);
    _mm256_storeu_pd(o + 12, a3);
  }
  for (; i + 4 <= end; i += 4) {
    __m256d a = _mm256_setzero_pd();
    for (std::size_t s = 0; s < n; ++s) {
      const __m256d x = widen(data + s * m + i);
      a = signs[s] > 0 ? _mm256_add_pd(a, x) : _mm256_sub_pd(a, x);
    }
    _mm256_storeu_pd(out + (i - begin), a);
  }
  for (; i < end; ++i) {
    double a = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double x = static_cast<double>(data[s * m + i]);
      a = signs[s] > 0 ? a + x : a - x;
    }
    out[i - begin] = a;
  }
}

double ratio_min(const float* values, std::size_t count, double scale) {
  const __m256d vscale = _mm256_set1_pd(scale);
  const __m256d step = _mm256_set1_pd(4.0);
  __m256d rank = _mm256_setr_pd(1.0, 2.0, 3.0, 4.0);
  __m256d best = _mm256_set1_pd(__builtin_inf());
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const __m256d num = _mm256_mul_pd(widen(values + k), vscale);
    best = _mm256_min_pd(best, _mm256_div_pd(num, rank));
    rank = _mm256_add_pd(rank, step);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best);
  double r = lanes[0];
  for (int l = 1; l < 4; ++l) {
    r = lanes[l] < r ? lanes[l] : r;
  }
  for (; k < count; ++k) {
    const double v = (static_cast<double>(values[k]) * scale) / static_cast<double>(k + 1);
    r = v < r ? v : r;
  }
  return r;
}

} // namespace tdpkit::kernels::avx2
