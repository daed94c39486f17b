#include "kernels_impl.hpp"

#include <arm_neon.h>

namespace tdpkit::kernels::neon {

void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out) {
  std::size_t i = begin;
  for (; i + 4 <= end; i += 4) {
    float64x2_t lo = vdupq_n_f64(0.0);
    float64x2_t hi = vdupq_n_f64(0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const float32x4_t x = vld1q_f32(data + s * m + i);
      const float64x2_t xl = vcvt_f64_f32(vget_low_f32(x));
      const float64x2_t xh = vcvt_high_f64_f32(x);
      if (signs[s] > 0) {
        lo = vaddq_f64(lo, xl);
        hi = vaddq_f64(hi, xh);
      } else {
        lo = vsubq_f64(lo, xl);
        hi = vsubq_f64(hi, xh);
      }
    }
    vst1q_f64(out + (i - begin), lo);
    vst1q_f64(out + (i - begin) + 2, hi);
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
  const float64x2_t vscale = vdupq_n_f64(scale);
  float64x2_t rank_lo = {1.0, 2.0};
  float64x2_t rank_hi = {3.0, 4.0};
  const float64x2_t step = vdupq_n_f64(4.0);
  float64x2_t best = vdupq_n_f64(__builtin_inf());
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const float32x4_t x = vld1q_f32(values + k);
    const float64x2_t nl = vmulq_f64(vcvt_f64_f32(vget_low_f32(x)), vscale);
    const float64x2_t nh = vmulq_f64(vcvt_high_f64_f32(x), vscale);
    best = vminq_f64(best, vdivq_f64(nl, rank_lo));
    best = vminq_f64(best, vdivq_f64(nh, rank_hi));
    rank_lo = vaddq_f64(rank_lo, step);
    rank_hi = vaddq_f64(rank_hi, step);
  }
  double r = vminvq_f64(best);
  for (; k < count; ++k) {
    const double v = (static_cast<double>(values[k]) * scale) / static_cast<double>(k + 1);
    r = v < r ? v : r;
  }
  return r;
}

} // namespace tdpkit::kernels::neon
