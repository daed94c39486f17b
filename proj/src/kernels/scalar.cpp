#include "kernels_impl.hpp"

namespace tdpkit::kernels::scalar {

void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out) {
  const std::size_t len = end - begin;
  for (std::size_t i = 0; i < len; ++i) {
    out[i] = 0.0;
  }
  for (std::size_t s = 0; s < n; ++s) {
    const float* row = data + s * m + begin;
    if (signs[s] > 0) {
      for (std::size_t i = 0; i < len; ++i) {
        out[i] += static_cast<double>(row[i]);
      }
    } else {
      for (std::size_t i = 0; i < len; ++i) {
        out[i] -= static_cast<double>(row[i]);
      }
    }
  }
}

double ratio_min(const float* values, std::size_t count, double scale) {
  double best = __builtin_inf();
  for (std::size_t k = 0; k < count; ++k) {
    const double r = (static_cast<double>(values[k]) * scale) / static_cast<double>(k + 1);
    if (r < best) {
      best = r;
    }
  }
  return best;
}

} // namespace tdpkit::kernels::scalar
