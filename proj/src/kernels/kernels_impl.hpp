#pragma once

// Raw per-ISA entry points. Deliberately free of standard-library templates:
// the ISA translation units are compiled with target flags and must not emit
// inline instantiations that the linker could pick for baseline code.

#include <cstddef>
#include <cstdint>

namespace tdpkit::kernels {

namespace scalar {
void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out);
double ratio_min(const float* values, std::size_t count, double scale);
} // namespace scalar

#if defined(TDPKIT_HAVE_AVX2)
namespace avx2 {
void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out);
double ratio_min(const float* values, std::size_t count, double scale);
} // namespace avx2
#endif

#if defined(TDPKIT_HAVE_NEON)
namespace neon {
void signed_sums(const float* data, std::size_t n, std::size_t m, const std::int8_t* signs,
                 std::size_t begin, std::size_t end, double* out);
double ratio_min(const float* values, std::size_t count, double scale);
} // namespace neon
#endif

} // namespace tdpkit::kernels
