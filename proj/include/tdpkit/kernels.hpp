#pragma once

// Data-parallel inner loops of the permutation engine. Every kernel has a
// scalar reference implementation; vector variants perform the same IEEE
// operations in the same order per element, so results are bitwise equal
// across ISAs (see tests/unit/test_kernels.cpp).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace tdpkit::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa best_isa() noexcept;

struct KernelTable {
  Isa isa;

  // out[i - begin] = sum_s signs[s] * data[s * m + i] for i in [begin, end),
  // accumulated in double in subject order. data is n x m subject-major.
  void (*signed_sums)(const float* data, std::size_t n, std::size_t m,
                      const std::int8_t* signs, std::size_t begin, std::size_t end,
                      double* out);

  // min_k (double(values[k]) * scale) / double(k + 1) over k in [0, count).
  // Used for the shifted-Simes pivotal; `values` starts at rank delta + 1.
  double (*ratio_min)(const float* values, std::size_t count, double scale);
};

const KernelTable& kernels_for(Isa isa);

/// Table selected at first use: TDPKIT_ISA env override if set and supported,
/// otherwise the best ISA the host supports.
const KernelTable& active();
Isa active_isa();
// Overrides the process-wide selection. Throws if the host lacks the ISA.
void set_active_isa(Isa isa);

} // namespace tdpkit::kernels
