#include "tdpkit/kernels.hpp"

#include "kernels_impl.hpp"
#include "tdpkit/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace tdpkit::kernels {

namespace {

constexpr KernelTable kScalar{Isa::Scalar, &scalar::signed_sums, &scalar::ratio_min};
#if defined(TDPKIT_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, &avx2::signed_sums, &avx2::ratio_min};
#endif
#if defined(TDPKIT_HAVE_NEON)
constexpr KernelTable kNeon{Isa::Neon, &neon::signed_sums, &neon::ratio_min};
#endif

Isa initial_isa() {
  if (const char* env = std::getenv("TDPKIT_ISA")) {
    const std::string v(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (v == isa_name(isa) && isa_supported(isa)) {
        return isa;
      }
    }
  }
  return best_isa();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{&kernels_for(initial_isa())};
  return table;
}

} // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
  case Isa::Scalar: return "scalar";
  case Isa::Avx2: return "avx2";
  case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
  case Isa::Scalar:
    return true;
  case Isa::Avx2:
#if defined(TDPKIT_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
  case Isa::Neon:
#if defined(TDPKIT_HAVE_NEON)
    return true;
#else
    return false;
#endif
  }
  return false;
}

Isa best_isa() noexcept {
  if (isa_supported(Isa::Avx2)) {
    return Isa::Avx2;
  }
  if (isa_supported(Isa::Neon)) {
    return Isa::Neon;
  }
  return Isa::Scalar;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    fail(ErrorCode::InvalidArg, "ISA '" + std::string(isa_name(isa)) + "' not supported on this host");
  }
  switch (isa) {
#if defined(TDPKIT_HAVE_AVX2)
  case Isa::Avx2: return kAvx2;
#endif
#if defined(TDPKIT_HAVE_NEON)
  case Isa::Neon: return kNeon;
#endif
  default: return kScalar;
  }
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) { slot().store(&kernels_for(isa), std::memory_order_release); }

} // namespace tdpkit::kernels
