#pragma once

#include "tdpkit/volume.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tdpkit {

enum class Sidedness { TwoSided, OneSided };
enum class PValueMode { Parametric, Permutation };

std::string to_string(Sidedness s);
Sidedness parse_sidedness(const std::string& s);
std::string to_string(PValueMode m);
PValueMode parse_pvalue_mode(const std::string& s);

/// w sign-flip transforms over n subjects. Row 0 is the identity.
class FlipMatrix {
public:
  FlipMatrix(std::size_t w, std::size_t n, std::uint64_t seed, std::vector<std::int8_t> signs);

  std::size_t w() const noexcept { return w_; }
  std::size_t n() const noexcept { return n_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const std::int8_t> row(std::size_t j) const {
    return std::span<const std::int8_t>(signs_).subspan(j * n_, n_);
  }

private:
  std::size_t w_;
  std::size_t n_;
  std::uint64_t seed_;
  std::vector<std::int8_t> signs_;
};

/// Rows 1..w-1 are i.i.d. uniform over {-1,+1}^n. Row j depends only on
/// (seed, j), never on how many rows are generated or in which order.
FlipMatrix gen_sign_flips(std::size_t n, std::size_t w, std::uint64_t seed);

struct StatisticMatrix {
  std::size_t w = 0;
  std::size_t m = 0;
  std::vector<double> values; // w x m, row-major

  std::span<const double> row(std::size_t j) const {
    return std::span<const double>(values).subspan(j * m, m);
  }
};

/// One-sample t statistic of every flipped sample. sd uses the n-1
/// denominator. sd = 0 gives t = 0 when the mean is 0 and t = +-inf otherwise.
StatisticMatrix one_sample_t(const SubjectStack& stack, const FlipMatrix& flips,
                             std::size_t workers = 1);

/// Smallest p-value ever emitted (smallest positive normal float).
inline constexpr float kMinPValue = 1.17549435e-38f;

/// Student-t p-value, clamped to [kMinPValue, 1].
double t_to_p(double t, int df, Sidedness sidedness);

class PermPValueMatrix {
public:
  PermPValueMatrix() = default;
  PermPValueMatrix(std::size_t w, std::size_t m, std::vector<float> values);

  std::size_t w() const noexcept { return w_; }
  std::size_t m() const noexcept { return m_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> row(std::size_t j) const {
    return std::span<const float>(values_).subspan(j * m_, m_);
  }
  std::span<const float> observed() const { return row(0); }
  std::vector<float> sorted_row(std::size_t j) const;

  Sidedness sidedness = Sidedness::TwoSided;
  PValueMode mode = PValueMode::Parametric;
  int df = 1;
  std::uint64_t seed = 0;

private:
  std::size_t w_ = 0;
  std::size_t m_ = 0;
  std::vector<float> values_;
};

struct PValueOptions {
  Sidedness sidedness = Sidedness::TwoSided;
  PValueMode mode = PValueMode::Parametric;
  std::size_t workers = 1;
};

/// Row 0 is the observed p-value map.
PermPValueMatrix build_perm_pvalues(const SubjectStack& stack, std::size_t w, std::uint64_t seed,
                                    const PValueOptions& options = {});
PermPValueMatrix build_perm_pvalues(const SubjectStack& stack, const FlipMatrix& flips,
                                    const PValueOptions& options = {});

/// Streaming form of the parametric pipeline for matrices too large to hold.
/// For each transform j, `visit(j, curve)` receives the `keep` smallest
/// p-values of row j in ascending order. Values are bitwise identical to
/// sorting the corresponding row of build_perm_pvalues. `visit` is invoked
/// concurrently for distinct rows when workers > 1.
void for_each_sorted_curve(const SubjectStack& stack, const FlipMatrix& flips,
                           Sidedness sidedness, std::size_t keep, std::size_t workers,
                           const std::function<void(std::size_t, std::span<const float>)>& visit);

/// Observed (identity) p-value and statistic maps.
struct ObservedMaps {
  std::vector<float> p;
  std::vector<float> t;
  std::vector<float> z; // signed equivalent normal deviate of the two-sided p
};
ObservedMaps observed_maps(const SubjectStack& stack, Sidedness sidedness);

// VXP1 <w> <m>\n + w*m f32, plus `<path>.json` sidecar.
void write_pmat(const PermPValueMatrix& pmat, const std::filesystem::path& path);
PermPValueMatrix read_pmat(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& pmat_path);

// Ascending sort for values in (0, 1]; LSD radix on the IEEE bit pattern.
void sort_pvalues(std::span<float> values);

} // namespace tdpkit
