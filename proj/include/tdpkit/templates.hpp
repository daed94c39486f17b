#pragma once

#include "tdpkit/perm.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdpkit {

enum class FamilyKind { Simes, Learned };

std::string to_string(FamilyKind f);
FamilyKind parse_family(const std::string& s);

struct TemplateProvenance {
  FamilyKind family = FamilyKind::Simes;
  std::optional<std::size_t> delta;
  std::optional<std::size_t> k_max;
  std::size_t w = 0;
  std::optional<std::size_t> w_tilde;
  double alpha = 0.0;
  double lambda_cal = 0.0;
  std::uint64_t seed = 0;
  std::string external_mode = "none"; // none | reuse-data | external
};

/// Non-decreasing vector in [0,1]^m compared against sorted p-values.
/// Ranks above `constrained()` (1-based) are unconstrained: they are skipped
/// in the bound maximization and never count as crossings.
class CriticalVector {
public:
  CriticalVector() = default;
  CriticalVector(std::vector<double> ell, std::size_t constrained, TemplateProvenance provenance = {});

  std::size_t m() const noexcept { return ell_.size(); }
  std::size_t constrained() const noexcept { return constrained_; }
  bool is_constrained(std::size_t rank) const noexcept { return rank >= 1 && rank <= constrained_; }
  // 1-based rank, as in the bound formula. 0 for unconstrained ranks.
  double at(std::size_t rank) const { return ell_[rank - 1]; }
  std::span<const double> values() const noexcept { return ell_; }
  const TemplateProvenance& provenance() const noexcept { return provenance_; }
  TemplateProvenance& provenance() noexcept { return provenance_; }

private:
  std::vector<double> ell_;
  std::size_t constrained_ = 0;
  TemplateProvenance provenance_;
};

// ---- shifted Simes family ----

/// l_i(lambda) = clamp((i - delta) * lambda / (m - delta), 0, 1), i 1-based.
double simes_ell(std::size_t rank, std::size_t m, std::size_t delta, double lambda);
CriticalVector simes_template(std::size_t m, std::size_t delta, double lambda);

/// Onset of crossing for one sorted curve: the smallest lambda at which some
/// rank i > delta has p_(i) <= l_i(lambda). The curve clears l(lambda) for
/// every lambda below it and crosses at it. Exact in the floating-point
/// evaluation of simes_ell, not merely approximately min_i p_(i)(m-delta)/(i-delta).
double pivotal_simes(std::span<const float> sorted_curve, std::size_t delta);

// ---- learned (order-statistic quantile) family ----

class LearnedFamily {
public:
  LearnedFamily(std::size_t m, std::size_t k_max, std::size_t w_tilde, std::vector<float> rows);

  std::size_t m() const noexcept { return m_; }
  std::size_t k_max() const noexcept { return k_max_; }
  std::size_t w_tilde() const noexcept { return w_tilde_; }
  // Ascending values of the rank-th order statistic across transforms (1-based rank).
  std::span<const float> row(std::size_t rank) const {
    return std::span<const float>(rows_).subspan((rank - 1) * w_tilde_, w_tilde_);
  }

private:
  std::size_t m_;
  std::size_t k_max_;
  std::size_t w_tilde_;
  std::vector<float> rows_; // k_max x w_tilde, rank-major
};

/// Accumulates sorted curves (one per external transform) into a family.
class LearnedFamilyBuilder {
public:
  LearnedFamilyBuilder(std::size_t m, std::size_t k_max, std::size_t w_tilde);
  // Thread-safe for distinct `transform` indices.
  void add_curve(std::size_t transform, std::span<const float> sorted_prefix);
  LearnedFamily finish(std::size_t workers = 1) &&;

private:
  std::size_t m_;
  std::size_t k_max_;
  std::size_t w_tilde_;
  std::vector<float> rows_;
};

LearnedFamily learn_family(const PermPValueMatrix& external, std::size_t k_max,
                           std::size_t workers = 1);
/// Checks the analysis m against the family (strict, no voxel remapping).
void require_family_matches(const LearnedFamily& family, std::size_t m);

/// Template at grid index b in 1..w_tilde (lambda = b / w_tilde).
CriticalVector learned_template(const LearnedFamily& family, std::size_t b);
/// Largest grid index whose template the curve strictly clears (0 when it
/// clears none): min over ranks i <= k_max of #{t : rows[i][t] < p_(i)}.
std::size_t pivotal_learned_index(std::span<const float> sorted_curve, const LearnedFamily& family);
double pivotal_learned(std::span<const float> sorted_curve, const LearnedFamily& family);

// ---- calibration ----

/// How a pivotal relates to clearance of the curve it came from.
enum class PivotalKind {
  CrossingOnset, // clears l(lambda) iff lambda < pivotal   (Simes)
  LastCleared,   // clears l(lambda) iff lambda <= pivotal  (learned grid)
};

/// Largest number of crossing transforms allowed at level alpha: floor(alpha * w).
std::size_t max_crossings(double alpha, std::size_t w);

/// Largest candidate in {0} U {pivotals} that at least w - floor(alpha w)
/// transforms clear, i.e. #{j : lambda_j > c} (CrossingOnset) or
/// #{j : lambda_j >= c} (LastCleared) >= ceil((1 - alpha) w).
double calibrate(std::span<const double> pivotals, double alpha,
                 PivotalKind kind = PivotalKind::CrossingOnset);

struct CalibrationResult {
  double lambda_cal = 0.0;
  std::vector<double> pivotals;
  double alpha = 0.0;
  PivotalKind kind = PivotalKind::CrossingOnset;
};

struct CalibratedTemplate {
  CriticalVector ell;
  CalibrationResult calibration;
};

CalibratedTemplate calibrate_simes(const PermPValueMatrix& pmat, std::size_t delta, double alpha,
                                   std::size_t workers = 1);
CalibratedTemplate calibrate_simes(const SubjectStack& stack, const FlipMatrix& flips,
                                   Sidedness sidedness, std::size_t delta, double alpha,
                                   std::size_t workers = 1);
CalibratedTemplate calibrate_learned(const PermPValueMatrix& pmat, const LearnedFamily& family,
                                     double alpha, std::size_t workers = 1);
CalibratedTemplate calibrate_learned(const SubjectStack& stack, const FlipMatrix& flips,
                                     Sidedness sidedness, const LearnedFamily& family, double alpha,
                                     std::size_t workers = 1);
/// Learned family from sign flips of `stack` (reuse-data or a real external stack).
LearnedFamily learn_family(const SubjectStack& stack, const FlipMatrix& flips, Sidedness sidedness,
                           std::size_t k_max, std::size_t workers = 1);

struct JerCheck {
  bool pass = false;
  std::size_t crossings = 0;
  std::size_t allowed = 0;
};

/// True if p_(i) <= l_i at some constrained rank.
bool crosses(std::span<const float> sorted_curve, const CriticalVector& ell);
JerCheck jer_check(const CriticalVector& ell, const PermPValueMatrix& pmat, double alpha,
                   std::size_t workers = 1);

// ---- persistence (JSON; unconstrained ranks as null) ----

std::string template_to_json(const CriticalVector& ell);
CriticalVector template_from_json(const std::string& text);
void save_template(const CriticalVector& ell, const std::filesystem::path& path);
CriticalVector load_template(const std::filesystem::path& path);

} // namespace tdpkit
