#include "tdpkit/templates.hpp"

#include "tdpkit/error.hpp"
#include "tdpkit/kernels.hpp"
#include "tdpkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tdpkit {

namespace {

void require_sorted_curve(std::span<const float> curve) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i] > 0.0f && curve[i] <= 1.0f)) {
      fail(ErrorCode::InvalidArg, "sorted curve values must lie in (0, 1]");
    }
    if (i > 0 && curve[i] < curve[i - 1]) {
      fail(ErrorCode::InvalidArg, "p-value curve is not sorted ascending");
    }
  }
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorCode::InvalidArg, "alpha must lie in (0, 1)");
  }
}

// Smallest double lambda with p <= l_rank(lambda). l is monotone in lambda
// under rounding, so a local search from the real-valued estimate suffices.
double simes_rank_onset(double p, std::size_t rank, std::size_t m, std::size_t delta, double estimate) {
  auto crosses_at = [&](double lambda) { return p <= simes_ell(rank, m, delta, lambda); };
  double lambda = estimate;
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (crosses_at(lambda)) {
    for (double prev = std::nextafter(lambda, -inf); prev > 0.0 && crosses_at(prev);
         prev = std::nextafter(lambda, -inf)) {
      lambda = prev;
    }
  } else {
    while (!crosses_at(lambda)) {
      lambda = std::nextafter(lambda, inf);
    }
  }
  return lambda;
}

CriticalVector zero_template(std::size_t m, std::size_t constrained, TemplateProvenance prov) {
  return CriticalVector(std::vector<double>(m, 0.0), constrained, std::move(prov));
}

} // namespace

std::string to_string(FamilyKind f) { return f == FamilyKind::Simes ? "simes" : "learned"; }

FamilyKind parse_family(const std::string& s) {
  if (s == "simes") {
    return FamilyKind::Simes;
  }
  if (s == "learned") {
    return FamilyKind::Learned;
  }
  fail(ErrorCode::InvalidArg, "unknown template family '" + s + "'");
}

CriticalVector::CriticalVector(std::vector<double> ell, std::size_t constrained,
                               TemplateProvenance provenance)
    : ell_(std::move(ell)), constrained_(constrained), provenance_(std::move(provenance)) {
  if (ell_.empty()) {
    fail(ErrorCode::InvalidArg, "critical vector must have m >= 1");
  }
  if (constrained_ > ell_.size()) {
    fail(ErrorCode::InvalidArg, "constrained rank count exceeds m");
  }
  for (std::size_t i = 0; i < constrained_; ++i) {
    if (!(ell_[i] >= 0.0 && ell_[i] <= 1.0)) {
      fail(ErrorCode::InvalidArg, "critical vector entries must lie in [0, 1]");
    }
    if (i > 0 && ell_[i] < ell_[i - 1]) {
      fail(ErrorCode::InvalidArg, "critical vector must be non-decreasing");
    }
  }
  for (std::size_t i = constrained_; i < ell_.size(); ++i) {
    ell_[i] = 0.0;
  }
}

double simes_ell(std::size_t rank, std::size_t m, std::size_t delta, double lambda) {
  if (rank <= delta) {
    return 0.0;
  }
  const double v = (static_cast<double>(rank - delta) * lambda) / static_cast<double>(m - delta);
  return std::clamp(v, 0.0, 1.0);
}

CriticalVector simes_template(std::size_t m, std::size_t delta, double lambda) {
  if (m == 0) {
    fail(ErrorCode::InvalidArg, "m must be >= 1");
  }
  if (delta >= m) {
    fail(ErrorCode::InvalidArg, "shift delta must be < m");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::InvalidArg, "lambda must be finite and >= 0");
  }
  std::vector<double> ell(m);
  for (std::size_t i = 1; i <= m; ++i) {
    ell[i - 1] = simes_ell(i, m, delta, lambda);
  }
  TemplateProvenance prov;
  prov.family = FamilyKind::Simes;
  prov.delta = delta;
  prov.lambda_cal = lambda;
  return CriticalVector(std::move(ell), m, prov);
}

double pivotal_simes(std::span<const float> sorted_curve, std::size_t delta) {
  const std::size_t m = sorted_curve.size();
  if (delta >= m) {
    fail(ErrorCode::InvalidArg, "shift delta must be < m");
  }
  require_sorted_curve(sorted_curve);
  const double scale = static_cast<double>(m - delta);
  const double raw = kernels::active().ratio_min(sorted_curve.data() + delta, m - delta, scale);

  // Ranks whose real-valued ratio is within rounding of the minimum.
  const double bound = raw * (1.0 + 1e-9);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = delta + 1; i <= m; ++i) {
    const double p = sorted_curve[i - 1];
    if (p * scale > bound * static_cast<double>(i - delta)) {
      continue;
    }
    const double estimate = (p * scale) / static_cast<double>(i - delta);
    best = std::min(best, simes_rank_onset(p, i, m, delta, estimate));
  }
  return best;
}

LearnedFamily::LearnedFamily(std::size_t m, std::size_t k_max, std::size_t w_tilde, std::vector<float> rows)
    : m_(m), k_max_(k_max), w_tilde_(w_tilde), rows_(std::move(rows)) {
  if (k_max_ < 1 || k_max_ > m_) {
    fail(ErrorCode::InvalidArg, "k_max must lie in 1..m");
  }
  if (w_tilde_ < 1) {
    fail(ErrorCode::InvalidArg, "learned family needs w_tilde >= 1");
  }
  if (rows_.size() != k_max_ * w_tilde_) {
    fail(ErrorCode::DimensionMismatch, "learned family payload is not k_max * w_tilde");
  }
}

LearnedFamilyBuilder::LearnedFamilyBuilder(std::size_t m, std::size_t k_max, std::size_t w_tilde)
    : m_(m), k_max_(k_max), w_tilde_(w_tilde) {
  if (k_max_ < 1 || k_max_ > m_) {
    fail(ErrorCode::InvalidArg, "k_max must lie in 1..m");
  }
  if (w_tilde_ < 1) {
    fail(ErrorCode::InvalidArg, "learned family needs w_tilde >= 1");
  }
  rows_.resize(k_max_ * w_tilde_);
}

void LearnedFamilyBuilder::add_curve(std::size_t transform, std::span<const float> sorted_prefix) {
  if (transform >= w_tilde_) {
    fail(ErrorCode::OutOfBounds, "transform index outside 0..w_tilde-1");
  }
  if (sorted_prefix.size() < k_max_) {
    fail(ErrorCode::DimensionMismatch, "curve shorter than k_max");
  }
  for (std::size_t i = 0; i < k_max_; ++i) {
    rows_[i * w_tilde_ + transform] = sorted_prefix[i];
  }
}

LearnedFamily LearnedFamilyBuilder::finish(std::size_t workers) && {
  parallel_for(k_max_, workers, [&](std::size_t i, std::size_t) {
    auto first = rows_.begin() + static_cast<std::ptrdiff_t>(i * w_tilde_);
    std::sort(first, first + static_cast<std::ptrdiff_t>(w_tilde_));
  });
  return LearnedFamily(m_, k_max_, w_tilde_, std::move(rows_));
}

LearnedFamily learn_family(const PermPValueMatrix& external, std::size_t k_max, std::size_t workers) {
  LearnedFamilyBuilder builder(external.m(), k_max, external.w());
  parallel_for(external.w(), workers, [&](std::size_t t, std::size_t) {
    builder.add_curve(t, external.sorted_row(t));
  });
  return std::move(builder).finish(workers);
}

LearnedFamily learn_family(const SubjectStack& stack, const FlipMatrix& flips, Sidedness sidedness,
                           std::size_t k_max, std::size_t workers) {
  LearnedFamilyBuilder builder(stack.m(), k_max, flips.w());
  for_each_sorted_curve(stack, flips, sidedness, k_max, workers,
                        [&](std::size_t t, std::span<const float> curve) { builder.add_curve(t, curve); });
  return std::move(builder).finish(workers);
}

void require_family_matches(const LearnedFamily& family, std::size_t m) {
  if (family.m() != m) {
    fail(ErrorCode::DimensionMismatch, "external data has m = " + std::to_string(family.m()) +
                                           ", analysis has m = " + std::to_string(m));
  }
}

CriticalVector learned_template(const LearnedFamily& family, std::size_t b) {
  if (b < 1 || b > family.w_tilde()) {
    fail(ErrorCode::InvalidArg, "quantile index b must lie in 1..w_tilde");
  }
  std::vector<double> ell(family.m(), 0.0);
  for (std::size_t i = 1; i <= family.k_max(); ++i) {
    ell[i - 1] = family.row(i)[b - 1];
  }
  TemplateProvenance prov;
  prov.family = FamilyKind::Learned;
  prov.k_max = family.k_max();
  prov.w_tilde = family.w_tilde();
  prov.lambda_cal = static_cast<double>(b) / static_cast<double>(family.w_tilde());
  return CriticalVector(std::move(ell), family.k_max(), prov);
}

std::size_t pivotal_learned_index(std::span<const float> sorted_curve, const LearnedFamily& family) {
  if (sorted_curve.size() < family.k_max()) {
    fail(ErrorCode::DimensionMismatch, "curve shorter than k_max");
  }
  const auto prefix = sorted_curve.first(family.k_max());
  require_sorted_curve(prefix);
  std::size_t b = family.w_tilde();
  for (std::size_t i = 1; i <= family.k_max() && b > 0; ++i) {
    const auto row = family.row(i);
    const auto below = std::lower_bound(row.begin(), row.end(), prefix[i - 1]) - row.begin();
    b = std::min(b, static_cast<std::size_t>(below));
  }
  return b;
}

double pivotal_learned(std::span<const float> sorted_curve, const LearnedFamily& family) {
  return static_cast<double>(pivotal_learned_index(sorted_curve, family)) /
         static_cast<double>(family.w_tilde());
}

std::size_t max_crossings(double alpha, std::size_t w) {
  const double x = alpha * static_cast<double>(w);
  double f = std::floor(x);
  // alpha * w that should be an integer but rounded just below it.
  if (x - f > 1.0 - 1e-9) {
    f += 1.0;
  }
  return static_cast<std::size_t>(f);
}

double calibrate(std::span<const double> pivotals, double alpha, PivotalKind kind) {
  require_alpha(alpha);
  const std::size_t w = pivotals.size();
  if (w == 0) {
    fail(ErrorCode::InvalidArg, "calibration needs at least one pivotal");
  }
  std::vector<double> v(pivotals.begin(), pivotals.end());
  std::sort(v.begin(), v.end());
  const std::size_t needed = w - max_crossings(alpha, w); // >= 1 since alpha < 1
  const double threshold = v[w - needed];                  // needed-th largest
  if (kind == PivotalKind::LastCleared) {
    return std::max(threshold, 0.0);
  }
  // Largest candidate strictly below the threshold; 0 when none is.
  const auto it = std::lower_bound(v.begin(), v.end(), threshold);
  if (it == v.begin()) {
    return 0.0;
  }
  return std::max(*(it - 1), 0.0);
}

CalibratedTemplate calibrate_simes(const PermPValueMatrix& pmat, std::size_t delta, double alpha,
                                   std::size_t workers) {
  require_alpha(alpha);
  if (delta >= pmat.m()) {
    fail(ErrorCode::InvalidArg, "shift delta must be < m");
  }
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.kind = PivotalKind::CrossingOnset;
  cal.pivotals.resize(pmat.w());
  parallel_for(pmat.w(), workers, [&](std::size_t j, std::size_t) {
    cal.pivotals[j] = pivotal_simes(pmat.sorted_row(j), delta);
  });
  cal.lambda_cal = calibrate(cal.pivotals, alpha, cal.kind);
  CriticalVector ell = simes_template(pmat.m(), delta, cal.lambda_cal);
  auto& prov = ell.provenance();
  prov.w = pmat.w();
  prov.alpha = alpha;
  prov.seed = pmat.seed;
  return {std::move(ell), std::move(cal)};
}

CalibratedTemplate calibrate_simes(const SubjectStack& stack, const FlipMatrix& flips,
                                   Sidedness sidedness, std::size_t delta, double alpha,
                                   std::size_t workers) {
  require_alpha(alpha);
  if (delta >= stack.m()) {
    fail(ErrorCode::InvalidArg, "shift delta must be < m");
  }
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.kind = PivotalKind::CrossingOnset;
  cal.pivotals.resize(flips.w());
  for_each_sorted_curve(stack, flips, sidedness, stack.m(), workers,
                        [&](std::size_t j, std::span<const float> curve) {
                          cal.pivotals[j] = pivotal_simes(curve, delta);
                        });
  cal.lambda_cal = calibrate(cal.pivotals, alpha, cal.kind);
  CriticalVector ell = simes_template(stack.m(), delta, cal.lambda_cal);
  auto& prov = ell.provenance();
  prov.w = flips.w();
  prov.alpha = alpha;
  prov.seed = flips.seed();
  return {std::move(ell), std::move(cal)};
}

namespace {

CalibratedTemplate finish_learned(const LearnedFamily& family, CalibrationResult cal, std::size_t w,
                                  std::uint64_t seed) {
  cal.lambda_cal = calibrate(cal.pivotals, cal.alpha, cal.kind);
  const auto b = static_cast<std::size_t>(std::llround(cal.lambda_cal * static_cast<double>(family.w_tilde())));
  TemplateProvenance prov;
  prov.family = FamilyKind::Learned;
  prov.k_max = family.k_max();
  prov.w_tilde = family.w_tilde();
  CriticalVector ell = b == 0 ? zero_template(family.m(), family.k_max(), prov) : learned_template(family, b);
  auto& p = ell.provenance();
  p.w = w;
  p.alpha = cal.alpha;
  p.seed = seed;
  p.lambda_cal = cal.lambda_cal;
  return {std::move(ell), std::move(cal)};
}

} // namespace

CalibratedTemplate calibrate_learned(const PermPValueMatrix& pmat, const LearnedFamily& family,
                                     double alpha, std::size_t workers) {
  require_alpha(alpha);
  require_family_matches(family, pmat.m());
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.kind = PivotalKind::LastCleared;
  cal.pivotals.resize(pmat.w());
  parallel_for(pmat.w(), workers, [&](std::size_t j, std::size_t) {
    cal.pivotals[j] = pivotal_learned(pmat.sorted_row(j), family);
  });
  return finish_learned(family, std::move(cal), pmat.w(), pmat.seed);
}

CalibratedTemplate calibrate_learned(const SubjectStack& stack, const FlipMatrix& flips,
                                     Sidedness sidedness, const LearnedFamily& family, double alpha,
                                     std::size_t workers) {
  require_alpha(alpha);
  require_family_matches(family, stack.m());
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.kind = PivotalKind::LastCleared;
  cal.pivotals.resize(flips.w());
  for_each_sorted_curve(stack, flips, sidedness, family.k_max(), workers,
                        [&](std::size_t j, std::span<const float> curve) {
                          cal.pivotals[j] = pivotal_learned(curve, family);
                        });
  return finish_learned(family, std::move(cal), flips.w(), flips.seed());
}

bool crosses(std::span<const float> sorted_curve, const CriticalVector& ell) {
  const std::size_t k = std::min(ell.constrained(), sorted_curve.size());
  for (std::size_t i = 1; i <= k; ++i) {
    if (static_cast<double>(sorted_curve[i - 1]) <= ell.at(i)) {
      return true;
    }
  }
  return false;
}

JerCheck jer_check(const CriticalVector& ell, const PermPValueMatrix& pmat, double alpha,
                   std::size_t workers) {
  require_alpha(alpha);
  if (ell.m() != pmat.m()) {
    fail(ErrorCode::DimensionMismatch, "template m differs from p-value matrix m");
  }
  std::vector<std::uint8_t> hit(pmat.w(), 0);
  parallel_for(pmat.w(), workers, [&](std::size_t j, std::size_t) {
    hit[j] = crosses(pmat.sorted_row(j), ell) ? 1 : 0;
  });
  JerCheck r;
  r.crossings = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), std::uint8_t{1}));
  r.allowed = max_crossings(alpha, pmat.w());
  r.pass = r.crossings <= r.allowed;
  return r;
}

} // namespace tdpkit
