#include "tdpkit/tdp.hpp"

#include "tdpkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

namespace tdpkit {

std::size_t tdp_bound(std::span<const float> p_values_of_set, const CriticalVector& ell) {
  const std::size_t size = p_values_of_set.size();
  if (size == 0) {
    fail(ErrorCode::EmptySet, "TDP query on an empty set");
  }
  if (size > ell.m()) {
    fail(ErrorCode::TemplateMismatch, "set is larger than the template's m");
  }
  std::vector<float> p(p_values_of_set.begin(), p_values_of_set.end());
  std::sort(p.begin(), p.end());
  const std::size_t u_max = std::min(size, ell.constrained());
  // l is non-decreasing, so #{p <= l_u} only grows with u.
  std::size_t count = 0;
  long long best = 0;
  for (std::size_t u = 1; u <= u_max; ++u) {
    const double lu = ell.at(u);
    while (count < size && static_cast<double>(p[count]) <= lu) {
      ++count;
    }
    best = std::max(best, 1LL - static_cast<long long>(u) + static_cast<long long>(count));
  }
  return static_cast<std::size_t>(best);
}

TDPResult tdp_query(const VoxelSet& set, std::span<const float> pmap, const CriticalVector& ell) {
  if (pmap.size() != ell.m()) {
    fail(ErrorCode::TemplateMismatch, "p-map length differs from the template's m");
  }
  if (set.empty()) {
    fail(ErrorCode::EmptySet, "TDP query on an empty set");
  }
  std::vector<float> p;
  p.reserve(set.size());
  for (std::size_t idx : set.indices()) {
    if (idx >= pmap.size()) {
      fail(ErrorCode::OutOfBounds, "voxel index outside mask");
    }
    p.push_back(pmap[idx]);
  }
  return TDPResult{set.size(), tdp_bound(p, ell)};
}

bool meets_tdp(std::size_t a, std::size_t k, double t) {
  return static_cast<double>(a) + 1e-9 >= t * static_cast<double>(k);
}

std::vector<std::size_t> prefix_bounds(std::span<const float> sorted_pmap, const CriticalVector& ell) {
  const std::size_t m = sorted_pmap.size();
  if (m > ell.m()) {
    fail(ErrorCode::TemplateMismatch, "p-map longer than the template's m");
  }
  const std::size_t big_k = std::min(ell.constrained(), m);
  // c[u] = #{p <= l_u} over the whole map, u = 1..K.
  std::vector<std::size_t> c(big_k + 1, 0);
  std::size_t count = 0;
  for (std::size_t u = 1; u <= big_k; ++u) {
    while (count < m && static_cast<double>(sorted_pmap[count]) <= ell.at(u)) {
      ++count;
    }
    c[u] = count;
  }
  // prefix_max[u] = max_{v <= u} (1 - v + c_v).
  std::vector<long long> prefix_max(big_k + 1, std::numeric_limits<long long>::min());
  for (std::size_t u = 1; u <= big_k; ++u) {
    const long long g = 1 - static_cast<long long>(u) + static_cast<long long>(c[u]);
    prefix_max[u] = std::max(prefix_max[u - 1], g);
  }
  // For S_k, #{i in S_k : p_i <= l_u} = min(k, c_u). Ranks with c_u >= k give
  // k - u + 1, best at the first such u; the rest give 1 - u + c_u.
  std::vector<std::size_t> out(m, 0);
  std::size_t first_full = 1; // first u with c_u >= k
  for (std::size_t k = 1; k <= m; ++k) {
    while (first_full <= big_k && c[first_full] < k) {
      ++first_full;
    }
    const std::size_t u_lim = std::min(k, big_k);
    long long best = 0;
    if (first_full <= u_lim) {
      best = std::max(best, static_cast<long long>(k) - static_cast<long long>(first_full) + 1);
    }
    const std::size_t partial_lim = std::min(first_full - 1, u_lim);
    if (partial_lim >= 1) {
      best = std::max(best, prefix_max[partial_lim]);
    }
    out[k - 1] = static_cast<std::size_t>(best);
  }
  return out;
}

LargestRegion largest_region(std::span<const float> pmap, const CriticalVector& ell, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::InvalidArg, "TDP threshold must lie in [0, 1]");
  }
  if (pmap.size() != ell.m()) {
    fail(ErrorCode::TemplateMismatch, "p-map length differs from the template's m");
  }
  const std::size_t m = pmap.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pmap[a] < pmap[b]; });
  std::vector<float> sorted(m);
  for (std::size_t k = 0; k < m; ++k) {
    sorted[k] = pmap[order[k]];
  }
  const auto bounds = prefix_bounds(sorted, ell);
  LargestRegion best;
  for (std::size_t k = m; k >= 1; --k) {
    if (meets_tdp(bounds[k - 1], k, t)) {
      best.k = k;
      best.a_lower = bounds[k - 1];
      break;
    }
  }
  if (best.k > 0) {
    std::vector<std::size_t> members(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best.k));
    best.set = VoxelSet::from_unsorted(std::move(members), m);
  }
  return best;
}

std::string tdp_result_json(const TDPResult& r) {
  nlohmann::json j{{"size", r.size}, {"a_lower", r.a_lower}, {"tdp_lower", r.tdp_lower()}};
  return j.dump();
}

std::string format_tdp(double tdp) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", tdp);
  return buf;
}

} // namespace tdpkit
