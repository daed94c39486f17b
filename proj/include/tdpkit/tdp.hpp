#pragma once

#include "tdpkit/templates.hpp"
#include "tdpkit/volume.hpp"

#include <cstddef>
#include <span>
#include <string>

namespace tdpkit {

struct TDPResult {
  std::size_t size = 0;
  std::size_t a_lower = 0;

  double tdp_lower() const noexcept {
    return size == 0 ? 0.0 : static_cast<double>(a_lower) / static_cast<double>(size);
  }
};

/// Lower bound on the number of true discoveries among the given p-values:
///   max over constrained u <= |S| of 1 - u + #{i in S : p_i <= l_u}, floored at 0.
/// O(|S| log |S|).
std::size_t tdp_bound(std::span<const float> p_values_of_set, const CriticalVector& ell);

/// `pmap` is the observed masked p-value vector (length m).
TDPResult tdp_query(const VoxelSet& set, std::span<const float> pmap, const CriticalVector& ell);

/// a / k >= t, with slack for t*k rounding.
bool meets_tdp(std::size_t a, std::size_t k, double t);

struct LargestRegion {
  std::size_t k = 0;
  std::size_t a_lower = 0;
  VoxelSet set;
};

/// Largest k such that the k smallest p-values (ties broken by voxel index)
/// have a TDP lower bound >= t. Full scan over k in O(m log m).
LargestRegion largest_region(std::span<const float> pmap, const CriticalVector& ell, double t);

/// Bounds a(S_k) for every k = 1..m (index k-1), S_k the k smallest p-values.
std::vector<std::size_t> prefix_bounds(std::span<const float> sorted_pmap, const CriticalVector& ell);

/// `{"size":..,"a_lower":..,"tdp_lower":..}`; shared by the CLI and serve API.
std::string tdp_result_json(const TDPResult& r);
/// Four-decimal rendering used in reports.
std::string format_tdp(double tdp);

} // namespace tdpkit
