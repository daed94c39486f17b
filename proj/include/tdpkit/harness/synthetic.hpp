#pragma once

#include "tdpkit/volume.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tdpkit::harness {

enum class RegionShape { Box, Sphere };

struct SignalRegion {
  RegionShape shape = RegionShape::Box;
  Coord center;
  // Box: side lengths, covering [center - extent/2, center - extent/2 + extent).
  // Sphere: extent[0] is the radius in voxels.
  std::array<std::size_t, 3> extent{1, 1, 1};
  double mu = 0.0; // effect size in units of the per-voxel noise sd
};

struct SignalSpec {
  std::vector<SignalRegion> regions;
  double sigma = 0.0; // Gaussian smoothing sd, voxels
};

/// `box:cx,cy,cz:ex,ey,ez:mu` or `sphere:cx,cy,cz:r:mu`.
SignalRegion parse_region(const std::string& text);
std::string describe(const SignalRegion& region);

struct SyntheticData {
  Mask mask;
  SubjectStack stack;
  VoxelSet truth; // voxels with mu > 0 (masked indices; the mask is full)
};

/// Per subject: unit Gaussian noise, smoothed with a truncated Gaussian kernel
/// and rescaled voxel-wise to unit marginal variance, plus mu inside regions.
SyntheticData gen_synthetic(Dims dims, std::size_t n, const SignalSpec& spec, std::uint64_t seed);

/// Voxels covered by a region, as flat indices.
std::vector<std::size_t> region_voxels(const SignalRegion& region, Dims dims);

} // namespace tdpkit::harness
