#include "tdpkit/volume.hpp"

#include "tdpkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tdpkit {

std::size_t flat_index(Coord c, Dims dims) {
  if (c.x >= dims.nx || c.y >= dims.ny || c.z >= dims.nz) {
    fail(ErrorCode::OutOfBounds,
         "coordinate (" + std::to_string(c.x) + "," + std::to_string(c.y) + "," +
             std::to_string(c.z) + ") outside grid");
  }
  return c.x + dims.nx * (c.y + dims.ny * c.z);
}

Coord coord_of(std::size_t index, Dims dims) {
  if (index >= dims.voxels()) {
    fail(ErrorCode::OutOfBounds, "flat index " + std::to_string(index) + " outside grid");
  }
  Coord c;
  c.x = index % dims.nx;
  c.y = (index / dims.nx) % dims.ny;
  c.z = index / (dims.nx * dims.ny);
  return c;
}

VolumeGrid::VolumeGrid(Dims dims, std::vector<float> values)
    : dims_(dims), values_(std::move(values)) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    fail(ErrorCode::InvalidArg, "volume dims must be positive");
  }
  if (values_.size() != dims.voxels()) {
    fail(ErrorCode::DimensionMismatch, "value count does not match nx*ny*nz");
  }
}

VolumeGrid::VolumeGrid(Dims dims, float fill)
    : VolumeGrid(dims, std::vector<float>(dims.voxels(), fill)) {}

Mask::Mask(Dims dims, std::vector<std::uint8_t> inside)
    : dims_(dims), inside_(std::move(inside)) {
  if (inside_.size() != dims.voxels()) {
    fail(ErrorCode::DimensionMismatch, "mask size does not match nx*ny*nz");
  }
  flat_to_masked_.assign(inside_.size(), npos);
  for (std::size_t i = 0; i < inside_.size(); ++i) {
    if (inside_[i] != 0) {
      inside_[i] = 1;
      flat_to_masked_[i] = masked_to_flat_.size();
      masked_to_flat_.push_back(i);
    }
  }
  if (masked_to_flat_.empty()) {
    fail(ErrorCode::EmptyMask, "mask has no in-brain voxels");
  }
}

Mask Mask::full(Dims dims) {
  return Mask(dims, std::vector<std::uint8_t>(dims.voxels(), 1));
}

VoxelSet::VoxelSet(std::vector<std::size_t> indices, std::size_t m)
    : indices_(std::move(indices)) {
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] >= m) {
      fail(ErrorCode::OutOfBounds, "voxel index " + std::to_string(indices_[k]) +
                                       " >= m = " + std::to_string(m));
    }
    if (k > 0 && indices_[k] <= indices_[k - 1]) {
      fail(ErrorCode::InvalidArg, "voxel indices must be strictly increasing");
    }
  }
}

VoxelSet VoxelSet::from_unsorted(std::vector<std::size_t> indices, std::size_t m) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return VoxelSet(std::move(indices), m);
}

SubjectStack::SubjectStack(std::size_t n, std::size_t m, std::vector<float> data)
    : n_(n), m_(m), data_(std::move(data)) {
  if (n_ < 2) {
    fail(ErrorCode::InvalidArg, "subject stack needs n >= 2");
  }
  if (m_ == 0) {
    fail(ErrorCode::InvalidArg, "subject stack needs m >= 1");
  }
  if (data_.size() != n_ * m_) {
    fail(ErrorCode::DimensionMismatch, "subject stack payload is not n*m");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::NonFiniteInMask, "subject stack contains non-finite values");
    }
  }
}

std::vector<float> masked_vector(const VolumeGrid& grid, const Mask& mask) {
  if (!(grid.dims() == mask.dims())) {
    fail(ErrorCode::DimensionMismatch, "grid and mask dims differ");
  }
  std::vector<float> out(mask.m());
  const auto values = grid.values();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float v = values[mask.flat_of(k)];
    if (!std::isfinite(v)) {
      fail(ErrorCode::NonFiniteInMask,
           "non-finite value at in-mask flat index " + std::to_string(mask.flat_of(k)));
    }
    out[k] = v;
  }
  return out;
}

VolumeGrid unmask(std::span<const float> values, const Mask& mask) {
  if (values.size() != mask.m()) {
    fail(ErrorCode::DimensionMismatch, "masked vector length differs from mask m");
  }
  VolumeGrid grid(mask.dims(), std::numeric_limits<float>::quiet_NaN());
  auto out = grid.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    out[mask.flat_of(k)] = values[k];
  }
  return grid;
}

} // namespace tdpkit
