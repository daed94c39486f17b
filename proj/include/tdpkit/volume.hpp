#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tdpkit {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t voxels() const noexcept { return nx * ny * nz; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Coord {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
};

// Raster order is x-fastest: index = x + nx * (y + ny * z).
std::size_t flat_index(Coord c, Dims dims);
Coord coord_of(std::size_t index, Dims dims);

/// 3D raster of 32-bit values. NaN marks missing voxels; those may only
/// appear outside the analysis mask.
class VolumeGrid {
public:
  VolumeGrid() = default;
  VolumeGrid(Dims dims, std::vector<float> values);
  explicit VolumeGrid(Dims dims, float fill = 0.0f);

  Dims dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  float at(Coord c) const { return values_[flat_index(c, dims_)]; }
  float& at(Coord c) { return values_[flat_index(c, dims_)]; }

private:
  Dims dims_{};
  std::vector<float> values_;
};

/// In-brain mask. Owns the flat <-> masked index mapping (0-based, ascending
/// flat order) that every other module uses as voxel identity.
class Mask {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Mask() = default;
  Mask(Dims dims, std::vector<std::uint8_t> inside);
  static Mask full(Dims dims);

  Dims dims() const noexcept { return dims_; }
  std::size_t m() const noexcept { return masked_to_flat_.size(); }
  bool contains(std::size_t flat) const { return inside_[flat] != 0; }
  std::span<const std::uint8_t> inside() const noexcept { return inside_; }

  std::size_t flat_of(std::size_t masked) const { return masked_to_flat_.at(masked); }
  // npos when the voxel is outside the mask.
  std::size_t masked_of(std::size_t flat) const { return flat_to_masked_.at(flat); }

private:
  Dims dims_{};
  std::vector<std::uint8_t> inside_;
  std::vector<std::size_t> masked_to_flat_;
  std::vector<std::size_t> flat_to_masked_;
};

/// Sorted, distinct masked indices.
class VoxelSet {
public:
  VoxelSet() = default;
  // Requires strictly increasing indices below m.
  VoxelSet(std::vector<std::size_t> indices, std::size_t m);
  // Sorts and de-duplicates; still rejects indices >= m.
  static VoxelSet from_unsorted(std::vector<std::size_t> indices, std::size_t m);

  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }

  friend bool operator==(const VoxelSet&, const VoxelSet&) = default;

private:
  std::vector<std::size_t> indices_;
};

/// n subjects x m voxels, subject-major.
class SubjectStack {
public:
  SubjectStack() = default;
  SubjectStack(std::size_t n, std::size_t m, std::vector<float> data);

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> subject(std::size_t s) const {
    return std::span<const float>(data_).subspan(s * m_, m_);
  }

private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<float> data_;
};

std::vector<float> masked_vector(const VolumeGrid& grid, const Mask& mask);
// Inverse of masked_vector: out-of-mask voxels become quiet NaN.
VolumeGrid unmask(std::span<const float> values, const Mask& mask);

// ---- file I/O (VXM1 / VXK1 / VXS1, little-endian payloads) ----

VolumeGrid read_volume(const std::filesystem::path& path);
void write_volume(const VolumeGrid& grid, const std::filesystem::path& path);

Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);

SubjectStack read_stack(const std::filesystem::path& path);
void write_stack(const SubjectStack& stack, const std::filesystem::path& path);
// Header row `subject,voxel_0,...,voxel_{m-1}`, one row per subject.
SubjectStack read_stack_csv(const std::filesystem::path& path);

// Newline-delimited masked indices; blank lines and `#` comments ignored.
VoxelSet read_region(const std::filesystem::path& path, std::size_t m);

namespace detail {
// Shared by the binary formats of other modules (VXP1).
std::vector<float> read_f32_payload(std::istream& in, std::size_t count);
void write_f32_payload(std::ostream& out, std::span<const float> values);
std::size_t checked_product(std::initializer_list<std::size_t> factors);
} // namespace detail

} // namespace tdpkit
