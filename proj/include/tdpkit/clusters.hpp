#pragma once

#include "tdpkit/tdp.hpp"
#include "tdpkit/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace tdpkit {

enum class Connectivity : int { Face = 6, Edge = 18, Vertex = 26 };

Connectivity parse_connectivity(int neighbours);

struct ClusterOptions {
  double kappa = 3.0;
  std::size_t min_size = 150;
  Connectivity connectivity = Connectivity::Vertex;
  // Positive and negative supra-threshold voxels never share a cluster.
  bool sign_split = false;
};

struct Cluster {
  std::uint32_t id = 0;
  VoxelSet voxels; // masked indices
  std::size_t size = 0;
  float peak_stat = 0.0f;
  Coord peak;
};

struct ClusterSet {
  Dims dims;
  std::vector<std::uint32_t> labels; // per grid voxel, 0 = background
  std::vector<Cluster> clusters;     // ids 1..N: descending size, ties by smallest flat index
};

/// Connected components of {in-mask voxels with |z| > kappa}.
ClusterSet label_components(const VolumeGrid& zmap, const Mask& mask, const ClusterOptions& options = {});

struct ClusterRow {
  std::uint32_t id = 0;
  std::size_t size = 0;
  float peak_stat = 0.0f;
  Coord peak;
  std::size_t a_lower = 0;
  double tdp_lower = 0.0;
};

std::vector<ClusterRow> cluster_table(const ClusterSet& clusters, std::span<const float> pmap,
                                      const CriticalVector& ell);

// `id,size,peak_stat,peak_x,peak_y,peak_z,a_lower,tdp_lower`
void write_cluster_csv(std::ostream& out, const std::vector<ClusterRow>& rows);

} // namespace tdpkit
