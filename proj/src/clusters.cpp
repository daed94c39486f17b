#include "tdpkit/clusters.hpp"

#include "tdpkit/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace tdpkit {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  std::vector<std::size_t> rank;

  explicit DisjointSets(std::size_t n) : parent(n), rank(n, 0) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) {
      return;
    }
    if (rank[a] < rank[b]) {
      std::swap(a, b);
    }
    parent[b] = a;
    if (rank[a] == rank[b]) {
      ++rank[a];
    }
  }
};

struct Offset {
  int dx, dy, dz;
};

// Half of the neighbourhood (lexicographically negative offsets), so every
// adjacent pair is visited once during the raster scan.
std::vector<Offset> backward_offsets(Connectivity c) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
        if (nonzero == 0) {
          continue;
        }
        if (c == Connectivity::Face && nonzero > 1) {
          continue;
        }
        if (c == Connectivity::Edge && nonzero > 2) {
          continue;
        }
        const bool backward = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
        if (backward) {
          out.push_back({dx, dy, dz});
        }
      }
    }
  }
  return out;
}

} // namespace

Connectivity parse_connectivity(int neighbours) {
  switch (neighbours) {
  case 6: return Connectivity::Face;
  case 18: return Connectivity::Edge;
  case 26: return Connectivity::Vertex;
  default: fail(ErrorCode::InvalidArg, "connectivity must be 6, 18 or 26");
  }
}

ClusterSet label_components(const VolumeGrid& zmap, const Mask& mask, const ClusterOptions& options) {
  if (!(zmap.dims() == mask.dims())) {
    fail(ErrorCode::DimensionMismatch, "statistic map and mask dims differ");
  }
  if (!(options.kappa > 0.0)) {
    fail(ErrorCode::InvalidArg, "cluster-forming threshold must be > 0");
  }
  const Dims d = zmap.dims();
  const auto z = zmap.values();
  const std::size_t total = d.voxels();

  // sign: +1 / -1 supra-threshold, 0 otherwise
  std::vector<std::int8_t> supra(total, 0);
  for (std::size_t i = 0; i < total; ++i) {
    if (!mask.contains(i)) {
      continue;
    }
    const double v = z[i];
    if (!std::isfinite(v)) {
      fail(ErrorCode::NonFiniteInMask, "non-finite statistic inside mask");
    }
    if (std::fabs(v) > options.kappa) {
      supra[i] = v > 0 ? 1 : -1;
    }
  }

  DisjointSets sets(total);
  const auto offsets = backward_offsets(options.connectivity);
  for (std::size_t zi = 0; zi < d.nz; ++zi) {
    for (std::size_t yi = 0; yi < d.ny; ++yi) {
      for (std::size_t xi = 0; xi < d.nx; ++xi) {
        const std::size_t here = xi + d.nx * (yi + d.ny * zi);
        if (supra[here] == 0) {
          continue;
        }
        for (const Offset& o : offsets) {
          const auto nx = static_cast<long long>(xi) + o.dx;
          const auto ny = static_cast<long long>(yi) + o.dy;
          const auto nz = static_cast<long long>(zi) + o.dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long long>(d.nx) ||
              ny >= static_cast<long long>(d.ny) || nz >= static_cast<long long>(d.nz)) {
            continue;
          }
          const auto there = static_cast<std::size_t>(nx) +
                             d.nx * (static_cast<std::size_t>(ny) + d.ny * static_cast<std::size_t>(nz));
          if (supra[there] == 0) {
            continue;
          }
          if (options.sign_split && supra[there] != supra[here]) {
            continue;
          }
          sets.unite(here, there);
        }
      }
    }
  }

  // Gather members per root in ascending flat order.
  std::vector<std::size_t> root_slot(total, static_cast<std::size_t>(-1));
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < total; ++i) {
    if (supra[i] == 0) {
      continue;
    }
    const std::size_t r = sets.find(i);
    if (root_slot[r] == static_cast<std::size_t>(-1)) {
      root_slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[root_slot[r]].push_back(i);
  }
  std::erase_if(groups, [&](const auto& g) { return g.size() < options.min_size; });
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) {
      return a.size() > b.size();
    }
    return a.front() < b.front();
  });

  ClusterSet out;
  out.dims = d;
  out.labels.assign(total, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto id = static_cast<std::uint32_t>(g + 1);
    Cluster c;
    c.id = id;
    c.size = groups[g].size();
    std::vector<std::size_t> masked;
    masked.reserve(c.size);
    std::size_t peak = groups[g].front();
    for (std::size_t flat : groups[g]) {
      out.labels[flat] = id;
      masked.push_back(mask.masked_of(flat));
      if (std::fabs(z[flat]) > std::fabs(z[peak])) {
        peak = flat;
      }
    }
    c.voxels = VoxelSet(std::move(masked), mask.m());
    c.peak_stat = z[peak];
    c.peak = coord_of(peak, d);
    out.clusters.push_back(std::move(c));
  }
  return out;
}

std::vector<ClusterRow> cluster_table(const ClusterSet& clusters, std::span<const float> pmap,
                                      const CriticalVector& ell) {
  std::vector<ClusterRow> rows;
  rows.reserve(clusters.clusters.size());
  for (const Cluster& c : clusters.clusters) {
    const TDPResult r = tdp_query(c.voxels, pmap, ell);
    rows.push_back({c.id, c.size, c.peak_stat, c.peak, r.a_lower, r.tdp_lower()});
  }
  return rows;
}

void write_cluster_csv(std::ostream& out, const std::vector<ClusterRow>& rows) {
  out << "id,size,peak_stat,peak_x,peak_y,peak_z,a_lower,tdp_lower\n";
  char peak[32];
  for (const ClusterRow& r : rows) {
    std::snprintf(peak, sizeof peak, "%.4f", static_cast<double>(r.peak_stat));
    out << r.id << ',' << r.size << ',' << peak << ',' << r.peak.x << ',' << r.peak.y << ','
        << r.peak.z << ',' << r.a_lower << ',' << format_tdp(r.tdp_lower) << '\n';
  }
}

} // namespace tdpkit
