#include "tdpkit/harness/synthetic.hpp"

#include "tdpkit/error.hpp"
#include "tdpkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace tdpkit::harness {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    out.push_back(item);
  }
  return out;
}

std::size_t to_size(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size() || v < 0) {
      throw std::invalid_argument(s);
    }
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArg, "expected a non-negative integer, got '" + s + "'");
  }
}

std::vector<double> gaussian_weights(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * static_cast<std::size_t>(radius) + 1);
  for (int k = -radius; k <= radius; ++k) {
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
  }
  return w;
}

// Sum of squared in-bounds kernel weights at each position along an axis.
std::vector<double> axis_variance(const std::vector<double>& w, std::size_t len) {
  const int radius = static_cast<int>(w.size() / 2);
  std::vector<double> v(len, 0.0);
  for (std::size_t x = 0; x < len; ++x) {
    for (int k = -radius; k <= radius; ++k) {
      const long long xx = static_cast<long long>(x) + k;
      if (xx >= 0 && xx < static_cast<long long>(len)) {
        const double wk = w[static_cast<std::size_t>(k + radius)];
        v[x] += wk * wk;
      }
    }
  }
  return v;
}

// One separable pass along the axis with stride `stride` and length `len`.
void smooth_axis(std::vector<double>& data, Dims d, int axis, const std::vector<double>& w) {
  const std::size_t len = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
  const int radius = static_cast<int>(w.size() / 2);
  std::vector<double> line(len);
  std::vector<double> out(len);
  const std::size_t total = d.voxels();
  for (std::size_t start = 0; start < total; ++start) {
    // `start` must be the first voxel of a line along this axis.
    const std::size_t pos = (start / stride) % len;
    if (pos != 0) {
      continue;
    }
    for (std::size_t x = 0; x < len; ++x) {
      line[x] = data[start + x * stride];
    }
    for (std::size_t x = 0; x < len; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const long long xx = static_cast<long long>(x) + k;
        if (xx >= 0 && xx < static_cast<long long>(len)) {
          acc += w[static_cast<std::size_t>(k + radius)] * line[static_cast<std::size_t>(xx)];
        }
      }
      out[x] = acc;
    }
    for (std::size_t x = 0; x < len; ++x) {
      data[start + x * stride] = out[x];
    }
  }
}

} // namespace

SignalRegion parse_region(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 4) {
    fail(ErrorCode::InvalidArg, "region must be shape:center:extent:mu, got '" + text + "'");
  }
  SignalRegion r;
  if (parts[0] == "box") {
    r.shape = RegionShape::Box;
  } else if (parts[0] == "sphere") {
    r.shape = RegionShape::Sphere;
  } else {
    fail(ErrorCode::InvalidArg, "unknown region shape '" + parts[0] + "'");
  }
  const auto c = split(parts[1], ',');
  if (c.size() != 3) {
    fail(ErrorCode::InvalidArg, "region center needs three coordinates");
  }
  r.center = {to_size(c[0]), to_size(c[1]), to_size(c[2])};
  const auto e = split(parts[2], ',');
  if (r.shape == RegionShape::Box) {
    if (e.size() != 3) {
      fail(ErrorCode::InvalidArg, "box extent needs three side lengths");
    }
    r.extent = {to_size(e[0]), to_size(e[1]), to_size(e[2])};
  } else {
    if (e.size() != 1) {
      fail(ErrorCode::InvalidArg, "sphere extent is a single radius");
    }
    r.extent = {to_size(e[0]), 0, 0};
  }
  try {
    r.mu = std::stod(parts[3]);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArg, "bad effect size '" + parts[3] + "'");
  }
  return r;
}

std::string describe(const SignalRegion& r) {
  std::ostringstream os;
  os << (r.shape == RegionShape::Box ? "box:" : "sphere:") << r.center.x << ',' << r.center.y << ','
     << r.center.z << ':';
  if (r.shape == RegionShape::Box) {
    os << r.extent[0] << ',' << r.extent[1] << ',' << r.extent[2];
  } else {
    os << r.extent[0];
  }
  os << ':' << r.mu;
  return os.str();
}

std::vector<std::size_t> region_voxels(const SignalRegion& r, Dims d) {
  std::vector<std::size_t> out;
  if (r.shape == RegionShape::Box) {
    const std::array<std::size_t, 3> c{r.center.x, r.center.y, r.center.z};
    const std::array<std::size_t, 3> dim{d.nx, d.ny, d.nz};
    std::array<std::size_t, 3> lo{};
    for (int a = 0; a < 3; ++a) {
      if (r.extent[a] == 0 || c[a] < r.extent[a] / 2 || c[a] - r.extent[a] / 2 + r.extent[a] > dim[a]) {
        fail(ErrorCode::SpecOutOfBounds, "box region " + describe(r) + " leaves the grid");
      }
      lo[a] = c[a] - r.extent[a] / 2;
    }
    for (std::size_t z = lo[2]; z < lo[2] + r.extent[2]; ++z) {
      for (std::size_t y = lo[1]; y < lo[1] + r.extent[1]; ++y) {
        for (std::size_t x = lo[0]; x < lo[0] + r.extent[0]; ++x) {
          out.push_back(flat_index({x, y, z}, d));
        }
      }
    }
  } else {
    const std::size_t rad = r.extent[0];
    if (r.center.x < rad || r.center.y < rad || r.center.z < rad || r.center.x + rad >= d.nx ||
        r.center.y + rad >= d.ny || r.center.z + rad >= d.nz) {
      fail(ErrorCode::SpecOutOfBounds, "sphere region " + describe(r) + " leaves the grid");
    }
    const auto r2 = static_cast<long long>(rad * rad);
    for (std::size_t z = r.center.z - rad; z <= r.center.z + rad; ++z) {
      for (std::size_t y = r.center.y - rad; y <= r.center.y + rad; ++y) {
        for (std::size_t x = r.center.x - rad; x <= r.center.x + rad; ++x) {
          const long long dx = static_cast<long long>(x) - static_cast<long long>(r.center.x);
          const long long dy = static_cast<long long>(y) - static_cast<long long>(r.center.y);
          const long long dz = static_cast<long long>(z) - static_cast<long long>(r.center.z);
          if (dx * dx + dy * dy + dz * dz <= r2) {
            out.push_back(flat_index({x, y, z}, d));
          }
        }
      }
    }
  }
  return out;
}

SyntheticData gen_synthetic(Dims dims, std::size_t n, const SignalSpec& spec, std::uint64_t seed) {
  if (dims.voxels() == 0) {
    fail(ErrorCode::SpecOutOfBounds, "grid dims must be positive");
  }
  if (!(spec.sigma >= 0.0)) {
    fail(ErrorCode::SpecOutOfBounds, "smoothing sigma must be >= 0");
  }
  const std::size_t m = dims.voxels();
  std::vector<double> effect(m, 0.0);
  for (const SignalRegion& r : spec.regions) {
    if (!(r.mu >= 0.0)) {
      fail(ErrorCode::SpecOutOfBounds, "effect size must be >= 0");
    }
    for (std::size_t v : region_voxels(r, dims)) {
      effect[v] += r.mu;
    }
  }

  std::vector<double> inv_sd(m, 1.0);
  std::vector<double> weights;
  if (spec.sigma > 0.0) {
    weights = gaussian_weights(spec.sigma);
    const auto vx = axis_variance(weights, dims.nx);
    const auto vy = axis_variance(weights, dims.ny);
    const auto vz = axis_variance(weights, dims.nz);
    for (std::size_t i = 0; i < m; ++i) {
      const Coord c = coord_of(i, dims);
      inv_sd[i] = 1.0 / std::sqrt(vx[c.x] * vy[c.y] * vz[c.z]);
    }
  }

  std::vector<float> data(n * m);
  std::vector<double> field(m);
  for (std::size_t s = 0; s < n; ++s) {
    std::mt19937_64 gen(derive_seed(seed, "subject-noise", s));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : field) {
      v = normal(gen);
    }
    if (spec.sigma > 0.0) {
      for (int axis = 0; axis < 3; ++axis) {
        smooth_axis(field, dims, axis, weights);
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      data[s * m + i] = static_cast<float>(field[i] * inv_sd[i] + effect[i]);
    }
  }

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < m; ++i) {
    if (effect[i] > 0.0) {
      active.push_back(i);
    }
  }
  return SyntheticData{Mask::full(dims), SubjectStack(n, m, std::move(data)), VoxelSet(std::move(active), m)};
}

} // namespace tdpkit::harness
