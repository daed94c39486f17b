#include "tdpkit/perm.hpp"

#include "tdpkit/error.hpp"
#include "tdpkit/kernels.hpp"
#include "tdpkit/parallel.hpp"
#include "tdpkit/rng.hpp"
#include "tdpkit/student_t.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace tdpkit {

namespace {

constexpr std::size_t kVoxelChunk = 2048;

// Variance below this fraction of the raw second moment is treated as sd = 0.
constexpr double kDegenerateVariance = 1e-12;

struct RowKernel {
  const SubjectStack& stack;
  std::vector<double> sumsq; // sign-invariant sum of squares per voxel

  explicit RowKernel(const SubjectStack& s) : stack(s), sumsq(s.m(), 0.0) {
    for (std::size_t subj = 0; subj < s.n(); ++subj) {
      const auto row = s.subject(subj);
      for (std::size_t i = 0; i < s.m(); ++i) {
        const double x = row[i];
        sumsq[i] += x * x;
      }
    }
  }

  void t_row(std::span<const std::int8_t> signs, std::span<double> out) const {
    const auto& k = kernels::active();
    const std::size_t n = stack.n();
    const std::size_t m = stack.m();
    const double dn = static_cast<double>(n);
    const double sqrt_n = std::sqrt(dn);
    for (std::size_t begin = 0; begin < m; begin += kVoxelChunk) {
      const std::size_t end = std::min(m, begin + kVoxelChunk);
      double* sums = out.data() + begin;
      k.signed_sums(stack.data().data(), n, m, signs.data(), begin, end, sums);
      for (std::size_t i = begin; i < end; ++i) {
        const double s = out[i];
        const double mean = s / dn;
        const double q = sumsq[i];
        const double centered = q - s * mean;
        if (centered <= q * kDegenerateVariance) {
          out[i] = (s == 0.0) ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), s);
        } else {
          const double sd = std::sqrt(centered / (dn - 1.0));
          out[i] = mean / (sd / sqrt_n);
        }
      }
    }
  }
};

float to_pvalue_f32(double p) {
  const float f = static_cast<float>(p);
  return std::clamp(f, kMinPValue, 1.0f);
}

void check_flips(const SubjectStack& stack, const FlipMatrix& flips) {
  if (flips.n() != stack.n()) {
    fail(ErrorCode::DimensionMismatch, "flip matrix has n = " + std::to_string(flips.n()) +
                                           ", stack has n = " + std::to_string(stack.n()));
  }
}

} // namespace

std::string to_string(Sidedness s) { return s == Sidedness::TwoSided ? "two-sided" : "one-sided"; }

Sidedness parse_sidedness(const std::string& s) {
  if (s == "two-sided" || s == "two") {
    return Sidedness::TwoSided;
  }
  if (s == "one-sided" || s == "one") {
    return Sidedness::OneSided;
  }
  fail(ErrorCode::InvalidArg, "unknown sidedness '" + s + "'");
}

std::string to_string(PValueMode m) { return m == PValueMode::Parametric ? "parametric" : "permutation"; }

PValueMode parse_pvalue_mode(const std::string& s) {
  if (s == "parametric") {
    return PValueMode::Parametric;
  }
  if (s == "permutation") {
    return PValueMode::Permutation;
  }
  fail(ErrorCode::InvalidArg, "unknown p-value mode '" + s + "'");
}

FlipMatrix::FlipMatrix(std::size_t w, std::size_t n, std::uint64_t seed, std::vector<std::int8_t> signs)
    : w_(w), n_(n), seed_(seed), signs_(std::move(signs)) {
  if (signs_.size() != w_ * n_) {
    fail(ErrorCode::DimensionMismatch, "flip matrix payload is not w*n");
  }
}

FlipMatrix gen_sign_flips(std::size_t n, std::size_t w, std::uint64_t seed) {
  if (w == 0) {
    fail(ErrorCode::InvalidArg, "need at least one transform (w >= 1)");
  }
  if (n < 2) {
    fail(ErrorCode::InvalidArg, "need at least two subjects (n >= 2)");
  }
  std::vector<std::int8_t> signs(w * n, 1);
  for (std::size_t j = 1; j < w; ++j) {
    const std::uint64_t key = stream_key(seed, j);
    std::uint64_t bits = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (s % 64 == 0) {
        bits = counter_draw(key, s / 64);
      }
      signs[j * n + s] = (bits >> (s % 64)) & 1U ? std::int8_t{-1} : std::int8_t{1};
    }
  }
  return FlipMatrix(w, n, seed, std::move(signs));
}

StatisticMatrix one_sample_t(const SubjectStack& stack, const FlipMatrix& flips, std::size_t workers) {
  check_flips(stack, flips);
  const RowKernel kernel(stack);
  StatisticMatrix out;
  out.w = flips.w();
  out.m = stack.m();
  out.values.resize(out.w * out.m);
  parallel_for(out.w, workers, [&](std::size_t j, std::size_t) {
    kernel.t_row(flips.row(j), std::span<double>(out.values).subspan(j * out.m, out.m));
  });
  return out;
}

double t_to_p(double t, int df, Sidedness sidedness) {
  if (df < 1) {
    fail(ErrorCode::InvalidArg, "degrees of freedom must be >= 1");
  }
  const double p = sidedness == Sidedness::TwoSided ? student_t_two_sided_sf(t, df)
                                                    : student_t_upper_sf(t, df);
  return std::clamp(p, static_cast<double>(kMinPValue), 1.0);
}

PermPValueMatrix::PermPValueMatrix(std::size_t w, std::size_t m, std::vector<float> values)
    : w_(w), m_(m), values_(std::move(values)) {
  if (w_ == 0 || m_ == 0) {
    fail(ErrorCode::InvalidArg, "p-value matrix needs w >= 1 and m >= 1");
  }
  if (values_.size() != w_ * m_) {
    fail(ErrorCode::DimensionMismatch, "p-value matrix payload is not w*m");
  }
  for (float p : values_) {
    if (!(p > 0.0f && p <= 1.0f)) {
      fail(ErrorCode::InvalidArg, "p-values must lie in (0, 1]");
    }
  }
}

std::vector<float> PermPValueMatrix::sorted_row(std::size_t j) const {
  auto r = row(j);
  std::vector<float> out(r.begin(), r.end());
  sort_pvalues(out);
  return out;
}

void sort_pvalues(std::span<float> values) {
  const std::size_t count = values.size();
  if (count < 256) {
    std::sort(values.begin(), values.end());
    return;
  }
  // Positive IEEE floats order like their unsigned bit patterns.
  std::vector<std::uint32_t> a(count);
  std::vector<std::uint32_t> b(count);
  std::memcpy(a.data(), values.data(), count * sizeof(float));
  constexpr std::array<int, 3> shifts{0, 11, 22};
  for (int shift : shifts) {
    std::array<std::size_t, 2049> hist{};
    for (std::uint32_t v : a) {
      ++hist[((v >> shift) & 0x7ffU) + 1];
    }
    for (std::size_t d = 1; d < hist.size(); ++d) {
      hist[d] += hist[d - 1];
    }
    for (std::uint32_t v : a) {
      b[hist[(v >> shift) & 0x7ffU]++] = v;
    }
    a.swap(b);
  }
  std::memcpy(values.data(), a.data(), count * sizeof(float));
}

PermPValueMatrix build_perm_pvalues(const SubjectStack& stack, std::size_t w, std::uint64_t seed,
                                    const PValueOptions& options) {
  return build_perm_pvalues(stack, gen_sign_flips(stack.n(), w, seed), options);
}

PermPValueMatrix build_perm_pvalues(const SubjectStack& stack, const FlipMatrix& flips,
                                    const PValueOptions& options) {
  check_flips(stack, flips);
  const std::size_t w = flips.w();
  const std::size_t m = stack.m();
  const int df = static_cast<int>(stack.n()) - 1;
  std::vector<float> values(w * m);

  if (options.mode == PValueMode::Parametric) {
    const RowKernel kernel(stack);
    parallel_for(w, options.workers, [&](std::size_t j, std::size_t) {
      std::vector<double> t(m);
      kernel.t_row(flips.row(j), t);
      for (std::size_t i = 0; i < m; ++i) {
        values[j * m + i] = to_pvalue_f32(t_to_p(t[i], df, options.sidedness));
      }
    });
  } else {
    // Marginal permutation p-value: p_{k,i} = #{j : stat_{j,i} >= stat_{k,i}} / w,
    // stat = |t| (two-sided) or t (one-sided). Row 0 gives (1 + #{j>0 : ...}) / w.
    const StatisticMatrix stats = one_sample_t(stack, flips, options.workers);
    const bool two = options.sidedness == Sidedness::TwoSided;
    parallel_for(m, options.workers, [&](std::size_t i, std::size_t) {
      std::vector<double> col(w);
      for (std::size_t j = 0; j < w; ++j) {
        const double t = stats.values[j * m + i];
        col[j] = two ? std::fabs(t) : t;
      }
      std::vector<double> sorted = col;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t j = 0; j < w; ++j) {
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), col[j]) - sorted.begin();
        const double p = static_cast<double>(w - static_cast<std::size_t>(lo)) / static_cast<double>(w);
        values[j * m + i] = to_pvalue_f32(p);
      }
    });
  }

  PermPValueMatrix out(w, m, std::move(values));
  out.sidedness = options.sidedness;
  out.mode = options.mode;
  out.df = df;
  out.seed = flips.seed();
  return out;
}

void for_each_sorted_curve(const SubjectStack& stack, const FlipMatrix& flips, Sidedness sidedness,
                           std::size_t keep, std::size_t workers,
                           const std::function<void(std::size_t, std::span<const float>)>& visit) {
  check_flips(stack, flips);
  const std::size_t m = stack.m();
  keep = std::min(keep, m);
  const int df = static_cast<int>(stack.n()) - 1;
  const RowKernel kernel(stack);
  const std::size_t pool = std::min(resolve_workers(workers), std::max<std::size_t>(flips.w(), 1));
  std::vector<std::vector<double>> tbuf(pool, std::vector<double>(m));
  std::vector<std::vector<float>> pbuf(pool, std::vector<float>(m));
  parallel_for(flips.w(), pool, [&](std::size_t j, std::size_t worker) {
    auto& t = tbuf[worker];
    auto& p = pbuf[worker];
    kernel.t_row(flips.row(j), t);
    for (std::size_t i = 0; i < m; ++i) {
      p[i] = to_pvalue_f32(t_to_p(t[i], df, sidedness));
    }
    sort_pvalues(p);
    visit(j, std::span<const float>(p).first(keep));
  });
}

ObservedMaps observed_maps(const SubjectStack& stack, Sidedness sidedness) {
  const FlipMatrix identity = gen_sign_flips(stack.n(), 1, 0);
  const RowKernel kernel(stack);
  const std::size_t m = stack.m();
  const int df = static_cast<int>(stack.n()) - 1;
  std::vector<double> t(m);
  kernel.t_row(identity.row(0), t);
  ObservedMaps maps;
  maps.p.resize(m);
  maps.t.resize(m);
  maps.z.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    maps.p[i] = to_pvalue_f32(t_to_p(t[i], df, sidedness));
    const double finite_t = std::clamp(t[i], -1e30, 1e30);
    maps.t[i] = static_cast<float>(finite_t);
    maps.z[i] = static_cast<float>(equivalent_z(student_t_two_sided_sf(t[i], df), t[i]));
  }
  return maps;
}

std::filesystem::path sidecar_path(const std::filesystem::path& pmat_path) {
  auto p = pmat_path;
  p += ".json";
  return p;
}

void write_pmat(const PermPValueMatrix& pmat, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      fail(ErrorCode::IoFailure, "cannot write " + path.string());
    }
    out << "VXP1 " << pmat.w() << ' ' << pmat.m() << '\n';
    detail::write_f32_payload(out, pmat.values());
  }
  nlohmann::json side = {
      {"seed", pmat.seed},
      {"sidedness", to_string(pmat.sidedness)},
      {"df", pmat.df},
      {"identity_row", 0},
      {"mode", to_string(pmat.mode)},
      {"w", pmat.w()},
      {"m", pmat.m()},
  };
  std::ofstream js(sidecar_path(path));
  if (!js) {
    fail(ErrorCode::IoFailure, "cannot write " + sidecar_path(path).string());
  }
  js << side.dump(2) << '\n';
}

PermPValueMatrix read_pmat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorCode::BadMagic, "missing VXP1 header");
  }
  std::istringstream ls(line);
  std::string magic;
  long long w = -1;
  long long m = -1;
  ls >> magic >> w >> m;
  if (magic != "VXP1" || ls.fail() || w <= 0 || m <= 0) {
    fail(ErrorCode::BadMagic, "expected 'VXP1 <w> <m>' header");
  }
  const std::size_t count =
      detail::checked_product({static_cast<std::size_t>(w), static_cast<std::size_t>(m)});
  auto values = detail::read_f32_payload(in, count);
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::TruncatedPayload, "trailing bytes after VXP1 payload");
  }
  PermPValueMatrix pmat(static_cast<std::size_t>(w), static_cast<std::size_t>(m), std::move(values));
  std::ifstream js(sidecar_path(path));
  if (js) {
    nlohmann::json side;
    try {
      js >> side;
      pmat.seed = side.value("seed", std::uint64_t{0});
      pmat.sidedness = parse_sidedness(side.value("sidedness", std::string("two-sided")));
      pmat.mode = parse_pvalue_mode(side.value("mode", std::string("parametric")));
      pmat.df = side.value("df", 1);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BadMagic, std::string("malformed p-matrix sidecar: ") + e.what());
    }
  }
  return pmat;
}

} // namespace tdpkit
