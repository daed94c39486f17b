#include "tdpkit/volume.hpp"

#include "tdpkit/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace tdpkit {

namespace {

// Payload limit: 2^32 elements. Anything larger is treated as a corrupt header.
constexpr std::size_t kMaxElements = std::size_t{1} << 32;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorCode::IoFailure, "cannot write " + path.string());
  }
  return out;
}

std::vector<std::string> header_tokens(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorCode::BadMagic, "missing header line");
  }
  std::istringstream ls(line);
  std::vector<std::string> tokens;
  for (std::string tok; ls >> tok;) {
    tokens.push_back(tok);
  }
  return tokens;
}

std::size_t parse_dim(const std::string& tok) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    fail(ErrorCode::BadMagic, "malformed dimension '" + tok + "'");
  }
  if (tok.size() > 18) {
    fail(ErrorCode::DimOverflow, "dimension '" + tok + "' too large");
  }
  const std::size_t v = std::stoull(tok);
  if (v == 0) {
    fail(ErrorCode::BadMagic, "dimension must be positive");
  }
  return v;
}

Dims parse_grid_header(std::istream& in, const char* magic, const char* type) {
  const auto tok = header_tokens(in);
  if (tok.size() != 6 || tok[0] != magic) {
    fail(ErrorCode::BadMagic, std::string("expected '") + magic + " <nx> <ny> <nz> " + type +
                                  " xyz' header");
  }
  if (tok[4] != type || tok[5] != "xyz") {
    fail(ErrorCode::BadMagic, "unsupported element type or order '" + tok[4] + " " + tok[5] + "'");
  }
  Dims d{parse_dim(tok[1]), parse_dim(tok[2]), parse_dim(tok[3])};
  detail::checked_product({d.nx, d.ny, d.nz});
  return d;
}

void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::TruncatedPayload, "trailing bytes after payload");
  }
}

} // namespace

namespace detail {

std::size_t checked_product(std::initializer_list<std::size_t> factors) {
  std::size_t total = 1;
  for (std::size_t f : factors) {
    if (f != 0 && total > kMaxElements / f) {
      fail(ErrorCode::DimOverflow, "element count overflows the format limit");
    }
    total *= f;
  }
  if (total > kMaxElements) {
    fail(ErrorCode::DimOverflow, "element count overflows the format limit");
  }
  return total;
}

std::vector<float> read_f32_payload(std::istream& in, std::size_t count) {
  std::vector<float> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
    fail(ErrorCode::TruncatedPayload,
         "expected " + std::to_string(count) + " f32 values, got " +
             std::to_string(in.gcount() / sizeof(float)));
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  return values;
}

void write_f32_payload(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float v : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
  if (!out) {
    fail(ErrorCode::IoFailure, "write failed");
  }
}

} // namespace detail

VolumeGrid read_volume(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Dims d = parse_grid_header(in, "VXM1", "f32");
  auto values = detail::read_f32_payload(in, d.voxels());
  expect_eof(in);
  return VolumeGrid(d, std::move(values));
}

void write_volume(const VolumeGrid& grid, const std::filesystem::path& path) {
  auto out = open_out(path);
  const Dims d = grid.dims();
  out << "VXM1 " << d.nx << ' ' << d.ny << ' ' << d.nz << " f32 xyz\n";
  detail::write_f32_payload(out, grid.values());
}

Mask read_mask(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Dims d = parse_grid_header(in, "VXK1", "u8");
  std::vector<std::uint8_t> inside(d.voxels());
  in.read(reinterpret_cast<char*>(inside.data()), static_cast<std::streamsize>(inside.size()));
  if (static_cast<std::size_t>(in.gcount()) != inside.size()) {
    fail(ErrorCode::TruncatedPayload, "mask payload shorter than nx*ny*nz bytes");
  }
  expect_eof(in);
  for (auto b : inside) {
    if (b > 1) {
      fail(ErrorCode::BadMagic, "mask bytes must be 0 or 1");
    }
  }
  return Mask(d, std::move(inside));
}

void write_mask(const Mask& mask, const std::filesystem::path& path) {
  auto out = open_out(path);
  const Dims d = mask.dims();
  out << "VXK1 " << d.nx << ' ' << d.ny << ' ' << d.nz << " u8 xyz\n";
  const auto inside = mask.inside();
  out.write(reinterpret_cast<const char*>(inside.data()), static_cast<std::streamsize>(inside.size()));
  if (!out) {
    fail(ErrorCode::IoFailure, "write failed: " + path.string());
  }
}

SubjectStack read_stack(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto tok = header_tokens(in);
  if (tok.size() != 3 || tok[0] != "VXS1") {
    fail(ErrorCode::BadMagic, "expected 'VXS1 <n> <m>' header");
  }
  const std::size_t n = parse_dim(tok[1]);
  const std::size_t m = parse_dim(tok[2]);
  const std::size_t count = detail::checked_product({n, m});
  auto data = detail::read_f32_payload(in, count);
  expect_eof(in);
  return SubjectStack(n, m, std::move(data));
}

void write_stack(const SubjectStack& stack, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "VXS1 " << stack.n() << ' ' << stack.m() << '\n';
  detail::write_f32_payload(out, stack.data());
}

SubjectStack read_stack_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("subject", 0) != 0) {
    fail(ErrorCode::BadMagic, "CSV stack must start with a 'subject,voxel_0,...' header");
  }
  std::size_t m = 0;
  for (char c : line) {
    m += (c == ',');
  }
  std::vector<float> data;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ','); // subject id
    std::size_t cols = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        data.push_back(std::stof(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidArg, "bad CSV cell '" + cell + "'");
      }
      ++cols;
    }
    if (cols != m) {
      fail(ErrorCode::DimensionMismatch, "CSV row has " + std::to_string(cols) +
                                             " voxel columns, header has " + std::to_string(m));
    }
    ++n;
  }
  return SubjectStack(n, m, std::move(data));
}

VoxelSet read_region(const std::filesystem::path& path, std::size_t m) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::vector<std::size_t> idx;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream ls(line);
    long long v;
    while (ls >> v) {
      if (v < 0) {
        fail(ErrorCode::OutOfBounds, "negative voxel index in region file");
      }
      idx.push_back(static_cast<std::size_t>(v));
    }
    if (!ls.eof()) {
      fail(ErrorCode::InvalidArg, "malformed line in region file: " + line);
    }
  }
  return VoxelSet::from_unsorted(std::move(idx), m);
}

} // namespace tdpkit
