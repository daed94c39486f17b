#include "tdpkit/error.hpp"
#include "tdpkit/volume.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tdpkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tdpkit-unit";
  fs::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArg;
}

} // namespace

TEST_CASE("flat_index matches the x-fastest formula") {
  const Dims d{4, 4, 4};
  CHECK(flat_index({0, 0, 0}, d) == 0);
  CHECK(flat_index({1, 2, 3}, d) == 57);
  CHECK(code_of([&] { flat_index({4, 0, 0}, d); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([&] { coord_of(64, d); }) == ErrorCode::OutOfBounds);
}

TEST_CASE("flat_index and coord_of are inverse over the whole grid") {
  const Dims d{3, 2, 2};
  std::size_t expect = 0;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const Coord c{x, y, z};
        REQUIRE(flat_index(c, d) == expect);
        CHECK(coord_of(expect, d) == c);
        ++expect;
      }
    }
  }
}

TEST_CASE("masked_vector") {
  const Dims d{2, 2, 1};
  const VolumeGrid g(d, {1, 2, 3, 4});

  SUBCASE("full mask keeps everything") {
    const auto v = masked_vector(g, Mask::full(d));
    CHECK(v == std::vector<float>{1, 2, 3, 4});
  }
  SUBCASE("checkerboard keeps even x+y+z") {
    const Mask mask(d, {1, 0, 0, 1});
    CHECK(mask.m() == 2);
    CHECK(masked_vector(g, mask) == std::vector<float>{1, 4});
    CHECK(mask.masked_of(3) == 1);
    CHECK(mask.masked_of(1) == Mask::npos);
    CHECK(mask.flat_of(1) == 3);
  }
  SUBCASE("empty mask is rejected") {
    CHECK(code_of([&] { Mask(d, {0, 0, 0, 0}); }) == ErrorCode::EmptyMask);
  }
  SUBCASE("dims must agree") {
    CHECK(code_of([&] { masked_vector(g, Mask::full({4, 1, 1})); }) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("NaN is allowed only outside the mask") {
    const VolumeGrid holes(d, {1, std::nanf(""), std::nanf(""), 4});
    CHECK(masked_vector(holes, Mask(d, {1, 0, 0, 1})).size() == 2);
    CHECK(code_of([&] { masked_vector(holes, Mask::full(d)); }) == ErrorCode::NonFiniteInMask);
  }
  SUBCASE("unmask inverts masked_vector and marks holes with NaN") {
    const Mask mask(d, {0, 1, 1, 0});
    const VolumeGrid back = unmask(masked_vector(g, mask), mask);
    CHECK(std::isnan(back.values()[0]));
    CHECK(back.values()[1] == 2);
    CHECK(back.values()[2] == 3);
    CHECK(std::isnan(back.values()[3]));
  }
}

TEST_CASE("masked_vector length equals m for random masks") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution inside(0.3);
  const Dims d{5, 4, 3};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::uint8_t> bits(d.voxels());
    for (auto& b : bits) {
      b = inside(rng);
    }
    bits[rep % bits.size()] = 1;
    const Mask mask(d, bits);
    CHECK(masked_vector(VolumeGrid(d, 1.0f), mask).size() == mask.m());
  }
}

TEST_CASE("VoxelSet invariants") {
  CHECK(VoxelSet({0, 2, 5}, 6).size() == 3);
  CHECK(code_of([] { VoxelSet({2, 2}, 6); }) == ErrorCode::InvalidArg);
  CHECK(code_of([] { VoxelSet({3, 1}, 6); }) == ErrorCode::InvalidArg);
  CHECK(code_of([] { VoxelSet({6}, 6); }) == ErrorCode::OutOfBounds);
  const VoxelSet s = VoxelSet::from_unsorted({5, 1, 5, 0}, 6);
  CHECK(std::vector<std::size_t>(s.indices().begin(), s.indices().end()) == std::vector<std::size_t>{0, 1, 5});
}

TEST_CASE("SubjectStack invariants") {
  CHECK(code_of([] { SubjectStack(1, 2, {1, 2}); }) == ErrorCode::InvalidArg);
  CHECK(code_of([] { SubjectStack(2, 2, {1, 2, 3}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { SubjectStack(2, 1, {1, std::nanf("")}); }) == ErrorCode::NonFiniteInMask);
}

TEST_CASE("volume file round-trip") {
  SUBCASE("zeros") {
    const VolumeGrid g({2, 2, 2}, 0.0f);
    write_volume(g, scratch("zeros.vxm"));
    const VolumeGrid back = read_volume(scratch("zeros.vxm"));
    CHECK(back.dims() == g.dims());
    CHECK(std::equal(back.values().begin(), back.values().end(), g.values().begin()));
  }
  SUBCASE("random 16x16x8 grids are bitwise equal, 100 seeds") {
    const Dims d{16, 16, 8};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::uint32_t> bits;
      std::vector<float> vals(d.voxels());
      for (auto& v : vals) {
        do {
          v = std::bit_cast<float>(bits(rng));
        } while (!std::isfinite(v));
      }
      const VolumeGrid g(d, vals);
      write_volume(g, scratch("rand.vxm"));
      const VolumeGrid back = read_volume(scratch("rand.vxm"));
      REQUIRE(back.size() == g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        REQUIRE(std::bit_cast<std::uint32_t>(back.values()[i]) == std::bit_cast<std::uint32_t>(g.values()[i]));
      }
    }
  }
}

TEST_CASE("volume file errors") {
  const fs::path p = scratch("bad.vxm");
  const auto write_raw = [&](const std::string& header, std::size_t floats) {
    std::ofstream out(p, std::ios::binary);
    out << header;
    const float zero = 0.0f;
    for (std::size_t i = 0; i < floats; ++i) {
      out.write(reinterpret_cast<const char*>(&zero), sizeof zero);
    }
  };
  write_raw("VXM1 2 2 2 f32 xyz\n", 7);
  CHECK(code_of([&] { read_volume(p); }) == ErrorCode::TruncatedPayload);
  write_raw("VXM1 2 2 2 f32 xyz\n", 9);
  CHECK(code_of([&] { read_volume(p); }) == ErrorCode::TruncatedPayload);
  write_raw("VXQ1 2 2 2 f32 xyz\n", 8);
  CHECK(code_of([&] { read_volume(p); }) == ErrorCode::BadMagic);
  write_raw("VXM1 100000 100000 100000 f32 xyz\n", 0);
  CHECK(code_of([&] { read_volume(p); }) == ErrorCode::DimOverflow);
  CHECK(code_of([&] { read_volume(scratch("missing.vxm")); }) == ErrorCode::IoFailure);
}

TEST_CASE("mask and stack round-trip") {
  const Mask mask({3, 1, 2}, {1, 0, 1, 1, 0, 1});
  write_mask(mask, scratch("m.vxk"));
  const Mask back = read_mask(scratch("m.vxk"));
  CHECK(back.dims() == mask.dims());
  CHECK(back.m() == 4);
  CHECK(std::equal(back.inside().begin(), back.inside().end(), mask.inside().begin()));

  const SubjectStack stack(2, 3, {1, 2, 3, -4, 5.5f, 6});
  write_stack(stack, scratch("s.vxs"));
  const SubjectStack sb = read_stack(scratch("s.vxs"));
  CHECK(sb.n() == 2);
  CHECK(sb.m() == 3);
  CHECK(std::equal(sb.data().begin(), sb.data().end(), stack.data().begin()));
}

TEST_CASE("stack CSV import and region files") {
  {
    std::ofstream out(scratch("s.csv"));
    out << "subject,voxel_0,voxel_1\n"
        << "a,1.5,2\n"
        << "b,-1,0.25\n";
  }
  const SubjectStack s = read_stack_csv(scratch("s.csv"));
  CHECK(s.n() == 2);
  CHECK(s.m() == 2);
  CHECK(s.subject(1)[0] == -1.0f);
  CHECK(s.subject(1)[1] == 0.25f);

  {
    std::ofstream out(scratch("r.txt"));
    out << "# region\n4\n\n1\n  2\n";
  }
  const VoxelSet r = read_region(scratch("r.txt"), 5);
  CHECK(std::vector<std::size_t>(r.indices().begin(), r.indices().end()) == std::vector<std::size_t>{1, 2, 4});
  CHECK(code_of([&] { read_region(scratch("r.txt"), 4); }) == ErrorCode::OutOfBounds);
}
