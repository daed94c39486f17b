#include "support/oracles.hpp"

#include "tdpkit/error.hpp"
#include "tdpkit/perm.hpp"
#include "tdpkit/templates.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace tdpkit;

namespace {

PermPValueMatrix random_pmat(std::mt19937_64& rng, std::size_t w, std::size_t m) {
  std::vector<float> v;
  v.reserve(w * m);
  for (std::size_t j = 0; j < w; ++j) {
    const auto row = oracle::uniform_pvalues(rng, m);
    v.insert(v.end(), row.begin(), row.end());
  }
  return PermPValueMatrix(w, m, std::move(v));
}

std::vector<float> sorted_uniform(std::mt19937_64& rng, std::size_t m) {
  auto v = oracle::mixed_pvalues(rng, m);
  std::sort(v.begin(), v.end());
  return v;
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

TEST_CASE("shifted Simes template") {
  CHECK(simes_template(10, 0, 0.1).at(5) == doctest::Approx(0.05));
  const CriticalVector s = simes_template(100, 27, 0.3);
  for (std::size_t i = 1; i <= 27; ++i) {
    CHECK(s.at(i) == 0.0);
  }
  CHECK(s.at(28) > 0.0);
  CHECK(s.constrained() == 100);
  CHECK(simes_template(10, 0, 50.0).at(10) == 1.0);
  CHECK(code_of([] { simes_template(10, 10, 0.1); }) == ErrorCode::InvalidArg);

  SUBCASE("delta = 0 is the unshifted Simes line") {
    for (double lambda : {0.01, 0.05, 0.5}) {
      const CriticalVector t = simes_template(37, 0, lambda);
      for (std::size_t i = 1; i <= 37; ++i) {
        CHECK(t.at(i) == doctest::Approx(std::min(1.0, i * lambda / 37.0)).epsilon(1e-15));
      }
    }
  }
  SUBCASE("non-decreasing in rank and in lambda") {
    for (std::size_t delta : {0u, 3u, 27u}) {
      double prev_lambda_value = 0.0;
      for (double lambda = 0.0; lambda <= 2.0; lambda += 0.01) {
        const CriticalVector t = simes_template(60, delta, lambda);
        for (std::size_t i = 2; i <= 60; ++i) {
          REQUIRE(t.at(i) >= t.at(i - 1));
        }
        REQUIRE(t.at(45) >= prev_lambda_value);
        prev_lambda_value = t.at(45);
      }
    }
  }
}

TEST_CASE("pivotal_simes examples") {
  const std::vector<float> c{0.1f, 0.2f, 0.9f};
  CHECK(pivotal_simes(c, 0) == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(pivotal_simes(std::vector<float>(8, 1.0f), 0) == doctest::Approx(1.0));
  const std::vector<float> d{0.01f, 0.2f, 0.3f, 0.7f};
  CHECK(pivotal_simes(d, 3) == doctest::Approx(0.7f).epsilon(1e-7));
  CHECK(code_of([] { pivotal_simes(std::vector<float>{0.5f, 0.1f}, 0); }) == ErrorCode::InvalidArg);
}

TEST_CASE("pivotal_simes is the exact crossing onset") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t m = 1 + rep % 30;
    const std::size_t delta = rep % m;
    const auto curve = sorted_uniform(rng, m);
    const double lam = pivotal_simes(curve, delta);
    REQUIRE(lam == oracle::pivotal_simes(curve, delta));
    CHECK(crosses(curve, simes_template(m, delta, lam)));
    CHECK_FALSE(crosses(curve, simes_template(m, delta, std::nextafter(lam, 0.0))));
  }
}

TEST_CASE("learn_family") {
  SUBCASE("w_tilde = 1 gives the sorted vector truncated at k_max") {
    const PermPValueMatrix ext(1, 5, {0.4f, 0.1f, 0.9f, 0.2f, 0.3f});
    const LearnedFamily f = learn_family(ext, 3);
    CHECK(f.row(1)[0] == 0.1f);
    CHECK(f.row(2)[0] == 0.2f);
    CHECK(f.row(3)[0] == 0.3f);
  }
  SUBCASE("rows sort the per-transform order statistics") {
    const PermPValueMatrix ext(3, 2, {0.05f, 0.5f, 0.01f, 0.6f, 0.7f, 0.02f});
    const LearnedFamily f = learn_family(ext, 1);
    CHECK(std::vector<float>(f.row(1).begin(), f.row(1).end()) == std::vector<float>{0.01f, 0.02f, 0.05f});
  }
  SUBCASE("rows are non-decreasing in rank, 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      const LearnedFamily f = learn_family(random_pmat(rng, 50, 20), 20);
      for (std::size_t i = 2; i <= 20; ++i) {
        for (std::size_t b = 0; b < 50; ++b) {
          REQUIRE(f.row(i)[b] >= f.row(i - 1)[b]);
        }
      }
    }
  }
  SUBCASE("analysis m must equal the external m") {
    std::mt19937_64 rng(1);
    const LearnedFamily f = learn_family(random_pmat(rng, 4, 10), 5);
    CHECK(code_of([&] { require_family_matches(f, 11); }) == ErrorCode::DimensionMismatch);
    CHECK_NOTHROW(require_family_matches(f, 10));
  }
}

TEST_CASE("learned_template") {
  const LearnedFamily f(6, 5, 3,
                        {0.01f, 0.02f, 0.03f, 0.02f, 0.03f, 0.2f, 0.05f, 0.1f, 0.3f, 0.06f, 0.2f, 0.4f, 0.1f, 0.4f, 0.5f});
  CHECK(learned_template(f, 2).at(5) == doctest::Approx(0.4f));
  const CriticalVector top = learned_template(f, 3);
  const CriticalVector bottom = learned_template(f, 1);
  for (std::size_t i = 1; i <= 5; ++i) {
    CHECK(top.at(i) == f.row(i)[2]);
    CHECK(bottom.at(i) == f.row(i)[0]);
  }
  CHECK_FALSE(top.is_constrained(6));
  CHECK(top.constrained() == 5);
  CHECK(code_of([&] { learned_template(f, 0); }) == ErrorCode::InvalidArg);
  CHECK(code_of([&] { learned_template(f, 4); }) == ErrorCode::InvalidArg);

  SUBCASE("non-decreasing in b") {
    for (std::size_t b = 2; b <= 3; ++b) {
      for (std::size_t i = 1; i <= 5; ++i) {
        CHECK(learned_template(f, b).at(i) >= learned_template(f, b - 1).at(i));
      }
    }
  }
}

TEST_CASE("pivotal_learned") {
  const LearnedFamily f(2, 2, 3, {0.01f, 0.02f, 0.05f, 0.03f, 0.06f, 0.10f});
  CHECK(pivotal_learned(std::vector<float>{0.04f, 0.07f}, f) == doctest::Approx(2.0 / 3.0));
  CHECK(pivotal_learned(std::vector<float>{0.001f, 0.002f}, f) == 0.0);
  CHECK(pivotal_learned(std::vector<float>{0.5f, 0.6f}, f) == 1.0);

  SUBCASE("agrees with the grid-scan oracle") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t m = 2 + rep % 29;
      const std::size_t wt = 1 + rep % 20;
      const std::size_t k = 1 + rep % m;
      const LearnedFamily fam = learn_family(random_pmat(rng, wt, m), k);
      const auto curve = sorted_uniform(rng, m);
      const std::size_t b = pivotal_learned_index(curve, fam);
      REQUIRE(b == oracle::pivotal_learned_index(curve, fam));
      CHECK(pivotal_learned(curve, fam) == static_cast<double>(b) / static_cast<double>(wt));
    }
  }
}

TEST_CASE("calibrate counting rule") {
  std::vector<double> tenths;
  for (int k = 1; k <= 10; ++k) {
    tenths.push_back(k / 10.0);
  }
  CHECK(calibrate(tenths, 0.2) == doctest::Approx(0.2));
  CHECK(calibrate(tenths, 0.05) == 0.0);
  CHECK(calibrate(std::vector<double>(100, 0.37), 0.05) == 0.0);
  CHECK(max_crossings(0.1, 30) == 3);
  CHECK(max_crossings(0.07, 100) == 7);
  SUBCASE("last-cleared pivotals keep the threshold value") {
    CHECK(calibrate(tenths, 0.2, PivotalKind::LastCleared) == doctest::Approx(0.3));
    CHECK(calibrate(tenths, 0.05, PivotalKind::LastCleared) == doctest::Approx(0.1));
  }
}

TEST_CASE("jer_check") {
  std::mt19937_64 rng(4);
  const PermPValueMatrix p = random_pmat(rng, 40, 25);
  const JerCheck zero = jer_check(CriticalVector(std::vector<double>(25, 0.0), 25), p, 0.05);
  CHECK(zero.pass);
  CHECK(zero.crossings == 0);
  const JerCheck top = jer_check(CriticalVector(std::vector<double>(25, 1.0), 25), p, 0.05);
  CHECK_FALSE(top.pass);
  CHECK(top.crossings == 40);
  CHECK(top.allowed == 2);
  CHECK(code_of([&] { jer_check(simes_template(24, 0, 0.1), p, 0.05); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("calibrated Simes passes and the next pivotal fails, 200 null matrices") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const PermPValueMatrix p = random_pmat(rng, 100, 50);
    const std::size_t delta = seed % 8;
    const CalibratedTemplate cal = calibrate_simes(p, delta, 0.1);
    REQUIRE(jer_check(cal.ell, p, 0.1).pass);
    REQUIRE(oracle::crossing_rows(p, cal.ell) <= 10);
    double next = std::numeric_limits<double>::infinity();
    for (double v : cal.calibration.pivotals) {
      if (v > cal.calibration.lambda_cal) {
        next = std::min(next, v);
      }
    }
    REQUIRE(std::isfinite(next));
    REQUIRE_FALSE(jer_check(simes_template(50, delta, next), p, 0.1).pass);
  }
}

TEST_CASE("calibrated learned template passes and the next grid pivotal fails") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    const LearnedFamily fam = learn_family(random_pmat(rng, 60, 40), 1 + seed % 40);
    const PermPValueMatrix p = random_pmat(rng, 100, 40);
    const CalibratedTemplate cal = calibrate_learned(p, fam, 0.1);
    REQUIRE(jer_check(cal.ell, p, 0.1).pass);
    double next = std::numeric_limits<double>::infinity();
    for (double v : cal.calibration.pivotals) {
      if (v > cal.calibration.lambda_cal) {
        next = std::min(next, v);
      }
    }
    if (std::isfinite(next)) {
      const auto b = static_cast<std::size_t>(std::llround(next * 60));
      REQUIRE_FALSE(jer_check(learned_template(fam, b), p, 0.1).pass);
    }
  }
}

TEST_CASE("b = 0 gives the zero template") {
  // Every curve sits below every learned row, so no grid template is cleared.
  const LearnedFamily fam(3, 2, 4, {0.5f, 0.6f, 0.7f, 0.8f, 0.6f, 0.7f, 0.8f, 0.9f});
  const PermPValueMatrix p(5, 3, std::vector<float>(15, 0.01f));
  const CalibratedTemplate cal = calibrate_learned(p, fam, 0.2);
  CHECK(cal.calibration.lambda_cal == 0.0);
  CHECK(cal.ell.constrained() == 2);
  for (std::size_t i = 1; i <= 3; ++i) {
    CHECK(cal.ell.at(i) == 0.0);
  }
  CHECK(jer_check(cal.ell, p, 0.2).crossings == 0);
}

TEST_CASE("streaming calibration equals matrix calibration") {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g;
  std::vector<float> data(12 * 300);
  for (auto& v : data) {
    v = g(rng);
  }
  const SubjectStack s(12, 300, data);
  const FlipMatrix f = gen_sign_flips(12, 80, 19);
  const PermPValueMatrix p = build_perm_pvalues(s, f);
  const CalibratedTemplate a = calibrate_simes(p, 5, 0.1);
  const CalibratedTemplate b = calibrate_simes(s, f, Sidedness::TwoSided, 5, 0.1, 3);
  CHECK(a.calibration.lambda_cal == b.calibration.lambda_cal);
  CHECK(a.calibration.pivotals == b.calibration.pivotals);

  const LearnedFamily fam = learn_family(s, gen_sign_flips(12, 50, 77), Sidedness::TwoSided, 40);
  const CalibratedTemplate c = calibrate_learned(p, fam, 0.1);
  const CalibratedTemplate d = calibrate_learned(s, f, Sidedness::TwoSided, fam, 0.1, 2);
  CHECK(c.calibration.lambda_cal == d.calibration.lambda_cal);
  CHECK(std::equal(c.ell.values().begin(), c.ell.values().end(), d.ell.values().begin()));
}

TEST_CASE("CriticalVector validation") {
  CHECK(code_of([] { CriticalVector({0.2, 0.1}, 2); }) == ErrorCode::InvalidArg);
  CHECK(code_of([] { CriticalVector({0.2, 1.1}, 2); }) == ErrorCode::InvalidArg);
  CHECK(code_of([] { CriticalVector({0.1, 0.2}, 3); }) == ErrorCode::InvalidArg);
  const CriticalVector v({0.1, 0.9}, 1);
  CHECK(v.at(2) == 0.0);
}

TEST_CASE("template JSON round-trip") {
  const LearnedFamily fam(4, 2, 2, {0.1f, 0.2f, 0.3f, 0.4f});
  CriticalVector t = learned_template(fam, 2);
  t.provenance().alpha = 0.05;
  t.provenance().seed = 9;
  t.provenance().external_mode = "reuse-data";
  const std::string text = template_to_json(t);
  CHECK(text.find("null") != std::string::npos);
  const CriticalVector back = template_from_json(text);
  CHECK(back.constrained() == 2);
  CHECK(back.m() == 4);
  CHECK(std::equal(back.values().begin(), back.values().end(), t.values().begin()));
  CHECK(back.provenance().family == FamilyKind::Learned);
  CHECK(back.provenance().k_max == 2);
  CHECK(back.provenance().w_tilde == 2);
  CHECK(back.provenance().external_mode == "reuse-data");

  const CriticalVector s = simes_template(5, 1, 0.123456789012345);
  const CriticalVector sb = template_from_json(template_to_json(s));
  CHECK(std::equal(sb.values().begin(), sb.values().end(), s.values().begin()));
  CHECK(sb.provenance().delta == 1);

  CHECK_THROWS_AS(template_from_json(R"({"family":"simes","m":3,"ell":[0.1,null,0.2]})"), Error);
}
