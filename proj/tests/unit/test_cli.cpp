#include "tdpkit/templates.hpp"
#include "tdpkit/volume.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tdpkit-unit" / "cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int rc;
  std::string out;
};

Run cli(const std::string& args) {
  const fs::path out = workdir() / "stdout.txt";
  const std::string cmd = std::string(TDPKIT_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {rc, ss.str()};
}

std::string at(const char* name) { return (workdir() / name).string(); }

} // namespace

TEST_CASE("simulate, pvalues, calibrate and bound compose") {
  Run r = cli("simulate --dims 10,10,6 --n 12 --region box:5,5,3:4,4,2:2 --sigma 1 --seed 4 --out " + at("d"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["truth"] == 32);

  r = cli("pvalues --stack " + at("d/stack.vxs") + " --mask " + at("d/mask.vxk") + " --w 80 --seed 2 --out " +
          at("p.vxp") + " --maps " + at("state"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(fs::exists(at("p.vxp.json")));
  CHECK(fs::exists(at("state/zmap.vxm")));

  r = cli("calibrate --pmat " + at("p.vxp") + " --family simes --delta 3 --alpha 0.1 --out " +
          at("state/templates/pari-d3.json"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  const json cal = json::parse(r.out);
  CHECK(cal["jer_check"]["pass"] == true);

  r = cli("calibrate --stack " + at("d/stack.vxs") + " --w 80 --seed 2 --family simes --delta 3 --alpha 0.1 --out " +
          at("stream.json"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["lambda_cal"] == cal["lambda_cal"]);

  r = cli("calibrate --pmat " + at("p.vxp") + " --stack " + at("d/stack.vxs") +
          " --family learned --kmax 50 --reuse-data --w-tilde 40 --alpha 0.1 --out " +
          at("state/templates/notip-k50.json"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(tdpkit::load_template(at("state/templates/notip-k50.json")).provenance().external_mode == "reuse-data");

  r = cli("calibrate --pmat " + at("p.vxp") + " --family learned --kmax 50 --external " + at("p.vxp") +
          " --alpha 0.1 --out " + at("ext.json"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(tdpkit::load_template(at("ext.json")).provenance().external_mode == "external");

  r = cli("bound --pmat " + at("p.vxp") + " --template " + at("state/templates/pari-d3.json") + " --region " +
          at("d/truth.txt"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["size"] == 32);

  r = cli("clusters --mask " + at("d/mask.vxk") + " --pmat " + at("p.vxp") + " --zmap " + at("state/zmap.vxm") +
          " --template " + at("state/templates/pari-d3.json") + " --min-size 5");
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(r.out.rfind("id,size,peak_stat,peak_x,peak_y,peak_z,a_lower,tdp_lower\n", 0) == 0);

  r = cli("plot-data --pmat " + at("p.vxp") + " --template d3=" + at("state/templates/pari-d3.json") +
          " --template " + at("state/templates/notip-k50.json") + " --cluster-k 10");
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(r.out.rfind("rank,p,d3,notip-k50\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 11);
}

TEST_CASE("config file values yield to flags") {
  {
    std::ofstream cfg(at("validity.cfg"));
    cfg << "# null check\n"
        << "reps = 6\n"
        << "dims=6,6,4\n"
        << "method=simes:2\n"
        << "w=40\n"
        << "alpha=0.2\n";
  }
  Run r = cli("validity --config " + at("validity.cfg"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  json j = json::parse(r.out);
  CHECK(j["reps"] == 6);
  CHECK(j["alpha"] == 0.2);

  r = cli("validity --config " + at("validity.cfg") + " --reps 4 --out " + at("val"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["reps"] == 4);
  CHECK(fs::exists(at("val/manifest.json")));

  {
    std::ofstream cfg(at("bad.cfg"));
    cfg << "no-such-flag=1\n";
  }
  CHECK(cli("validity --config " + at("bad.cfg")).rc != 0);
}

TEST_CASE("errors exit non-zero with the error code") {
  const Run r = cli("bound --pmat " + at("missing.vxp") + " --template x --region y");
  CHECK(r.rc != 0);
  CHECK(r.out.find("IoFailure") != std::string::npos);
  CHECK(cli("frobnicate").rc != 0);
}

TEST_CASE("compare and sweep-delta write reports") {
  Run r = cli("compare --dims 10,10,6 --n 12 --region box:5,5,3:4,4,3:2 --datasets 2 --w 40 --w-tilde 40 "
              "--method simes:0 --method simes:3 --tdp 0.8 --out " +
              at("cmp"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  for (const char* f : {"manifest.json", "sizes.csv", "relative_detection.csv", "scatter.csv", "relative_summary.csv"}) {
    CHECK(fs::exists(workdir() / "cmp" / f));
  }
  r = cli("sweep-delta --dims 10,10,6 --n 12 --region box:5,5,3:4,4,3:2 --w 40 --delta 0 --delta 9 --min-size 5 "
          "--out " +
          at("sweep"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["deltas"] == json::array({0, 9}));
  r = cli("sweep-delta --dims 10,10,6 --n 12 --region box:5,5,3:4,4,3:2 --w 40 --delta 0,3,9 --min-size 5 "
          "--out " +
          at("sweep-list"));
  REQUIRE_MESSAGE(r.rc == 0, r.out);
  CHECK(json::parse(r.out)["deltas"] == json::array({0, 3, 9}));
}
