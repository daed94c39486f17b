#include "tdpkit/clusters.hpp"
#include "tdpkit/error.hpp"
#include "tdpkit/harness/experiments.hpp"
#include "tdpkit/harness/serve.hpp"
#include "tdpkit/tdp.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

using namespace tdpkit;
using namespace tdpkit::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  ServeState state;
  PermPValueMatrix pmat;
};

// Synthetic state: one planted box, two calibrated templates.
const Fixture& fixture() {
  static const std::unique_ptr<Fixture> f = [] {
    auto out = std::make_unique<Fixture>();
    out->dir = fs::temp_directory_path() / "tdpkit-unit" / "serve-state";
    fs::remove_all(out->dir);
    const SignalSpec spec{{parse_region("box:8,8,4:6,6,4:1.5")}, 1.0};
    const SyntheticData d = gen_synthetic({16, 16, 8}, 20, spec, 3);
    out->pmat = build_perm_pvalues(d.stack, 100, 5);
    const ObservedMaps maps = observed_maps(d.stack, Sidedness::TwoSided);
    const CriticalVector d27 = calibrate_simes(out->pmat, 27, 0.05).ell;
    const CriticalVector d0 = calibrate_simes(out->pmat, 0, 0.05).ell;
    save_serve_state(out->dir, d.mask, unmask(maps.z, d.mask), out->pmat.observed(),
                     {{"pari-d27", d27}, {"pari-d0", d0}});
    out->state = load_serve_state(out->dir);
    return out;
  }();
  return *f;
}

json call(const std::string& method, const std::string& path, const json& body = nullptr, const Params& params = {},
          int expect = 200) {
  const Response r = handle_request(fixture().state, method, path, params, body.is_null() ? "" : body.dump());
  INFO(r.body);
  CHECK(r.status == expect);
  return json::parse(r.body);
}

std::string run_cli(const std::string& args) {
  const fs::path out = fixture().dir.parent_path() / "cli-out.txt";
  const std::string cmd = std::string(TDPKIT_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  INFO(cmd << "\n" << ss.str());
  REQUIRE(rc == 0);
  return ss.str();
}

} // namespace

TEST_CASE("GET /meta echoes the loaded state") {
  const json m = call("GET", "/meta");
  CHECK(m["dims"] == json::array({16, 16, 8}));
  CHECK(m["m"] == 2048);
  CHECK(m["templates"] == json::array({"pari-d0", "pari-d27"}));
}

TEST_CASE("GET /templates lists provenance") {
  const json t = call("GET", "/templates");
  REQUIRE(t.size() == 2);
  CHECK(t[1]["id"] == "pari-d27");
  CHECK(t[1]["delta"] == 27);
  CHECK(t[1]["family"] == "simes");
  CHECK(t[1]["w"] == 100);
}

TEST_CASE("GET /slice") {
  const json s = call("GET", "/slice", nullptr, {{"axis", "z"}, {"index", "4"}, {"map", "z"}});
  CHECK(s["width"] == 16);
  CHECK(s["height"] == 16);
  REQUIRE(s["values"].size() == 256);
  const Dims d = fixture().state.mask.dims();
  const std::size_t flat = flat_index({3, 7, 4}, d);
  CHECK(s["values"][3 + 16 * 7].get<float>() == fixture().state.zmap.values()[flat]);
  CHECK(s["masked_index"][3 + 16 * 7] == fixture().state.mask.masked_of(flat));

  const json x = call("GET", "/slice", nullptr, {{"axis", "x"}, {"index", "2"}, {"map", "p"}});
  CHECK(x["width"] == 16);
  CHECK(x["height"] == 8);
  CHECK(x["values"][5 + 16 * 6].get<float>() == fixture().state.pmap_grid.values()[flat_index({2, 5, 6}, d)]);

  call("GET", "/slice", nullptr, {{"axis", "z"}, {"index", "8"}}, 400);
  call("GET", "/slice", nullptr, {{"axis", "w"}, {"index", "0"}}, 400);
  call("GET", "/slice", nullptr, {{"axis", "z"}, {"index", "-1"}}, 400);
  call("GET", "/slice", nullptr, {{"axis", "z"}, {"index", "1"}, {"map", "t"}}, 400);
}

TEST_CASE("POST /tdp") {
  const CriticalVector* ell = fixture().state.find_template("pari-d27");
  REQUIRE(ell != nullptr);
  std::vector<std::size_t> voxels;
  for (std::size_t i = 500; i < 900; i += 3) {
    voxels.push_back(i);
  }
  const Response r = handle_request(fixture().state, "POST", "/tdp", {},
                                    json{{"voxels", voxels}, {"template", "pari-d27"}}.dump());
  CHECK(r.status == 200);
  CHECK(r.body == tdp_result_json(tdp_query(VoxelSet(voxels, 2048), fixture().state.pmap, *ell)));

  SUBCASE("errors") {
    const json e = call("POST", "/tdp", {{"voxels", json::array()}}, {}, 400);
    CHECK(e["code"] == "EmptySet");
    CHECK(e.contains("message"));
    CHECK(call("POST", "/tdp", {{"voxels", {1, 2}}, {"template", "nope"}}, {}, 404)["code"] == "UnknownTemplate");
    CHECK(call("POST", "/tdp", {{"voxels", {1, 5000}}}, {}, 400)["code"] == "OutOfBounds");
    CHECK(call("POST", "/tdp", {{"voxels", {1, -2}}}, {}, 400)["code"] == "MalformedRequest");
    CHECK(call("POST", "/tdp", {{"voxels", "1,2"}}, {}, 400)["code"] == "MalformedRequest");
    const Response bad = handle_request(fixture().state, "POST", "/tdp", {}, "{not json");
    CHECK(bad.status == 400);
    CHECK(call("GET", "/tdp", nullptr, {}, 405)["code"] == "MethodNotAllowed");
    CHECK(call("GET", "/nowhere", nullptr, {}, 404)["code"] == "NotFound");
  }
}

TEST_CASE("POST /clusters rows equal /tdp on their voxels") {
  const json c = call("POST", "/clusters", {{"template", "pari-d27"}, {"kappa", 3.0}, {"min_size", 20}});
  REQUIRE(!c["clusters"].empty());
  for (const json& row : c["clusters"]) {
    const json t = call("POST", "/tdp", {{"voxels", row["voxels"]}, {"template", "pari-d27"}});
    CHECK(t["size"] == row["size"]);
    CHECK(t["a_lower"] == row["a_lower"]);
    CHECK(t["tdp_lower"] == row["tdp_lower"]);
  }
  CHECK(call("POST", "/clusters", {{"connectivity", 7}}, {}, 400)["code"] == "InvalidArg");
  CHECK(call("POST", "/clusters", {{"kappa", 100.0}})["clusters"].empty());
}

TEST_CASE("POST /largest-region") {
  const json r = call("POST", "/largest-region", {{"template", "pari-d0"}, {"tdp", 0.9}});
  const LargestRegion want = largest_region(fixture().state.pmap, *fixture().state.find_template("pari-d0"), 0.9);
  CHECK(r["size"] == want.k);
  CHECK(r["a_lower"] == want.a_lower);
  CHECK(r["voxels"].size() == want.k);
  call("POST", "/largest-region", {{"template", "pari-d0"}}, {}, 400);
  call("POST", "/largest-region", {{"tdp", 1.5}}, {}, 400);
}

TEST_CASE("serve and CLI answer identically") {
  const Fixture& f = fixture();
  const fs::path region = f.dir.parent_path() / "region.txt";
  std::vector<std::size_t> voxels;
  {
    std::ofstream out(region);
    for (std::size_t i = 300; i < 1400; i += 7) {
      out << i << "\n";
      voxels.push_back(i);
    }
  }
  for (const char* id : {"pari-d27", "pari-d0"}) {
    const fs::path tpl = f.dir / "templates" / (std::string(id) + ".json");
    const std::string cli = run_cli("bound --pmap " + (f.dir / "pmap.vxm").string() + " --mask " +
                                    (f.dir / "mask.vxk").string() + " --template " + tpl.string() + " --region " +
                                    region.string());
    const Response api =
        handle_request(f.state, "POST", "/tdp", {}, json{{"voxels", voxels}, {"template", id}}.dump());
    CHECK(cli == api.body + "\n");

    const std::string lr = run_cli("largest-region --pmap " + (f.dir / "pmap.vxm").string() + " --mask " +
                                   (f.dir / "mask.vxk").string() + " --template " + tpl.string() + " --tdp 0.8");
    json lj = json::parse(handle_request(f.state, "POST", "/largest-region", {},
                                         json{{"template", id}, {"tdp", 0.8}}.dump())
                              .body);
    lj.erase("voxels");
    CHECK(json::parse(lr) == lj);
  }
}

TEST_CASE("state loading rejects inconsistent directories") {
  const fs::path bad = fixture().dir.parent_path() / "serve-bad";
  fs::remove_all(bad);
  CHECK_THROWS_AS(load_serve_state(bad), tdpkit::Error);
  fs::create_directories(bad / "templates");
  fs::copy_file(fixture().dir / "mask.vxk", bad / "mask.vxk");
  fs::copy_file(fixture().dir / "zmap.vxm", bad / "zmap.vxm");
  fs::copy_file(fixture().dir / "pmap.vxm", bad / "pmap.vxm");
  CHECK_THROWS_AS(load_serve_state(bad), tdpkit::Error);
  save_template(simes_template(10, 0, 0.1), bad / "templates" / "short.json");
  CHECK_THROWS_AS(load_serve_state(bad), tdpkit::Error);
}

TEST_CASE("HTTP round trip with concurrent clients") {
  httplib::Server server;
  install_routes(server, fixture().state);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string expect = handle_request(fixture().state, "GET", "/meta", {}, "").body;
  std::vector<std::thread> clients;
  std::vector<int> ok(4, 0);
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client client("127.0.0.1", port);
      for (int k = 0; k < 5; ++k) {
        const auto meta = client.Get("/meta");
        const auto tdp = client.Post("/tdp", R"({"voxels":[]})", "application/json");
        ok[c] += meta && meta->status == 200 && meta->body == expect && tdp && tdp->status == 400;
      }
    });
  }
  for (auto& t : clients) {
    t.join();
  }
  server.stop();
  listener.join();
  CHECK(ok == std::vector<int>(4, 5));
}
