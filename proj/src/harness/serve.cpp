#include "tdpkit/harness/serve.hpp"

#include "tdpkit/clusters.hpp"
#include "tdpkit/error.hpp"
#include "tdpkit/tdp.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace tdpkit::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Request-level failure that is not a library error code.
struct RequestError {
  int status;
  std::string code;
  std::string message;
};

Response error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}.dump()};
}

int status_for(ErrorCode code) {
  switch (code) {
  case ErrorCode::IoFailure:
    return 500;
  default:
    return 400;
  }
}

json parse_body(const std::string& body) {
  if (body.empty()) {
    return json::object();
  }
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw RequestError{400, "MalformedRequest", "request body must be a JSON object"};
  }
  return j;
}

const CriticalVector& require_template(const ServeState& state, const json& req) {
  if (!req.contains("template")) {
    if (state.templates.empty()) {
      throw RequestError{404, "UnknownTemplate", "no templates loaded"};
    }
    return state.templates.front().second;
  }
  if (!req["template"].is_string()) {
    throw RequestError{400, "MalformedRequest", "'template' must be a string"};
  }
  const std::string id = req["template"].get<std::string>();
  const CriticalVector* ell = state.find_template(id);
  if (ell == nullptr) {
    throw RequestError{404, "UnknownTemplate", "no template '" + id + "'"};
  }
  return *ell;
}

template <class T>
T field_or(const json& req, const char* key, T fallback) {
  if (!req.contains(key)) {
    return fallback;
  }
  try {
    return req[key].get<T>();
  } catch (const json::exception&) {
    throw RequestError{400, "MalformedRequest", std::string("bad type for '") + key + "'"};
  }
}

std::vector<std::size_t> voxel_list(const json& req) {
  if (!req.contains("voxels") || !req["voxels"].is_array()) {
    throw RequestError{400, "MalformedRequest", "'voxels' must be an array of masked indices"};
  }
  std::vector<std::size_t> out;
  out.reserve(req["voxels"].size());
  for (const json& v : req["voxels"]) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw RequestError{400, "MalformedRequest", "voxel indices must be non-negative integers"};
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::string param(const Params& params, const std::string& key, const std::string& fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

json meta(const ServeState& s) {
  json ids = json::array();
  for (const auto& [id, ell] : s.templates) {
    ids.push_back(id);
  }
  const Dims d = s.mask.dims();
  return {{"dims", {d.nx, d.ny, d.nz}}, {"m", s.mask.m()}, {"templates", ids}};
}

json templates(const ServeState& s) {
  json out = json::array();
  for (const auto& [id, ell] : s.templates) {
    const TemplateProvenance& p = ell.provenance();
    json t{{"id", id},
           {"family", to_string(p.family)},
           {"m", ell.m()},
           {"constrained", ell.constrained()},
           {"alpha", p.alpha},
           {"lambda_cal", p.lambda_cal},
           {"w", p.w},
           {"seed", p.seed}};
    if (p.delta) {
      t["delta"] = *p.delta;
    }
    if (p.k_max) {
      t["k_max"] = *p.k_max;
    }
    out.push_back(std::move(t));
  }
  return out;
}

json slice(const ServeState& s, const Params& params) {
  const std::string axis = param(params, "axis", "z");
  const std::string map = param(params, "map", "z");
  if (axis != "x" && axis != "y" && axis != "z") {
    throw RequestError{400, "MalformedRequest", "axis must be x, y or z"};
  }
  if (map != "z" && map != "p") {
    throw RequestError{400, "MalformedRequest", "map must be z or p"};
  }
  std::size_t index = 0;
  try {
    std::size_t used = 0;
    const std::string raw = param(params, "index", "");
    index = std::stoull(raw, &used);
    if (used != raw.size() || raw.front() == '-') {
      throw std::invalid_argument(raw);
    }
  } catch (const std::exception&) {
    throw RequestError{400, "MalformedRequest", "index must be a non-negative integer"};
  }
  const Dims d = s.mask.dims();
  const std::size_t depth = axis == "x" ? d.nx : axis == "y" ? d.ny : d.nz;
  if (index >= depth) {
    throw RequestError{400, "OutOfBounds", "slice index " + std::to_string(index) + " outside axis " + axis};
  }
  // Row-major (row = second in-plane axis): z -> (x, y), y -> (x, z), x -> (y, z).
  const std::size_t width = axis == "x" ? d.ny : d.nx;
  const std::size_t height = axis == "z" ? d.ny : d.nz;
  const VolumeGrid& grid = map == "z" ? s.zmap : s.pmap_grid;
  json values = json::array();
  json masked = json::array();
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      Coord at = axis == "z" ? Coord{c, r, index} : axis == "y" ? Coord{c, index, r} : Coord{index, c, r};
      const std::size_t flat = flat_index(at, d);
      const std::size_t mi = s.mask.masked_of(flat);
      if (mi == Mask::npos) {
        values.push_back(nullptr);
        masked.push_back(nullptr);
      } else {
        values.push_back(grid.values()[flat]);
        masked.push_back(mi);
      }
    }
  }
  return {{"axis", axis},  {"index", index},   {"map", map},
          {"width", width}, {"height", height}, {"values", values}, {"masked_index", masked}};
}

json cluster_rows(const ServeState& s, const json& req) {
  const CriticalVector& ell = require_template(s, req);
  ClusterOptions opts;
  opts.kappa = field_or(req, "kappa", opts.kappa);
  opts.min_size = field_or(req, "min_size", opts.min_size);
  opts.connectivity = parse_connectivity(field_or(req, "connectivity", static_cast<int>(opts.connectivity)));
  opts.sign_split = field_or(req, "sign_split", opts.sign_split);
  const ClusterSet set = label_components(s.zmap, s.mask, opts);
  const std::vector<ClusterRow> rows = cluster_table(set, s.pmap, ell);
  json out = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ClusterRow& r = rows[i];
    const auto idx = set.clusters[i].voxels.indices();
    out.push_back({{"id", r.id},
                   {"size", r.size},
                   {"peak_stat", r.peak_stat},
                   {"peak", {r.peak.x, r.peak.y, r.peak.z}},
                   {"a_lower", r.a_lower},
                   {"tdp_lower", r.tdp_lower},
                   {"voxels", std::vector<std::size_t>(idx.begin(), idx.end())}});
  }
  return {{"clusters", out}};
}

json largest(const ServeState& s, const json& req) {
  const CriticalVector& ell = require_template(s, req);
  if (!req.contains("tdp")) {
    throw RequestError{400, "MalformedRequest", "'tdp' threshold required"};
  }
  const double t = field_or(req, "tdp", 0.0);
  if (!(t >= 0.0 && t <= 1.0)) {
    throw RequestError{400, "InvalidArg", "tdp threshold must lie in [0, 1]"};
  }
  const LargestRegion r = largest_region(s.pmap, ell, t);
  const TDPResult res{r.k, r.a_lower};
  const auto idx = r.set.indices();
  return {{"size", r.k},
          {"a_lower", r.a_lower},
          {"tdp_lower", res.tdp_lower()},
          {"voxels", std::vector<std::size_t>(idx.begin(), idx.end())}};
}

Response dispatch(const ServeState& s, const std::string& method, const std::string& path, const Params& params,
                  const std::string& body) {
  const bool get = method == "GET";
  const bool post = method == "POST";
  if (path == "/meta" && get) {
    return {200, meta(s).dump()};
  }
  if (path == "/templates" && get) {
    return {200, templates(s).dump()};
  }
  if (path == "/slice" && get) {
    return {200, slice(s, params).dump()};
  }
  if (path == "/tdp" && post) {
    const json req = parse_body(body);
    const CriticalVector& ell = require_template(s, req);
    const VoxelSet set = VoxelSet::from_unsorted(voxel_list(req), s.mask.m());
    return {200, tdp_result_json(tdp_query(set, s.pmap, ell))};
  }
  if (path == "/clusters" && post) {
    return {200, cluster_rows(s, parse_body(body)).dump()};
  }
  if (path == "/largest-region" && post) {
    return {200, largest(s, parse_body(body)).dump()};
  }
  for (const char* known : {"/meta", "/templates", "/slice", "/tdp", "/clusters", "/largest-region"}) {
    if (path == known) {
      return error_response(405, "MethodNotAllowed", method + " not supported on " + path);
    }
  }
  return error_response(404, "NotFound", "no endpoint " + path);
}

} // namespace

const CriticalVector* ServeState::find_template(const std::string& id) const {
  for (const auto& [tid, ell] : templates) {
    if (tid == id) {
      return &ell;
    }
  }
  return nullptr;
}

ServeState load_serve_state(const fs::path& dir) {
  for (const char* f : {"mask.vxk", "zmap.vxm", "pmap.vxm"}) {
    if (!fs::exists(dir / f)) {
      fail(ErrorCode::IoFailure, "serve state is missing " + (dir / f).string());
    }
  }
  ServeState s;
  s.mask = read_mask(dir / "mask.vxk");
  s.zmap = read_volume(dir / "zmap.vxm");
  s.pmap_grid = read_volume(dir / "pmap.vxm");
  if (s.zmap.dims() != s.mask.dims() || s.pmap_grid.dims() != s.mask.dims()) {
    fail(ErrorCode::DimensionMismatch, "serve state maps and mask have different dims");
  }
  s.pmap = masked_vector(s.pmap_grid, s.mask);
  (void)masked_vector(s.zmap, s.mask);
  const fs::path tdir = dir / "templates";
  if (fs::is_directory(tdir)) {
    for (const auto& entry : fs::directory_iterator(tdir)) {
      if (entry.path().extension() != ".json") {
        continue;
      }
      CriticalVector ell = load_template(entry.path());
      if (ell.m() != s.mask.m()) {
        fail(ErrorCode::TemplateMismatch, "template " + entry.path().filename().string() + " has m " +
                                              std::to_string(ell.m()) + ", mask has " +
                                              std::to_string(s.mask.m()));
      }
      s.templates.emplace_back(entry.path().stem().string(), std::move(ell));
    }
  }
  if (s.templates.empty()) {
    fail(ErrorCode::IoFailure, "serve state has no templates under " + tdir.string());
  }
  std::sort(s.templates.begin(), s.templates.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return s;
}

void save_serve_state(const fs::path& dir, const Mask& mask, const VolumeGrid& zmap, std::span<const float> pmap,
                      const std::vector<std::pair<std::string, CriticalVector>>& templates) {
  fs::create_directories(dir / "templates");
  write_mask(mask, dir / "mask.vxk");
  write_volume(zmap, dir / "zmap.vxm");
  write_volume(unmask(pmap, mask), dir / "pmap.vxm");
  for (const auto& [id, ell] : templates) {
    save_template(ell, dir / "templates" / (id + ".json"));
  }
}

Response handle_request(const ServeState& state, const std::string& method, const std::string& path,
                        const Params& params, const std::string& body) {
  try {
    return dispatch(state, method, path, params, body);
  } catch (const RequestError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

void install_routes(httplib::Server& server, const ServeState& state) {
  const auto forward = [&state](const httplib::Request& req, httplib::Response& res) {
    Params params(req.params.begin(), req.params.end());
    const Response r = handle_request(state, req.method, req.path, params, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
    res.set_header("Access-Control-Allow-Origin", "*");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

void run_server(const ServeState& state, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, state);
  if (!server.listen(host, port)) {
    fail(ErrorCode::IoFailure, "could not listen on " + host + ":" + std::to_string(port));
  }
}

} // namespace tdpkit::harness
