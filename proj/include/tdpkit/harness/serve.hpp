#pragma once

#include "tdpkit/templates.hpp"
#include "tdpkit/volume.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace httplib {
class Server;
}

namespace tdpkit::harness {

/// Immutable state behind the local API. Loaded once; every request reads it
/// without locking.
struct ServeState {
  Mask mask;
  VolumeGrid zmap;
  VolumeGrid pmap_grid;
  std::vector<float> pmap; // masked
  std::vector<std::pair<std::string, CriticalVector>> templates; // sorted by id

  const CriticalVector* find_template(const std::string& id) const;
};

/// `mask.vxk`, `zmap.vxm`, `pmap.vxm` and `templates/<id>.json` (>= 1).
/// Throws on missing files or any dimension or m disagreement.
ServeState load_serve_state(const std::filesystem::path& dir);

/// Writes the layout load_serve_state expects.
void save_serve_state(const std::filesystem::path& dir, const Mask& mask, const VolumeGrid& zmap,
                      std::span<const float> pmap,
                      const std::vector<std::pair<std::string, CriticalVector>>& templates);

struct Response {
  int status = 200;
  std::string body; // JSON
};

using Params = std::multimap<std::string, std::string>;

/// Transport-free request handler; the HTTP server only forwards to it.
Response handle_request(const ServeState& state, const std::string& method, const std::string& path,
                        const Params& params, const std::string& body);

void install_routes(httplib::Server& server, const ServeState& state);

/// Blocks until the server stops.
void run_server(const ServeState& state, const std::string& host, int port);

} // namespace tdpkit::harness
