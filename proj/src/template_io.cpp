#include "tdpkit/error.hpp"
#include "tdpkit/templates.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace tdpkit {

std::string template_to_json(const CriticalVector& ell) {
  const auto& p = ell.provenance();
  nlohmann::json j;
  j["family"] = to_string(p.family);
  j["m"] = ell.m();
  if (p.delta) {
    j["delta"] = *p.delta;
  }
  if (p.k_max) {
    j["k_max"] = *p.k_max;
  }
  j["w"] = p.w;
  if (p.w_tilde) {
    j["w_tilde"] = *p.w_tilde;
  }
  j["alpha"] = p.alpha;
  j["lambda_cal"] = p.lambda_cal;
  j["seed"] = p.seed;
  j["external_mode"] = p.external_mode;
  auto arr = nlohmann::json::array();
  for (std::size_t i = 1; i <= ell.m(); ++i) {
    if (ell.is_constrained(i)) {
      arr.push_back(ell.at(i));
    } else {
      arr.push_back(nullptr);
    }
  }
  j["ell"] = std::move(arr);
  return j.dump();
}

CriticalVector template_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TemplateProvenance p;
    p.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("delta")) {
      p.delta = j["delta"].get<std::size_t>();
    }
    if (j.contains("k_max")) {
      p.k_max = j["k_max"].get<std::size_t>();
    }
    p.w = j.value("w", std::size_t{0});
    if (j.contains("w_tilde")) {
      p.w_tilde = j["w_tilde"].get<std::size_t>();
    }
    p.alpha = j.value("alpha", 0.0);
    p.lambda_cal = j.value("lambda_cal", 0.0);
    p.seed = j.value("seed", std::uint64_t{0});
    p.external_mode = j.value("external_mode", std::string("none"));

    const auto& arr = j.at("ell");
    const std::size_t m = j.at("m").get<std::size_t>();
    if (arr.size() != m) {
      fail(ErrorCode::DimensionMismatch, "template 'ell' length differs from m");
    }
    std::vector<double> ell(m, 0.0);
    std::size_t constrained = 0;
    bool seen_null = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (arr[i].is_null()) {
        seen_null = true;
        continue;
      }
      if (seen_null) {
        fail(ErrorCode::InvalidArg, "unconstrained (null) ranks must form a suffix");
      }
      ell[i] = arr[i].get<double>();
      constrained = i + 1;
    }
    return CriticalVector(std::move(ell), constrained, p);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArg, std::string("malformed template JSON: ") + e.what());
  }
}

void save_template(const CriticalVector& ell, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    fail(ErrorCode::IoFailure, "cannot write " + path.string());
  }
  out << template_to_json(ell) << '\n';
}

CriticalVector load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return template_from_json(ss.str());
}

} // namespace tdpkit
