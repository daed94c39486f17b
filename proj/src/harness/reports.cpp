#include "tdpkit/harness/report.hpp"

#include "tdpkit/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tdpkit::harness {

std::string config_hash(const Config& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : config) {
    for (char c : k + "=" + v + "\n") {
      h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string to_csv(const Table& table) {
  std::ostringstream os;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    os << (c ? "," : "") << table.columns[c];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << (c ? "," : "") << row[c];
    }
    os << '\n';
  }
  return os.str();
}

nlohmann::json manifest(const ExperimentReport& report) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : report.tables) {
    files.push_back(t.name + ".csv");
  }
  return {
      {"kind", report.kind},
      {"config", report.config},
      {"config_hash", config_hash(report.config)},
      {"master_seed", report.master_seed},
      {"seeds", report.seeds},
      {"tables", files},
      {"summary", report.summary},
  };
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : report.tables) {
    std::ofstream out(dir / (t.name + ".csv"));
    if (!out) {
      fail(ErrorCode::IoFailure, "cannot write report table " + t.name);
    }
    out << to_csv(t);
  }
  std::ofstream js(dir / "manifest.json");
  if (!js) {
    fail(ErrorCode::IoFailure, "cannot write manifest.json");
  }
  js << manifest(report).dump(2) << '\n';
}

} // namespace tdpkit::harness
