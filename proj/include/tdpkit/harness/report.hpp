#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tdpkit::harness {

/// Resolved run configuration (flat key=value), recorded in every manifest.
using Config = std::map<std::string, std::string>;

/// FNV-1a over the sorted `key=value\n` lines, as 16 hex digits.
std::string config_hash(const Config& config);

struct Table {
  std::string name; // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentReport {
  std::string kind;
  Config config;
  std::uint64_t master_seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();
};

std::string to_csv(const Table& table);
nlohmann::json manifest(const ExperimentReport& report);
/// Writes `<table>.csv` for each table and `manifest.json` into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

std::string fmt_double(double v, int decimals = 4);

} // namespace tdpkit::harness
