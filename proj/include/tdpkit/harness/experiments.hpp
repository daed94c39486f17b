#pragma once

#include "tdpkit/clusters.hpp"
#include "tdpkit/harness/report.hpp"
#include "tdpkit/harness/synthetic.hpp"
#include "tdpkit/perm.hpp"
#include "tdpkit/templates.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tdpkit::harness {

struct MethodConfig {
  std::string id; // empty: derived from the parameters ("pari-d27", "notip-k1000")
  FamilyKind family = FamilyKind::Simes;
  std::size_t delta = 27;
  std::size_t k_max = 1000; // clipped to m
  std::size_t w = 200;
  std::size_t w_tilde = 200;
  double alpha = 0.05;
  Sidedness sidedness = Sidedness::TwoSided;
};

std::string method_id(const MethodConfig& method);
/// `simes:27`, `learned:1000` with shared w / w_tilde / alpha defaults.
MethodConfig parse_method(const std::string& text, const MethodConfig& defaults);

struct Dataset {
  std::string id;
  Mask mask;
  SubjectStack stack;
  VoxelSet truth;
};

/// `count` synthetic datasets; dataset i is generated from derive_seed(master, "dataset", i).
std::vector<Dataset> synthetic_suite(std::size_t count, Dims dims, std::size_t n, const SignalSpec& spec,
                                     std::uint64_t master_seed);

/// Per-dataset seeds: analysis transforms are shared by every method on the
/// dataset; the learned family's reuse-data transforms use an independent stream.
struct DatasetSeeds {
  std::uint64_t analysis = 0;
  std::uint64_t external = 0;
};
DatasetSeeds dataset_seeds(std::uint64_t master_seed, std::size_t dataset_index);

/// Calibrates `method` against the analysis permutation matrix. The learned
/// family reuses the analysis data under an independent transform set.
CriticalVector calibrate_method(const MethodConfig& method, const SubjectStack& stack,
                                const PermPValueMatrix& analysis, std::uint64_t external_seed,
                                std::size_t workers = 1);

// ---- error control ----

struct ValidityConfig {
  std::size_t reps = 200;
  Dims dims{10, 10, 5};
  std::size_t n = 20;
  double sigma = 1.0;
  MethodConfig method;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  bool force_zero_template = false;
};

struct ValidityResult {
  std::size_t reps = 0;
  std::size_t violations = 0;
  double rate = 0.0;
  double ci_low = 0.0; // Wilson 95%
  double ci_high = 0.0;
  double alpha = 0.0;
  double tolerance = 0.0; // alpha + 3 binomial sd
  ExperimentReport report;
};

/// Full-null simulation. A rep violates iff the observed sorted curve crosses
/// the calibrated template at a constrained rank; the equivalent event
/// "some set has a positive bound" is computed too and must agree.
ValidityResult validity_experiment(const ValidityConfig& config);

// ---- method comparison ----

/// (size_a - size_b) / size_b. Throws UndefinedRatio when size_b == 0.
double relative_detection(std::size_t size_a, std::size_t size_b);

struct SizeRecord {
  std::string dataset;
  std::string method;
  double threshold = 0.0;
  std::size_t size = 0;
};

struct PairRecord {
  std::string dataset;
  std::string method_a;
  std::string method_b;
  double threshold = 0.0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::optional<double> relative; // empty when size_b == 0
};

struct CompareResult {
  std::vector<SizeRecord> sizes;
  std::vector<PairRecord> pairs;
  ExperimentReport report;

  std::size_t size_of(const std::string& dataset, const std::string& method, double threshold) const;
};

CompareResult compare_run(const std::vector<MethodConfig>& methods, const std::vector<double>& thresholds,
                          const std::vector<Dataset>& datasets, std::uint64_t master_seed,
                          std::size_t workers = 1);

// ---- shift sweep ----

struct SweepClusterRow {
  std::uint32_t id = 0;
  std::size_t size = 0;
  std::vector<double> tdp; // one per delta
};

struct SweepResult {
  std::vector<std::size_t> deltas;
  std::vector<std::size_t> sizes; // largest region at the threshold, per delta
  std::vector<SweepClusterRow> clusters;
  ExperimentReport report;
};

/// All deltas share one analysis permutation matrix.
SweepResult delta_sweep(const std::vector<std::size_t>& deltas, const Dataset& dataset, double tdp_threshold,
                        const MethodConfig& base, const ClusterOptions& cluster_options,
                        std::uint64_t master_seed, std::size_t workers = 1);

// ---- plotting data ----

/// Columns: rank, p (sorted observed), one per template. Unconstrained
/// ranks are left empty. Restricted to the first `cluster_k` ranks if given.
Table plot_data(std::span<const float> pmap,
                const std::vector<std::pair<std::string, CriticalVector>>& templates,
                std::optional<std::size_t> cluster_k = std::nullopt);

} // namespace tdpkit::harness
