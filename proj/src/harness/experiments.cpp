#include "tdpkit/harness/experiments.hpp"

#include "tdpkit/error.hpp"
#include "tdpkit/parallel.hpp"
#include "tdpkit/rng.hpp"
#include "tdpkit/tdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

namespace tdpkit::harness {

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string threshold_label(double t) { return fmt_double(t, 2); }

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) {
    return std::nan("");
  }
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Config method_config(const MethodConfig& m, const std::string& prefix) {
  return {
      {prefix + "family", to_string(m.family)},
      {prefix + "delta", std::to_string(m.delta)},
      {prefix + "k_max", std::to_string(m.k_max)},
      {prefix + "w", std::to_string(m.w)},
      {prefix + "w_tilde", std::to_string(m.w_tilde)},
      {prefix + "alpha", fmt_g(m.alpha)},
      {prefix + "sidedness", to_string(m.sidedness)},
  };
}

} // namespace

std::string method_id(const MethodConfig& method) {
  if (!method.id.empty()) {
    return method.id;
  }
  if (method.family == FamilyKind::Simes) {
    return "pari-d" + std::to_string(method.delta);
  }
  return "notip-k" + std::to_string(method.k_max);
}

MethodConfig parse_method(const std::string& text, const MethodConfig& defaults) {
  MethodConfig m = defaults;
  m.id.clear();
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  m.family = parse_family(family);
  if (colon != std::string::npos) {
    const std::string value = text.substr(colon + 1);
    std::size_t v = 0;
    try {
      v = std::stoull(value);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArg, "bad method parameter in '" + text + "'");
    }
    (m.family == FamilyKind::Simes ? m.delta : m.k_max) = v;
  }
  return m;
}

std::vector<Dataset> synthetic_suite(std::size_t count, Dims dims, std::size_t n, const SignalSpec& spec,
                                     std::uint64_t master_seed) {
  std::vector<Dataset> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto data = gen_synthetic(dims, n, spec, derive_seed(master_seed, "dataset", i));
    out.push_back({"synthetic-" + std::to_string(i), std::move(data.mask), std::move(data.stack),
                   std::move(data.truth)});
  }
  return out;
}

DatasetSeeds dataset_seeds(std::uint64_t master_seed, std::size_t dataset_index) {
  return {derive_seed(master_seed, "calibration", dataset_index),
          derive_seed(master_seed, "external", dataset_index)};
}

CriticalVector calibrate_method(const MethodConfig& method, const SubjectStack& stack,
                                const PermPValueMatrix& analysis, std::uint64_t external_seed,
                                std::size_t workers) {
  if (method.family == FamilyKind::Simes) {
    return calibrate_simes(analysis, method.delta, method.alpha, workers).ell;
  }
  const std::size_t k_max = std::min(method.k_max, stack.m());
  const FlipMatrix external = gen_sign_flips(stack.n(), method.w_tilde, external_seed);
  const LearnedFamily family = learn_family(stack, external, method.sidedness, k_max, workers);
  CriticalVector ell = calibrate_learned(analysis, family, method.alpha, workers).ell;
  ell.provenance().external_mode = "reuse-data";
  return ell;
}

ValidityResult validity_experiment(const ValidityConfig& config) {
  if (config.reps == 0) {
    fail(ErrorCode::InvalidArg, "validity experiment needs reps >= 1");
  }
  const MethodConfig& method = config.method;
  std::vector<std::uint8_t> violated(config.reps, 0);
  parallel_for(config.reps, config.workers, [&](std::size_t r, std::size_t) {
    const std::uint64_t rep_seed = derive_seed(config.master_seed, "validity-rep", r);
    const SignalSpec null_spec{{}, config.sigma};
    const SyntheticData data = gen_synthetic(config.dims, config.n, null_spec, rep_seed);
    PValueOptions opts;
    opts.sidedness = method.sidedness;
    const PermPValueMatrix pmat =
        build_perm_pvalues(data.stack, method.w, derive_seed(rep_seed, "calibration"), opts);
    const CriticalVector ell =
        config.force_zero_template
            ? CriticalVector(std::vector<double>(pmat.m(), 0.0), pmat.m())
            : calibrate_method(method, data.stack, pmat, derive_seed(rep_seed, "external"), 1);
    const bool crossing = crosses(pmat.sorted_row(0), ell);
    const bool positive_bound = tdp_bound(pmat.observed(), ell) > 0;
    if (crossing != positive_bound) {
      throw std::logic_error("violation events disagree in validity rep " + std::to_string(r));
    }
    violated[r] = crossing ? 1 : 0;
  });

  ValidityResult res;
  res.reps = config.reps;
  res.violations = static_cast<std::size_t>(std::count(violated.begin(), violated.end(), std::uint8_t{1}));
  res.rate = static_cast<double>(res.violations) / static_cast<double>(res.reps);
  res.alpha = method.alpha;
  const double n = static_cast<double>(res.reps);
  res.tolerance = method.alpha + 3.0 * std::sqrt(method.alpha * (1.0 - method.alpha) / n);
  const double z = 1.959963984540054;
  const double denom = 1.0 + z * z / n;
  const double center = (res.rate + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(res.rate * (1.0 - res.rate) / n + z * z / (4.0 * n * n)) / denom;
  res.ci_low = std::max(0.0, center - half);
  res.ci_high = std::min(1.0, center + half);

  ExperimentReport& rep = res.report;
  rep.kind = "validity";
  rep.master_seed = config.master_seed;
  rep.config = method_config(method, "method.");
  rep.config["reps"] = std::to_string(config.reps);
  rep.config["dims"] = std::to_string(config.dims.nx) + "x" + std::to_string(config.dims.ny) + "x" +
                       std::to_string(config.dims.nz);
  rep.config["n"] = std::to_string(config.n);
  rep.config["sigma"] = fmt_g(config.sigma);
  Table per_rep{"validity_reps", {"rep", "violation"}, {}};
  for (std::size_t r = 0; r < config.reps; ++r) {
    per_rep.rows.push_back({std::to_string(r), std::to_string(violated[r])});
  }
  rep.tables.push_back(std::move(per_rep));
  rep.summary = {{"method", method_id(method)},  {"reps", res.reps},       {"violations", res.violations},
                 {"rate", res.rate},             {"ci_low", res.ci_low},   {"ci_high", res.ci_high},
                 {"alpha", res.alpha},           {"tolerance", res.tolerance}};
  return res;
}

double relative_detection(std::size_t size_a, std::size_t size_b) {
  if (size_b == 0) {
    fail(ErrorCode::UndefinedRatio, "relative detection undefined for a zero-size denominator");
  }
  return (static_cast<double>(size_a) - static_cast<double>(size_b)) / static_cast<double>(size_b);
}

std::size_t CompareResult::size_of(const std::string& dataset, const std::string& method,
                                   double threshold) const {
  for (const auto& s : sizes) {
    if (s.dataset == dataset && s.method == method && s.threshold == threshold) {
      return s.size;
    }
  }
  fail(ErrorCode::InvalidArg, "no size record for " + dataset + "/" + method);
}

CompareResult compare_run(const std::vector<MethodConfig>& methods, const std::vector<double>& thresholds,
                          const std::vector<Dataset>& datasets, std::uint64_t master_seed,
                          std::size_t workers) {
  if (methods.empty() || thresholds.empty()) {
    fail(ErrorCode::InvalidArg, "compare needs at least one method and one threshold");
  }
  CompareResult res;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const Dataset& ds = datasets[d];
    const DatasetSeeds seeds = dataset_seeds(master_seed, d);
    std::map<std::pair<std::size_t, int>, PermPValueMatrix> pmats;
    std::vector<std::vector<std::size_t>> size_by_method(methods.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const MethodConfig& method = methods[mi];
      const auto key = std::make_pair(method.w, static_cast<int>(method.sidedness));
      if (!pmats.contains(key)) {
        PValueOptions opts;
        opts.sidedness = method.sidedness;
        opts.workers = workers;
        pmats.emplace(key, build_perm_pvalues(ds.stack, method.w, seeds.analysis, opts));
      }
      const PermPValueMatrix& pmat = pmats.at(key);
      const CriticalVector ell = calibrate_method(method, ds.stack, pmat, seeds.external, workers);
      for (double t : thresholds) {
        const std::size_t k = largest_region(pmat.observed(), ell, t).k;
        size_by_method[mi].push_back(k);
        res.sizes.push_back({ds.id, method_id(method), t, k});
      }
    }
    for (std::size_t a = 0; a < methods.size(); ++a) {
      for (std::size_t b = a + 1; b < methods.size(); ++b) {
        for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
          PairRecord pr{ds.id, method_id(methods[a]), method_id(methods[b]), thresholds[ti],
                        size_by_method[a][ti], size_by_method[b][ti], std::nullopt};
          if (pr.size_b > 0) {
            pr.relative = relative_detection(pr.size_a, pr.size_b);
          }
          res.pairs.push_back(std::move(pr));
        }
      }
    }
  }

  ExperimentReport& rep = res.report;
  rep.kind = "compare";
  rep.master_seed = master_seed;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (auto& [k, v] : method_config(methods[mi], "method" + std::to_string(mi) + ".")) {
      rep.config[k] = v;
    }
  }
  std::string tl;
  for (double t : thresholds) {
    tl += (tl.empty() ? "" : ",") + threshold_label(t);
  }
  rep.config["thresholds"] = tl;
  rep.config["datasets"] = std::to_string(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    rep.seeds[datasets[d].id + ".analysis"] = dataset_seeds(master_seed, d).analysis;
    rep.seeds[datasets[d].id + ".external"] = dataset_seeds(master_seed, d).external;
  }

  Table sizes{"sizes", {"dataset", "method", "threshold", "largest_size"}, {}};
  for (const auto& s : res.sizes) {
    sizes.rows.push_back({s.dataset, s.method, threshold_label(s.threshold), std::to_string(s.size)});
  }
  Table rel{"relative_detection", {"pair", "threshold", "dataset", "relative"}, {}};
  Table scatter{"scatter", {"pair", "threshold", "dataset", "size_a", "size_b"}, {}};
  std::map<std::pair<std::string, double>, std::pair<std::vector<double>, std::size_t>> agg;
  for (const auto& p : res.pairs) {
    const std::string pair = p.method_a + "_vs_" + p.method_b;
    rel.rows.push_back({pair, threshold_label(p.threshold), p.dataset,
                        p.relative ? fmt_double(*p.relative, 6) : "NA"});
    scatter.rows.push_back({pair, threshold_label(p.threshold), p.dataset, std::to_string(p.size_a),
                            std::to_string(p.size_b)});
    auto& slot = agg[{pair, p.threshold}];
    if (p.relative) {
      slot.first.push_back(*p.relative);
    } else {
      ++slot.second;
    }
  }
  Table summary{"relative_summary", {"pair", "threshold", "n", "n_undefined", "q1", "median", "q3", "mean"}, {}};
  for (auto& [key, slot] : agg) {
    auto& v = slot.first;
    std::sort(v.begin(), v.end());
    const double mean = v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    summary.rows.push_back({key.first, threshold_label(key.second), std::to_string(v.size()),
                            std::to_string(slot.second), fmt_double(quantile_sorted(v, 0.25), 6),
                            fmt_double(quantile_sorted(v, 0.5), 6), fmt_double(quantile_sorted(v, 0.75), 6),
                            fmt_double(mean, 6)});
  }
  rep.summary = {{"datasets", datasets.size()}, {"methods", methods.size()}, {"pairs", res.pairs.size()}};
  rep.tables = {std::move(sizes), std::move(rel), std::move(scatter), std::move(summary)};
  return res;
}

SweepResult delta_sweep(const std::vector<std::size_t>& deltas, const Dataset& dataset, double tdp_threshold,
                        const MethodConfig& base, const ClusterOptions& cluster_options,
                        std::uint64_t master_seed, std::size_t workers) {
  if (deltas.empty()) {
    fail(ErrorCode::InvalidArg, "delta sweep needs at least one delta");
  }
  const DatasetSeeds seeds = dataset_seeds(master_seed, 0);
  PValueOptions opts;
  opts.sidedness = base.sidedness;
  opts.workers = workers;
  const PermPValueMatrix pmat = build_perm_pvalues(dataset.stack, base.w, seeds.analysis, opts);
  const auto pmap = pmat.observed();

  const ObservedMaps maps = observed_maps(dataset.stack, base.sidedness);
  const ClusterSet clusters = label_components(unmask(maps.z, dataset.mask), dataset.mask, cluster_options);

  SweepResult res;
  res.deltas = deltas;
  for (const Cluster& c : clusters.clusters) {
    res.clusters.push_back({c.id, c.size, {}});
  }
  for (std::size_t delta : deltas) {
    const CriticalVector ell = calibrate_simes(pmat, delta, base.alpha, workers).ell;
    res.sizes.push_back(largest_region(pmap, ell, tdp_threshold).k);
    for (std::size_t ci = 0; ci < clusters.clusters.size(); ++ci) {
      res.clusters[ci].tdp.push_back(tdp_query(clusters.clusters[ci].voxels, pmap, ell).tdp_lower());
    }
  }

  ExperimentReport& rep = res.report;
  rep.kind = "sweep-delta";
  rep.master_seed = master_seed;
  rep.config = method_config(base, "base.");
  rep.config["dataset"] = dataset.id;
  rep.config["tdp_threshold"] = threshold_label(tdp_threshold);
  rep.config["kappa"] = fmt_g(cluster_options.kappa);
  rep.config["min_size"] = std::to_string(cluster_options.min_size);
  rep.config["connectivity"] = std::to_string(static_cast<int>(cluster_options.connectivity));
  rep.seeds["analysis"] = seeds.analysis;
  Table sweep{"sweep", {"delta", "largest_size"}, {}};
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    sweep.rows.push_back({std::to_string(deltas[i]), std::to_string(res.sizes[i])});
  }
  Table table{"sweep_clusters", {"cluster_id", "cluster_size"}, {}};
  for (std::size_t delta : deltas) {
    table.columns.push_back("tdp_delta_" + std::to_string(delta));
  }
  for (const auto& c : res.clusters) {
    std::vector<std::string> row{std::to_string(c.id), std::to_string(c.size)};
    for (double t : c.tdp) {
      row.push_back(format_tdp(t));
    }
    table.rows.push_back(std::move(row));
  }
  rep.tables = {std::move(sweep), std::move(table)};
  rep.summary = {{"deltas", deltas}, {"sizes", res.sizes}, {"clusters", res.clusters.size()}};
  return res;
}

Table plot_data(std::span<const float> pmap,
                const std::vector<std::pair<std::string, CriticalVector>>& templates,
                std::optional<std::size_t> cluster_k) {
  for (const auto& [name, ell] : templates) {
    if (ell.m() != pmap.size()) {
      fail(ErrorCode::TemplateMismatch, "template '" + name + "' has a different m");
    }
  }
  std::vector<float> sorted(pmap.begin(), pmap.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rows = cluster_k ? std::min(*cluster_k, sorted.size()) : sorted.size();
  Table t{"plot_data", {"rank", "p"}, {}};
  for (const auto& [name, ell] : templates) {
    t.columns.push_back(name);
  }
  for (std::size_t i = 1; i <= rows; ++i) {
    std::vector<std::string> row{std::to_string(i), fmt_g(sorted[i - 1])};
    for (const auto& [name, ell] : templates) {
      row.push_back(ell.is_constrained(i) ? fmt_g(ell.at(i)) : "");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

} // namespace tdpkit::harness
