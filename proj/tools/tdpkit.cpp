// tdpkit command-line front end. Every subcommand accepts `--config FILE`
// with flat `key=value` lines (key = long flag name); flags on the command
// line win over the file.

#include "tdpkit/clusters.hpp"
#include "tdpkit/error.hpp"
#include "tdpkit/harness/experiments.hpp"
#include "tdpkit/harness/serve.hpp"
#include "tdpkit/kernels.hpp"
#include "tdpkit/rng.hpp"
#include "tdpkit/tdp.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace tdpkit;
using namespace tdpkit::harness;

namespace {

Dims parse_dims(const std::string& text) {
  Dims d;
  char c1 = 0;
  char c2 = 0;
  std::istringstream in(text);
  if (!(in >> d.nx >> c1 >> d.ny >> c2 >> d.nz) || c1 != ',' || c2 != ',' || d.voxels() == 0) {
    fail(ErrorCode::InvalidArg, "dims must look like 32,32,16");
  }
  return d;
}

std::string dims_text(Dims d) {
  return std::to_string(d.nx) + "," + std::to_string(d.ny) + "," + std::to_string(d.nz);
}

// Expands `--config FILE` into `--key=value` arguments placed ahead of the
// command-line ones. Keys also given on the command line are dropped.
std::vector<std::string> expand_config(int argc, char** argv, const std::set<std::string>& subcommands) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  std::set<std::string> given;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      config = args[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) {
      given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    }
    rest.push_back(a);
  }
  if (config.empty()) {
    return rest;
  }
  std::ifstream in(config);
  if (!in) {
    fail(ErrorCode::IoFailure, "cannot open config " + config);
  }
  std::vector<std::string> from_file;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        fail(ErrorCode::InvalidArg, "config line without '=': " + line);
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!given.contains(key)) {
      from_file.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
  }
  // File values go right after the subcommand name, ahead of command-line values.
  auto it = std::find_if(rest.begin(), rest.end(), [&](const std::string& a) { return subcommands.contains(a); });
  if (it != rest.end()) {
    ++it;
  }
  std::vector<std::string> out(rest.begin(), it);
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), it, rest.end());
  return out;
}

struct PmapInput {
  std::string pmat;
  std::string pmap;
  std::string mask;

  void add(CLI::App* sub) {
    sub->add_option("--pmat", pmat, "permutation matrix; row 0 is the observed map");
    sub->add_option("--pmap", pmap, "observed p-value volume (needs --mask)");
    sub->add_option("--mask", mask, "mask volume");
  }

  std::vector<float> load() const {
    if (!pmat.empty()) {
      const PermPValueMatrix p = read_pmat(pmat);
      const auto row = p.observed();
      return {row.begin(), row.end()};
    }
    if (pmap.empty() || mask.empty()) {
      fail(ErrorCode::InvalidArg, "need --pmat, or --pmap with --mask");
    }
    return masked_vector(read_volume(pmap), read_mask(mask));
  }
};

struct SyntheticOptions {
  std::string dims = "32,32,16";
  std::size_t n = 20;
  std::vector<std::string> regions;
  double sigma = 1.0;

  void add(CLI::App* sub) {
    sub->add_option("--dims", dims, "grid nx,ny,nz")->capture_default_str();
    sub->add_option("--n", n, "subjects")->capture_default_str();
    sub->add_option("--region", regions, "box:cx,cy,cz:ex,ey,ez:mu or sphere:cx,cy,cz:r:mu (repeatable)");
    sub->add_option("--sigma", sigma, "smoothing sd in voxels")->capture_default_str();
  }

  SignalSpec spec() const {
    SignalSpec s;
    s.sigma = sigma;
    for (const auto& r : regions) {
      s.regions.push_back(parse_region(r));
    }
    return s;
  }
};

struct MethodOptions {
  MethodConfig base;
  std::string sidedness = "two-sided";

  void add(CLI::App* sub) {
    sub->add_option("--w", base.w, "analysis transforms")->capture_default_str();
    sub->add_option("--w-tilde", base.w_tilde, "learning transforms")->capture_default_str();
    sub->add_option("--alpha", base.alpha, "JER level")->capture_default_str();
    sub->add_option("--sidedness", sidedness, "two-sided | one-sided")->capture_default_str();
  }

  MethodConfig resolve() {
    base.sidedness = parse_sidedness(sidedness);
    return base;
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump() << "\n"; }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"True discovery proportion lower bounds for statistic maps"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t workers = 1;
  app.add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option_function<std::string>(
      "--isa",
      [](const std::string& name) {
        for (kernels::Isa isa : {kernels::Isa::Scalar, kernels::Isa::Avx2, kernels::Isa::Neon}) {
          if (kernels::isa_name(isa) == name) {
            kernels::set_active_isa(isa);
            return;
          }
        }
        fail(ErrorCode::InvalidArg, "unknown kernel set '" + name + "'");
      },
      "force kernel set: scalar | avx2 | neon");
  std::string config_unused;
  app.add_option("--config", config_unused, "flat key=value file; flags override");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic subject stack");
  SyntheticOptions sim_opts;
  sim_opts.add(sim);
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->callback([&] {
    const SyntheticData d = gen_synthetic(parse_dims(sim_opts.dims), sim_opts.n, sim_opts.spec(), sim_seed);
    fs::create_directories(sim_out);
    write_stack(d.stack, fs::path(sim_out) / "stack.vxs");
    write_mask(d.mask, fs::path(sim_out) / "mask.vxk");
    std::ofstream truth(fs::path(sim_out) / "truth.txt");
    for (std::size_t v : d.truth.indices()) {
      truth << v << "\n";
    }
    print_json({{"n", d.stack.n()}, {"m", d.stack.m()}, {"truth", d.truth.size()}, {"seed", sim_seed}});
  });

  // pvalues
  auto* pv = app.add_subcommand("pvalues", "sign-flip permutation p-value matrix");
  std::string pv_stack;
  std::string pv_mask;
  std::size_t pv_w = 200;
  std::uint64_t pv_seed = 1;
  std::string pv_side = "two-sided";
  std::string pv_mode = "parametric";
  std::string pv_out;
  std::string pv_maps;
  pv->add_option("--stack", pv_stack, "subject stack (.vxs or .csv)")->required();
  pv->add_option("--mask", pv_mask, "mask; a full mask needs --dims");
  std::string pv_dims;
  pv->add_option("--dims", pv_dims, "grid for a full mask when --mask is absent");
  pv->add_option("--w", pv_w)->capture_default_str();
  pv->add_option("--seed", pv_seed)->capture_default_str();
  pv->add_option("--sidedness", pv_side)->capture_default_str();
  pv->add_option("--mode", pv_mode, "parametric | permutation")->capture_default_str();
  pv->add_option("--out", pv_out, "matrix path (.vxp); a .json sidecar is written next to it");
  pv->add_option("--maps", pv_maps, "directory for mask.vxk, pmap.vxm, zmap.vxm, tmap.vxm");
  pv->callback([&] {
    const SubjectStack stack =
        fs::path(pv_stack).extension() == ".csv" ? read_stack_csv(pv_stack) : read_stack(pv_stack);
    PValueOptions opts;
    opts.sidedness = parse_sidedness(pv_side);
    opts.mode = parse_pvalue_mode(pv_mode);
    opts.workers = workers;
    if (!pv_out.empty()) {
      write_pmat(build_perm_pvalues(stack, pv_w, pv_seed, opts), pv_out);
    }
    if (!pv_maps.empty()) {
      const Mask mask = !pv_mask.empty() ? read_mask(pv_mask)
                        : !pv_dims.empty() ? Mask::full(parse_dims(pv_dims))
                                           : (fail(ErrorCode::InvalidArg, "--maps needs --mask or --dims"), Mask{});
      if (mask.m() != stack.m()) {
        fail(ErrorCode::DimensionMismatch, "mask m differs from stack m");
      }
      const ObservedMaps maps = observed_maps(stack, opts.sidedness);
      fs::create_directories(pv_maps);
      write_mask(mask, fs::path(pv_maps) / "mask.vxk");
      write_volume(unmask(maps.p, mask), fs::path(pv_maps) / "pmap.vxm");
      write_volume(unmask(maps.z, mask), fs::path(pv_maps) / "zmap.vxm");
      write_volume(unmask(maps.t, mask), fs::path(pv_maps) / "tmap.vxm");
    }
    if (pv_out.empty() && pv_maps.empty()) {
      fail(ErrorCode::InvalidArg, "nothing to write: give --out and/or --maps");
    }
    print_json({{"w", pv_w}, {"m", stack.m()}, {"seed", pv_seed}});
  });

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "calibrate a template family at level alpha");
  std::string cal_family = "simes";
  std::size_t cal_delta = 27;
  std::size_t cal_kmax = 1000;
  double cal_alpha = 0.05;
  std::string cal_pmat;
  std::string cal_stack;
  std::size_t cal_w = 200;
  std::uint64_t cal_seed = 1;
  std::string cal_side = "two-sided";
  std::string cal_external;
  bool cal_reuse = false;
  std::size_t cal_w_tilde = 200;
  std::uint64_t cal_external_seed = 0;
  std::string cal_out;
  cal->add_option("--family", cal_family, "simes | learned")->capture_default_str();
  cal->add_option("--delta", cal_delta)->capture_default_str();
  cal->add_option("--kmax", cal_kmax, "learned family rank limit (clipped to m)")->capture_default_str();
  cal->add_option("--alpha", cal_alpha)->capture_default_str();
  cal->add_option("--pmat", cal_pmat, "analysis permutation matrix");
  cal->add_option("--stack", cal_stack, "stream transforms from a stack instead of --pmat");
  cal->add_option("--w", cal_w, "transforms when streaming")->capture_default_str();
  cal->add_option("--seed", cal_seed, "transform seed when streaming")->capture_default_str();
  cal->add_option("--sidedness", cal_side)->capture_default_str();
  cal->add_option("--external", cal_external, "external p-value matrix for learning (same m)");
  cal->add_flag("--reuse-data", cal_reuse, "learn from independent flips of the analysis stack");
  cal->add_option("--w-tilde", cal_w_tilde)->capture_default_str();
  cal->add_option("--external-seed", cal_external_seed, "default: derived from the analysis seed");
  cal->add_option("--out", cal_out, "template JSON")->required();
  cal->callback([&] {
    const FamilyKind family = parse_family(cal_family);
    const Sidedness side = parse_sidedness(cal_side);
    if (cal_pmat.empty() && cal_stack.empty()) {
      fail(ErrorCode::InvalidArg, "need --pmat, or --stack to stream transforms");
    }
    // --pmat is the calibration source when present; --stack then only feeds --reuse-data.
    std::optional<PermPValueMatrix> pmat;
    std::optional<SubjectStack> stack;
    if (!cal_pmat.empty()) {
      pmat = read_pmat(cal_pmat);
    }
    if (!cal_stack.empty()) {
      stack = read_stack(cal_stack);
      if (pmat && stack->m() != pmat->m()) {
        fail(ErrorCode::DimensionMismatch, "stack m differs from matrix m");
      }
    }
    const std::size_t m = pmat ? pmat->m() : stack->m();
    CalibratedTemplate out;
    if (family == FamilyKind::Simes) {
      out = pmat ? calibrate_simes(*pmat, cal_delta, cal_alpha, workers)
                 : calibrate_simes(*stack, gen_sign_flips(stack->n(), cal_w, cal_seed), side, cal_delta,
                                   cal_alpha, workers);
    } else {
      if (cal_external.empty() == !cal_reuse) {
        fail(ErrorCode::InvalidArg, "learned family needs exactly one of --external and --reuse-data");
      }
      const std::size_t k_max = std::min(cal_kmax, m);
      std::optional<LearnedFamily> fam;
      std::string mode;
      if (!cal_external.empty()) {
        fam = learn_family(read_pmat(cal_external), k_max, workers);
        mode = "external";
      } else {
        if (!stack) {
          fail(ErrorCode::InvalidArg, "--reuse-data needs --stack");
        }
        const std::uint64_t base_seed = pmat ? pmat->seed : cal_seed;
        const std::uint64_t ext_seed = cal_external_seed != 0 ? cal_external_seed : derive_seed(base_seed, "external");
        fam = learn_family(*stack, gen_sign_flips(stack->n(), cal_w_tilde, ext_seed), side, k_max, workers);
        mode = "reuse-data";
      }
      require_family_matches(*fam, m);
      out = pmat ? calibrate_learned(*pmat, *fam, cal_alpha, workers)
                 : calibrate_learned(*stack, gen_sign_flips(stack->n(), cal_w, cal_seed), side, *fam, cal_alpha,
                                     workers);
      out.ell.provenance().external_mode = mode;
    }
    if (fs::path(cal_out).has_parent_path()) {
      fs::create_directories(fs::path(cal_out).parent_path());
    }
    save_template(out.ell, cal_out);
    nlohmann::json j{{"family", to_string(family)},
                     {"lambda_cal", out.calibration.lambda_cal},
                     {"m", out.ell.m()},
                     {"constrained", out.ell.constrained()}};
    if (pmat) {
      const JerCheck chk = jer_check(out.ell, *pmat, cal_alpha, workers);
      j["jer_check"] = {{"pass", chk.pass}, {"crossings", chk.crossings}, {"allowed", chk.allowed}};
    }
    print_json(j);
  });

  // bound
  auto* bnd = app.add_subcommand("bound", "TDP lower bound for one region");
  PmapInput bnd_in;
  bnd_in.add(bnd);
  std::string bnd_template;
  std::string bnd_region;
  bnd->add_option("--template", bnd_template)->required();
  bnd->add_option("--region", bnd_region, "newline-delimited masked indices")->required();
  bnd->callback([&] {
    const auto pmap = bnd_in.load();
    const CriticalVector ell = load_template(bnd_template);
    std::cout << tdp_result_json(tdp_query(read_region(bnd_region, pmap.size()), pmap, ell)) << "\n";
  });

  // clusters
  auto* clu = app.add_subcommand("clusters", "supra-threshold clusters with TDP bounds (CSV)");
  PmapInput clu_in;
  clu_in.add(clu);
  std::string clu_zmap;
  std::string clu_template;
  ClusterOptions clu_opts;
  int clu_conn = 26;
  std::string clu_out;
  clu->add_option("--zmap", clu_zmap)->required();
  clu->add_option("--template", clu_template)->required();
  clu->add_option("--kappa", clu_opts.kappa)->capture_default_str();
  clu->add_option("--min-size", clu_opts.min_size)->capture_default_str();
  clu->add_option("--connectivity", clu_conn, "6 | 18 | 26")->capture_default_str();
  clu->add_flag("--sign-split", clu_opts.sign_split, "keep positive and negative clusters apart");
  clu->add_option("--out", clu_out, "CSV path (default stdout)");
  clu->callback([&] {
    clu_opts.connectivity = parse_connectivity(clu_conn);
    if (clu_in.mask.empty()) {
      fail(ErrorCode::InvalidArg, "clusters needs --mask");
    }
    const Mask mask = read_mask(clu_in.mask);
    const auto pmap = clu_in.load();
    const ClusterSet set = label_components(read_volume(clu_zmap), mask, clu_opts);
    const auto rows = cluster_table(set, pmap, load_template(clu_template));
    if (clu_out.empty()) {
      write_cluster_csv(std::cout, rows);
    } else {
      std::ofstream out(clu_out);
      write_cluster_csv(out, rows);
    }
  });

  // largest-region
  auto* lr = app.add_subcommand("largest-region", "largest k-smallest-p region meeting a TDP threshold");
  PmapInput lr_in;
  lr_in.add(lr);
  std::string lr_template;
  double lr_tdp = 0.9;
  std::string lr_out;
  lr->add_option("--template", lr_template)->required();
  lr->add_option("--tdp", lr_tdp)->capture_default_str();
  lr->add_option("--out", lr_out, "write the region as masked indices");
  lr->callback([&] {
    const auto pmap = lr_in.load();
    const LargestRegion r = largest_region(pmap, load_template(lr_template), lr_tdp);
    if (!lr_out.empty()) {
      std::ofstream out(lr_out);
      for (std::size_t v : r.set.indices()) {
        out << v << "\n";
      }
    }
    std::cout << tdp_result_json({r.k, r.a_lower}) << "\n";
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "largest regions and relative detections across methods");
  SyntheticOptions cmp_syn;
  cmp_syn.add(cmp);
  MethodOptions cmp_m;
  cmp_m.add(cmp);
  std::vector<std::string> cmp_methods{"learned:1000", "simes:0"};
  std::vector<double> cmp_tdp{0.8, 0.9, 0.95};
  std::size_t cmp_datasets = 10;
  std::uint64_t cmp_seed = 1;
  std::string cmp_out;
  cmp->add_option("--method", cmp_methods, "simes:DELTA or learned:KMAX (repeatable)")->capture_default_str();
  cmp->add_option("--tdp", cmp_tdp, "TDP thresholds")->delimiter(',')->capture_default_str();
  cmp->add_option("--datasets", cmp_datasets)->capture_default_str();
  cmp->add_option("--seed", cmp_seed, "master seed")->capture_default_str();
  cmp->add_option("--out", cmp_out, "report directory")->required();
  cmp->callback([&] {
    const MethodConfig base = cmp_m.resolve();
    std::vector<MethodConfig> methods;
    for (const auto& m : cmp_methods) {
      methods.push_back(parse_method(m, base));
    }
    const auto datasets =
        synthetic_suite(cmp_datasets, parse_dims(cmp_syn.dims), cmp_syn.n, cmp_syn.spec(), cmp_seed);
    CompareResult res = compare_run(methods, cmp_tdp, datasets, cmp_seed, workers);
    res.report.config["dims"] = cmp_syn.dims;
    res.report.config["n"] = std::to_string(cmp_syn.n);
    res.report.config["sigma"] = fmt_double(cmp_syn.sigma, 6);
    for (std::size_t i = 0; i < cmp_syn.regions.size(); ++i) {
      res.report.config["region" + std::to_string(i)] = cmp_syn.regions[i];
    }
    write_report(res.report, cmp_out);
    print_json(res.report.summary);
  });

  // sweep-delta
  auto* sw = app.add_subcommand("sweep-delta", "largest region and cluster TDP across Simes shifts");
  SyntheticOptions sw_syn;
  sw_syn.add(sw);
  MethodOptions sw_m;
  sw_m.add(sw);
  std::vector<std::size_t> sw_deltas{0, 1, 3, 9, 27, 81, 243, 729, 2187};
  double sw_tdp = 0.9;
  std::uint64_t sw_seed = 1;
  ClusterOptions sw_copts;
  int sw_conn = 26;
  std::string sw_out;
  sw->add_option("--delta", sw_deltas, "shifts (each < m)")->delimiter(',')->capture_default_str();
  sw->add_option("--tdp", sw_tdp)->capture_default_str();
  sw->add_option("--seed", sw_seed, "master seed")->capture_default_str();
  sw->add_option("--kappa", sw_copts.kappa)->capture_default_str();
  sw->add_option("--min-size", sw_copts.min_size)->capture_default_str();
  sw->add_option("--connectivity", sw_conn)->capture_default_str();
  sw->add_option("--out", sw_out, "report directory")->required();
  sw->callback([&] {
    sw_copts.connectivity = parse_connectivity(sw_conn);
    const auto ds = synthetic_suite(1, parse_dims(sw_syn.dims), sw_syn.n, sw_syn.spec(), sw_seed);
    SweepResult res = delta_sweep(sw_deltas, ds.front(), sw_tdp, sw_m.resolve(), sw_copts, sw_seed, workers);
    res.report.config["dims"] = sw_syn.dims;
    res.report.config["n"] = std::to_string(sw_syn.n);
    res.report.config["sigma"] = fmt_double(sw_syn.sigma, 6);
    for (std::size_t i = 0; i < sw_syn.regions.size(); ++i) {
      res.report.config["region" + std::to_string(i)] = sw_syn.regions[i];
    }
    write_report(res.report, sw_out);
    print_json(res.report.summary);
  });

  // validity
  auto* val = app.add_subcommand("validity", "empirical JER violation rate under the full null");
  ValidityConfig vc;
  MethodOptions val_m;
  val_m.add(val);
  std::string val_method = "simes:27";
  std::string val_dims = dims_text(vc.dims);
  std::string val_out;
  val->add_option("--method", val_method)->capture_default_str();
  val->add_option("--reps", vc.reps)->capture_default_str();
  val->add_option("--dims", val_dims)->capture_default_str();
  val->add_option("--n", vc.n)->capture_default_str();
  val->add_option("--sigma", vc.sigma)->capture_default_str();
  val->add_option("--seed", vc.master_seed, "master seed")->capture_default_str();
  val->add_option("--out", val_out, "report directory");
  val->callback([&] {
    vc.method = parse_method(val_method, val_m.resolve());
    vc.dims = parse_dims(val_dims);
    vc.workers = workers;
    const ValidityResult res = validity_experiment(vc);
    if (!val_out.empty()) {
      write_report(res.report, val_out);
    }
    print_json(res.report.summary);
  });

  // plot-data
  auto* pd = app.add_subcommand("plot-data", "sorted p-curve against template vectors (CSV)");
  PmapInput pd_in;
  pd_in.add(pd);
  std::vector<std::string> pd_templates;
  std::size_t pd_k = 0;
  std::string pd_out;
  pd->add_option("--template", pd_templates, "[name=]path (repeatable)")->required();
  pd->add_option("--cluster-k", pd_k, "restrict to the k smallest p-values");
  pd->add_option("--out", pd_out, "CSV path (default stdout)");
  pd->callback([&] {
    const auto pmap = pd_in.load();
    std::vector<std::pair<std::string, CriticalVector>> ts;
    for (const auto& spec : pd_templates) {
      const auto eq = spec.find('=');
      const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
      const std::string name = eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq);
      ts.emplace_back(name, load_template(path));
    }
    const Table t = plot_data(pmap, ts, pd_k == 0 ? std::nullopt : std::optional<std::size_t>(pd_k));
    if (pd_out.empty()) {
      std::cout << to_csv(t);
    } else {
      std::ofstream(pd_out) << to_csv(t);
    }
  });

  // serve
  auto* srv = app.add_subcommand("serve", "local JSON API over a loaded state directory");
  std::string srv_state;
  std::string srv_host = "127.0.0.1";
  int srv_port = 8765;
  srv->add_option("--state", srv_state, "directory with mask.vxk, zmap.vxm, pmap.vxm, templates/")->required();
  srv->add_option("--port", srv_port)->capture_default_str();
  srv->add_option("--host", srv_host)->capture_default_str();
  srv->callback([&] {
    const ServeState state = load_serve_state(srv_state);
    std::cerr << "serving " << state.mask.m() << " voxels, " << state.templates.size() << " templates on "
              << srv_host << ":" << srv_port << "\n";
    run_server(state, srv_host, srv_port);
  });

  try {
    std::set<std::string> names;
    for (const CLI::App* sub : app.get_subcommands({})) {
      names.insert(sub->get_name());
    }
    std::vector<std::string> args = expand_config(argc, argv, names);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
