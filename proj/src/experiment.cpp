#include "mmot/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "detail/rng.hpp"

namespace mmot {

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class StageTimer {
 public:
  explicit StageTimer(json& sink) : sink_(sink) {}
  template <typename Fn>
  auto time(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto result = fn();
    const auto stop = std::chrono::steady_clock::now();
    sink_[name] = std::chrono::duration<double, std::milli>(stop - start).count();
    return result;
  }

 private:
  json& sink_;
};

// Fills every requested check with its defaults so the echoed config fully
// describes the run.
json normalize_config(json config) {
  if (!config.contains("solver")) config["solver"] = {{"method", "exact"}};
  if (!config["solver"].contains("method")) config["solver"]["method"] = "exact";
  if (!config.contains("seed")) config["seed"] = 0;
  json& checks = config["checks"];
  if (checks.is_null()) checks = json::object();
  auto object_form = [&](const char* name, json defaults) {
    if (!checks.contains(name)) return;
    if (checks[name].is_boolean()) {
      if (!checks[name].get<bool>()) {
        checks.erase(name);
        return;
      }
      checks[name] = json::object();
    }
    for (auto& [key, value] : defaults.items()) {
      if (!checks[name].contains(key)) checks[name][key] = value;
    }
  };
  object_form("splitting", {{"tol", 1e-7}});
  object_form("monotone", {{"N", 3}, {"budget", kDefaultMonotonicityBudget}});
  object_form("order_two", {{"budget", kDefaultMonotonicityBudget}});
  object_form("twist", {{"grad_tol", 1e-6}, {"point_tol", 1e-8}});
  object_form("graph", json::object());
  object_form("uniqueness", {{"trials", 8}, {"magnitude", 1e-9}});
  object_form("tensors", {{"bases", 5}, {"anchors", 3}, {"margin", 1e-10}});
  object_form("projections",
              {{"blocks", "all"}, {"N", 3}, {"budget", kDefaultMonotonicityBudget}});
  return config;
}

const char* monotonicity_verdict(const MonotonicityReport& report) {
  if (!report.monotone) return "fail";
  return report.budget_exhausted ? "partial" : "pass";
}

int exit_from_verdicts(const json& verdicts) {
  for (const auto& [name, verdict] : verdicts.items()) {
    (void)name;
    if (verdict.get<std::string>() == "fail") return 2;
  }
  return 0;
}

}  // namespace

CommandResult run_experiment(const json& raw_config) {
  CommandResult result;
  json config;
  try {
    config = normalize_config(raw_config);

    json volatile_info;
    volatile_info["timestamp"] = iso_timestamp();
    json timings;
    StageTimer timer(timings);

    const MarginalSystem system = system_from_json(config.at("marginals"));
    const CostFunction cost = cost_from_json(config.at("cost"));
    std::optional<std::size_t> cap;
    if (config.contains("tensor_cap")) cap = config["tensor_cap"].get<std::size_t>();
    const CostTensor tensor =
        timer.time("build_tensor", [&] { return build_cost_tensor(system, cost, cap); });

    json checks = json::object();
    json verdicts = json::object();
    const json& cfg_checks = config["checks"];
    const std::string method = config["solver"]["method"].get<std::string>();

    std::optional<SolveReport> exact;
    std::optional<EntropicReport> entropic;
    if (method == "exact") {
      exact = timer.time("solve", [&] { return solve_exact_lp(tensor, system); });
      checks["solve"] = solve_report_json(*exact);
      const bool ok = exact->gap <= 1e-7 * (1.0 + std::abs(exact->primal)) &&
                      exact->gap >= -1e-9;
      verdicts["solve"] = ok ? "pass" : "fail";
    } else if (method == "entropic") {
      const json& s = config["solver"];
      entropic = timer.time("solve", [&] {
        return solve_entropic(tensor, system, s.value("epsilon", 1e-2),
                              s.value("max_iter", 2000), s.value("tol", 1e-9));
      });
      checks["solve"] = entropic_report_json(*entropic);
      verdicts["solve"] = entropic->converged ? "pass" : "partial";
    } else {
      throw std::invalid_argument("solver.method must be exact or entropic");
    }
    const Coupling& coupling = exact ? exact->coupling : entropic->coupling;

    if (cfg_checks.contains("splitting")) {
      if (!exact) throw std::invalid_argument("splitting check requires the exact solver");
      const double tol = cfg_checks["splitting"]["tol"].get<double>();
      const SupportSet support = SupportSet::from_coupling(coupling);
      const SplittingCheck check = timer.time("splitting", [&] {
        return verify_splitting_set(support, exact->potentials, tensor, system, tol);
      });
      checks["splitting"] = splitting_check_json(check);
      verdicts["splitting"] = check.certified ? "pass" : "fail";
    }

    if (cfg_checks.contains("monotone")) {
      const json& c = cfg_checks["monotone"];
      const SupportSet support = SupportSet::from_coupling(coupling);
      const MonotonicityReport report = timer.time("monotone", [&] {
        return is_cyclically_monotone(support, cost, c["N"].get<int>(),
                                      c["budget"].get<std::uint64_t>());
      });
      checks["monotone"] = monotonicity_report_json(report);
      verdicts["monotone"] = monotonicity_verdict(report);
    }

    if (cfg_checks.contains("order_two")) {
      const SupportSet support = SupportSet::from_coupling(coupling);
      const MonotonicityReport report =
          timer.time("order_two", [&] { return order_two_monotone(support, cost); });
      checks["order_two"] = monotonicity_report_json(report);
      verdicts["order_two"] = monotonicity_verdict(report);
    }

    if (cfg_checks.contains("twist")) {
      const json& c = cfg_checks["twist"];
      const TwistReport report = timer.time("twist", [&] {
        return check_twist_on_support(cost, coupling, c["grad_tol"].get<double>(),
                                      c["point_tol"].get<double>());
      });
      checks["twist"] = twist_report_json(report);
      verdicts["twist"] = report.pass ? "pass" : "fail";
    }

    if (cfg_checks.contains("graph")) {
      const GraphReport report = timer.time("graph", [&] { return graph_check(coupling); });
      checks["graph"] = graph_report_json(report);
      verdicts["graph"] = report.is_graph ? "pass" : "fail";
    }

    if (cfg_checks.contains("uniqueness")) {
      if (!exact) throw std::invalid_argument("uniqueness check requires the exact solver");
      const json& c = cfg_checks["uniqueness"];
      const UniquenessReport report = timer.time("uniqueness", [&] {
        return uniqueness_probe(tensor, system, c["trials"].get<int>(),
                                c["magnitude"].get<double>(),
                                config["seed"].get<std::uint64_t>());
      });
      checks["uniqueness"] = uniqueness_report_json(report);
      verdicts["uniqueness"] = report.verdict == Uniqueness::unique
                                   ? "pass"
                                   : report.verdict == Uniqueness::non_unique ? "fail"
                                                                              : "partial";
    }

    if (cfg_checks.contains("tensors")) {
      const json& c = cfg_checks["tensors"];
      TensorScanOptions options;
      options.eigenvalue_margin = c["margin"].get<double>();
      const TensorScan scan = timer.time("tensors", [&] {
        return tensor_T_scan(cost, c["bases"].get<int>(), c["anchors"].get<int>(),
                             config["seed"].get<std::uint64_t>() + 1, options);
      });
      checks["tensors"] = tensor_scan_json(scan);
      verdicts["tensors"] = scan.negative_on_samples ? "pass" : "fail";
    }

    if (cfg_checks.contains("projections")) {
      const json& c = cfg_checks["projections"];
      const BlockPartition& partition = infimal_partition(cost);
      const std::vector<CostFunction>& parts = infimal_parts(cost);
      std::vector<int> blocks;
      if (c["blocks"].is_string()) {
        for (int j = 0; j < partition.blocks(); ++j) blocks.push_back(j);
      } else {
        blocks = c["blocks"].get<std::vector<int>>();
      }
      json per_block = json::array();
      std::string verdict = "pass";
      timer.time("projections", [&] {
        for (int j : blocks) {
          const MonotonicityReport report = projected_monotonicity_check(
              coupling, cost, j, parts[j], c["N"].get<int>(),
              c["budget"].get<std::uint64_t>());
          per_block.push_back(
              {{"block", j}, {"report", monotonicity_report_json(report)}});
          const std::string v = monotonicity_verdict(report);
          if (v == "fail" || (v == "partial" && verdict == "pass")) verdict = v;
        }
        return 0;
      });
      checks["projections"] = std::move(per_block);
      verdicts["projections"] = verdict;
    }

    volatile_info["timings_ms"] = std::move(timings);
    result.report["meta"] = {{"version", kVersion},
                             {"config", config},
                             {"volatile", std::move(volatile_info)}};
    result.report["checks"] = std::move(checks);
    result.report["verdicts"] = verdicts;
    result.exit_code = exit_from_verdicts(verdicts);
    result.report["exit_code"] = result.exit_code;

    if (config.contains("output")) {
      const json& out = config["output"];
      if (out.contains("report")) {
        std::ofstream f(out["report"].get<std::string>());
        if (!f) throw std::runtime_error("cannot write report file");
        f << result.report.dump(2) << "\n";
      }
      if (out.contains("coupling")) {
        write_coupling_csv(out["coupling"].get<std::string>(), coupling);
      }
    }
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.report = {{"error", e.what()}};
  }
  return result;
}

CommandResult cmd_solve(const std::string& config_path) {
  json config;
  try {
    config = load_json_file(config_path);
  } catch (const std::exception& e) {
    return {1, {{"error", e.what()}}};
  }
  return run_experiment(config);
}

CommandResult cmd_twist_audit(const json& cost_spec, int samples, std::uint64_t seed) {
  CommandResult result;
  try {
    const CostFunction cost = cost_from_json(cost_spec);
    const int m = cost.arity();
    json checks = json::object();
    json verdicts = json::object();

    if (cost.block_dims()[0] == cost.block_dims()[m - 1]) {
      const auto tuples = sample_domain_tuples(cost, samples, seed);
      const NondegeneracyReport report = nondegeneracy_check(cost, tuples);
      checks["nondegeneracy"] = {{"min_abs_det", report.min_abs_det},
                                 {"samples", report.samples},
                                 {"pass", report.pass}};
      verdicts["nondegeneracy"] = report.pass ? "pass" : "fail";
    }

    {
      const Space& last = cost.domains()[m - 1];
      int per_axis = 9;
      while (last.dim > 1 && std::pow(per_axis, last.dim) > 1000.0) --per_axis;
      const YDomain grid = YDomain::lattice(last, std::vector<int>(last.dim, per_axis));
      detail::Rng rng(seed);
      const int fixings = std::min(samples, 10);
      const auto bases = sample_domain_tuples(cost, fixings, rng.derive(1).bits());
      bool injective = true;
      int collisions = 0;
      int excluded = 0;
      for (const Tuple& base : bases) {
        const OneMTwistReport report = one_m_twist_check(cost, base, grid.grid);
        injective = injective && report.injective;
        collisions += static_cast<int>(report.colliding_pairs.size());
        excluded += report.nondifferentiable_excluded;
      }
      checks["one_m_twist"] = {{"fixings", fixings},
                               {"grid_points", grid.grid.size()},
                               {"collisions", collisions},
                               {"nondifferentiable_excluded", excluded},
                               {"pass", injective}};
      verdicts["one_m_twist"] = injective ? "pass" : "fail";
    }

    if (m >= 3) {
      const TensorScan scan = tensor_T_scan(cost, samples, 3, seed + 7);
      checks["tensor_scan"] = tensor_scan_json(scan);
      verdicts["tensor_scan"] = scan.negative_on_samples ? "pass" : "fail";
      checks["tensor_scan"]["sign_advisory"] =
          "T computed as defined; the cited source's sign convention for "
          "minimization vs maximization is unresolved, so the eigenvalue "
          "range of -T is reported alongside T";
    }

    result.report = {{"meta", {{"version", kVersion}, {"samples", samples}, {"seed", seed}}},
                     {"checks", std::move(checks)},
                     {"verdicts", verdicts}};
    result.exit_code = exit_from_verdicts(verdicts);
    result.report["exit_code"] = result.exit_code;
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.report = {{"error", e.what()}};
  }
  return result;
}

CommandResult cmd_twist_audit_file(const std::string& cost_path, int samples,
                                   std::uint64_t seed) {
  json spec;
  try {
    spec = load_json_file(cost_path);
  } catch (const std::exception& e) {
    return {1, {{"error", e.what()}}};
  }
  return cmd_twist_audit(spec, samples, seed);
}

CommandResult cmd_converse_search(const json& spec) {
  CommandResult result;
  try {
    const CostFunction cost = cost_from_json(spec.at("cost"));
    if (cost.arity() < 4) {
      throw std::invalid_argument(
          "converse-search requires m >= 4: for m <= 3 cyclically monotone sets are "
          "already known to be splitting sets, so no counterexample can exist there");
    }
    const int trials = spec.value("trials", 100);
    const int points = spec.value("points", 3);
    const int n_max = spec.value("N_max", 3);
    const std::uint64_t seed = spec.value("seed", 0);

    int monotone_count = 0;
    int certified_count = 0;
    json candidates = json::array();
    for (int t = 0; t < trials; ++t) {
      const auto tuples =
          sample_domain_tuples(cost, points, detail::Rng(seed).derive(t).bits());
      SupportSet S;
      S.points = tuples;
      try {
        S.validate();
      } catch (const std::invalid_argument&) {
        continue;  // duplicate draw; vanishingly rare
      }
      const MonotonicityReport mono = is_cyclically_monotone(S, cost, n_max);
      if (!mono.monotone || mono.budget_exhausted) continue;
      ++monotone_count;
      const ConjugationResult conj = search_splitting_functions(S, cost);
      if (conj.certified) {
        ++certified_count;
        continue;
      }
      json pts = json::array();
      for (const Tuple& p : S.points) {
        json tp = json::array();
        for (const Vec& v : p) {
          json coords = json::array();
          for (int k = 0; k < v.size(); ++k) coords.push_back(v[k]);
          tp.push_back(coords);
        }
        pts.push_back(tp);
      }
      candidates.push_back({{"trial", t},
                            {"points", pts},
                            {"equality_residual", conj.equality_residual},
                            {"conjugation_converged", conj.converged},
                            {"sweeps", conj.sweeps}});
    }

    result.report = {
        {"meta", {{"version", kVersion}, {"trials", trials}, {"seed", seed}}},
        {"monotone", monotone_count},
        {"certified", certified_count},
        {"uncertified", candidates.size()},
        {"candidates", std::move(candidates)},
        {"caveat",
         "the conjugate-sweep certifier is a heuristic; an uncertified candidate is "
         "evidence for manual study, never a disproof"}};
    result.exit_code = 0;
    result.report["exit_code"] = 0;
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.report = {{"error", e.what()}};
  }
  return result;
}

CommandResult cmd_converse_search_file(const std::string& spec_path) {
  json spec;
  try {
    spec = load_json_file(spec_path);
  } catch (const std::exception& e) {
    return {1, {{"error", e.what()}}};
  }
  return cmd_converse_search(spec);
}

json demo_config() {
  return {
      {"seed", 7},
      {"marginals",
       {{"random_aligned",
         {{"m", 3}, {"n", 6}, {"dim", 1}, {"lower", 0.0}, {"upper", 1.0}, {"seed", 42}}}}},
      {"cost", {{"kind", "gangbo_swiech"}, {"m", 3}, {"d", 1}}},
      {"solver", {{"method", "exact"}}},
      {"checks",
       {{"graph", true}, {"twist", true}, {"monotone", {{"N", 3}}}}},
  };
}

CommandResult cmd_demo(const std::string& out_dir) {
  json config = demo_config();
  config["output"] = {{"report", out_dir + "/demo_report.json"},
                      {"coupling", out_dir + "/demo_coupling.csv"}};
  return run_experiment(config);
}

}  // namespace mmot
