// Command-line front end: Monte Carlo experiment runs, small-instance
// oracle comparisons, and trace linting.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "offsim/harness.hpp"
#include "offsim/scenario.hpp"
#include "offsim/solver.hpp"
#include "offsim/uncertainty.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::size_t>& n_users,
            const std::vector<double>& tau, const std::string& metric, long long iterations,
            long long seed, const std::vector<std::string>& algorithms,
            const std::string& trace_path, const std::string& out_dir, const std::string& format,
            bool strict_eq10, bool offloaded_delay, bool deterministic_timing,
            long long threads) {
  offsim::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = offsim::load_experiment_config_file(config_path);

  if (!n_users.empty()) cfg.n_users_sweep = n_users;
  if (!tau.empty()) cfg.tau_sweep = tau;
  if (!metric.empty()) cfg.metric = offsim::metric_from_string(metric);
  if (iterations >= 0) cfg.iterations = static_cast<std::size_t>(iterations);
  if (seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed);
  if (!algorithms.empty()) {
    cfg.algorithms.clear();
    for (const std::string& a : algorithms) {
      cfg.algorithms.push_back(offsim::algorithm_from_string(a));
    }
  }
  if (!trace_path.empty()) cfg.trace_path = trace_path;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (strict_eq10) cfg.strict_double_sum = true;
  if (offloaded_delay) cfg.delay_scope = offsim::DelayScope::offloaded_only;
  if (deterministic_timing) cfg.deterministic_timing = true;
  if (threads >= 0) cfg.threads = static_cast<std::size_t>(threads);

  offsim::EmitFormat emit_format = offsim::EmitFormat::both;
  if (format == "csv") emit_format = offsim::EmitFormat::csv;
  else if (format == "json") emit_format = offsim::EmitFormat::json;
  else if (!format.empty() && format != "both") {
    throw offsim::ConfigError("unknown format: " + format);
  }

  const offsim::ExperimentResult result = offsim::run_experiment(cfg);
  const std::vector<std::string> files = offsim::emit(result, cfg, emit_format);

  std::size_t failed = 0;
  for (const auto& row : result.rows) failed += row.error.empty() ? 0 : 1;
  std::cout << result.rows.size() << " rows (" << failed << " failed), "
            << result.aggregate.size() << " aggregate groups\n";
  for (const std::string& f : files) std::cout << "wrote " << f << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_oracle_check(std::size_t n, std::size_t m, std::size_t instances, double tau,
                     std::uint64_t seed) {
  offsim::ScenarioConfig sc;
  sc.n_users = n;
  sc.n_servers = m;
  sc.es_positions = offsim::grid_positions(m, sc.area_side_m);
  sc.master_seed = seed;

  std::printf("%-10s %-14s %-14s %-10s\n", "instance", "oracle", "goa", "gap");
  double worst_gap = 0.0;
  double gap_sum = 0.0;
  std::size_t violations = 0;
  for (std::size_t it = 0; it < instances; ++it) {
    const offsim::Instance inst = offsim::generate_instance(sc, nullptr, it);
    const offsim::SolverReport oracle = offsim::exhaustive(inst);
    const offsim::SolverReport heuristic = offsim::goa(inst, tau);
    const double gap = heuristic.objective - oracle.objective;
    if (gap < 0.0) ++violations;
    if (gap > worst_gap) worst_gap = gap;
    gap_sum += gap;
    std::printf("%-10zu %-14.6g %-14.6g %-10.4g\n", it, oracle.objective, heuristic.objective,
                gap);
  }
  std::printf("mean gap %.6g, worst gap %.6g, oracle violations %zu/%zu\n",
              gap_sum / static_cast<double>(instances), worst_gap, violations, instances);
  return violations == 0 ? 0 : 1;
}

int cmd_validate_trace(const std::string& path) {
  offsim::TraceDiagnostics diag;
  try {
    const offsim::UncertaintyTrace trace = offsim::load_trace_file(path, &diag, /*strict=*/false);
    std::cout << trace.size() << " valid records\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  for (const std::string& w : diag.warnings) std::cout << "warning: " << w << "\n";
  for (const std::string& e : diag.errors) std::cout << "error: " << e << "\n";
  return diag.errors.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware inference offloading simulator"};
  app.require_subcommand(1);

  // run
  std::string config_path, metric, trace_path, out_dir, format;
  std::vector<std::size_t> n_users;
  std::vector<double> tau;
  std::vector<std::string> algorithms;
  long long iterations = -1, seed = -1, threads = -1;
  bool strict_eq10 = false, offloaded_delay = false, deterministic_timing = false;

  CLI::App* run = app.add_subcommand("run", "Run a Monte Carlo experiment sweep");
  run->add_option("--config", config_path, "Experiment config JSON; flags override its values");
  run->add_option("--n-users", n_users, "User counts to sweep")->delimiter(',');
  run->add_option("--tau", tau, "Uncertainty thresholds to sweep")->delimiter(',');
  run->add_option("--metric", metric, "Uncertainty metric: margin|entropy|perplexity");
  run->add_option("--iterations", iterations, "Monte Carlo iterations per sweep point");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--algorithms", algorithms, "Subset of goa,dmin,edge_all,local_all,random")
      ->delimiter(',');
  run->add_option("--trace", trace_path, "Uncertainty trace file (JSONL)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--format", format, "csv|json|both (default both)");
  run->add_option("--threads", threads, "Worker threads (0 = auto)");
  run->add_flag("--strict-eq10", strict_eq10,
                "Report the double-sum objective (local term counted once per server)");
  run->add_flag("--offloaded-delay", offloaded_delay,
                "Average delay over offloaded users only");
  run->add_flag("--deterministic-timing", deterministic_timing,
                "Zero the solver_time_ms column for byte-reproducible output");

  // oracle-check
  std::size_t oc_n = 5, oc_m = 2, oc_instances = 50;
  double oc_tau = 0.6;
  std::uint64_t oc_seed = 1;
  CLI::App* oracle = app.add_subcommand(
      "oracle-check", "Compare goa against the exhaustive optimum on small instances");
  oracle->add_option("--n", oc_n, "Users per instance");
  oracle->add_option("--m", oc_m, "Servers per instance");
  oracle->add_option("--instances", oc_instances, "Number of instances");
  oracle->add_option("--tau", oc_tau, "Uncertainty threshold");
  oracle->add_option("--seed", oc_seed, "Master seed");

  // validate-trace
  std::string vt_path;
  CLI::App* validate = app.add_subcommand("validate-trace", "Lint an uncertainty trace file");
  validate->add_option("--trace", vt_path, "Trace file (JSONL)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, n_users, tau, metric, iterations, seed, algorithms, trace_path,
                     out_dir, format, strict_eq10, offloaded_delay, deterministic_timing,
                     threads);
    }
    if (oracle->parsed()) return cmd_oracle_check(oc_n, oc_m, oc_instances, oc_tau, oc_seed);
    if (validate->parsed()) return cmd_validate_trace(vt_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
