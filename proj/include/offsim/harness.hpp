#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "offsim/scenario.hpp"
#include "offsim/solver.hpp"
#include "offsim/uncertainty.hpp"

namespace offsim {

enum class Algorithm { goa, dmin, edge_all, local_all, random };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algorithm);

// All five algorithms in their canonical execution and emission order.
const std::vector<Algorithm>& all_algorithms();

enum class DelayScope { all_users, offloaded_only };

// Monte Carlo experiment description. The experiment master_seed overrides
// the scenario one so a single knob drives all randomness.
struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<Algorithm> algorithms = all_algorithms();
  std::vector<std::size_t> n_users_sweep = {60};
  std::vector<double> tau_sweep = {0.6};
  Metric metric = Metric::margin;
  std::size_t iterations = 500;
  std::string trace_path;  // empty: synthetic model
  std::string output_dir = "out";
  std::uint64_t master_seed = 1;

  std::size_t threads = 0;  // 0: auto
  bool strict_double_sum = false;
  DelayScope delay_scope = DelayScope::all_users;
  // Zeroes the wall-time column so output files are byte-reproducible.
  bool deterministic_timing = false;

  void validate() const;
};

// One (iteration, algorithm) result row.
struct RunMetrics {
  std::size_t iteration = 0;
  Algorithm algorithm = Algorithm::goa;
  std::size_t n_users = 0;
  double tau = 0.0;
  Metric metric = Metric::margin;
  double objective = 0.0;
  double mean_delay_ms = 0.0;
  double accuracy = 0.0;
  std::size_t offload_count = 0;
  double solver_time_ms = 0.0;
  std::string error;  // empty on success; not part of the CSV schema
};

struct AggregateStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct AggregateRow {
  Algorithm algorithm = Algorithm::goa;
  std::size_t n_users = 0;
  double tau = 0.0;
  std::size_t count = 0;
  AggregateStat objective;
  AggregateStat mean_delay_ms;
  AggregateStat accuracy;
  AggregateStat offload_count;
  AggregateStat solver_time_ms;
};

struct ExperimentResult {
  std::vector<RunMetrics> rows;        // sweep-major, then iteration, then algorithm
  std::vector<AggregateRow> aggregate; // one row per (algorithm, n_users, tau)
};

// Runs every requested algorithm on one freshly generated instance. The
// random baseline receives k from goa's result on the same instance, so goa
// must be requested alongside it. Solver failures are recorded in the row
// and do not abort the remaining algorithms.
std::vector<RunMetrics> run_iteration(const ExperimentConfig& config,
                                      const UncertaintyTrace* trace, std::size_t n_users,
                                      double tau, std::uint64_t iteration_index);

// Full sweep: iterations x n_users_sweep x tau_sweep, optionally across a
// bounded worker pool. Row order and aggregates are independent of worker
// scheduling.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class EmitFormat { csv, json, both };

// Writes metrics.csv (fixed header, floats at 17 significant digits) and/or
// aggregate.json (keyed algorithm -> n_users -> tau) under output_dir.
// Returns the written paths.
std::vector<std::string> emit(const ExperimentResult& result, const ExperimentConfig& config,
                              EmitFormat format);

// JSON config document mirroring ExperimentConfig; missing fields keep their
// defaults.
ExperimentConfig load_experiment_config(const std::string& document);
ExperimentConfig load_experiment_config_file(const std::string& path);
std::string save_experiment_config(const ExperimentConfig& config);

}  // namespace offsim
