#include "offsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "offsim/compute.hpp"
#include "offsim/rng.hpp"

namespace offsim {

namespace fs = std::filesystem;

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "goa") return Algorithm::goa;
  if (name == "dmin") return Algorithm::dmin;
  if (name == "edge_all") return Algorithm::edge_all;
  if (name == "local_all") return Algorithm::local_all;
  if (name == "random") return Algorithm::random;
  throw ConfigError("unknown algorithm: " + name);
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::goa: return "goa";
    case Algorithm::dmin: return "dmin";
    case Algorithm::edge_all: return "edge_all";
    case Algorithm::local_all: return "local_all";
    case Algorithm::random: return "random";
  }
  return "goa";
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> order = {Algorithm::goa, Algorithm::dmin,
                                               Algorithm::edge_all, Algorithm::local_all,
                                               Algorithm::random};
  return order;
}

namespace {

std::vector<Algorithm> normalized_algorithms(const std::vector<Algorithm>& requested) {
  std::vector<Algorithm> out;
  for (Algorithm a : all_algorithms()) {
    if (std::find(requested.begin(), requested.end(), a) != requested.end()) out.push_back(a);
  }
  return out;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Shortest round-trip representation, for JSON keys.
std::string fmt_shortest(double v) { return nlohmann::json(v).dump(); }

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
  if (n_users_sweep.empty()) throw ConfigError("n_users_sweep must not be empty");
  if (tau_sweep.empty()) throw ConfigError("tau_sweep must not be empty");
  for (std::size_t n : n_users_sweep) {
    if (n < 1) throw ConfigError("n_users_sweep entries must be >= 1");
  }
  for (double t : tau_sweep) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("tau_sweep entries out of [0,1]");
  }
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  const bool wants_random =
      std::find(algorithms.begin(), algorithms.end(), Algorithm::random) != algorithms.end();
  const bool wants_goa =
      std::find(algorithms.begin(), algorithms.end(), Algorithm::goa) != algorithms.end();
  if (wants_random && !wants_goa) {
    throw ConfigError("the random baseline takes its offload count from goa; request goa too");
  }
}

std::vector<RunMetrics> run_iteration(const ExperimentConfig& config,
                                      const UncertaintyTrace* trace, std::size_t n_users,
                                      double tau, std::uint64_t iteration_index) {
  ScenarioConfig scenario = config.scenario;
  scenario.n_users = n_users;
  scenario.tau = tau;
  scenario.master_seed = config.master_seed;

  const Instance instance = generate_instance(scenario, trace, iteration_index, config.metric);
  const std::vector<Algorithm> algs = normalized_algorithms(config.algorithms);

  std::vector<RunMetrics> rows;
  rows.reserve(algs.size());
  std::size_t goa_offload_count = 0;

  for (Algorithm alg : algs) {
    RunMetrics row;
    row.iteration = iteration_index;
    row.algorithm = alg;
    row.n_users = n_users;
    row.tau = tau;
    row.metric = config.metric;
    try {
      SolverReport report;
      switch (alg) {
        case Algorithm::goa:
          report = goa(instance, tau);
          goa_offload_count = report.offload_count;
          break;
        case Algorithm::dmin:
          report = dmin(instance);
          break;
        case Algorithm::edge_all:
          report = edge_all(instance);
          break;
        case Algorithm::local_all:
          report = local_all(instance);
          break;
        case Algorithm::random:
          report = random_k(instance, goa_offload_count,
                            derive_seed(config.master_seed, iteration_index,
                                        StreamTag::random_baseline));
          break;
      }
      row.objective =
          objective(instance, report.assignment, {.strict_double_sum = config.strict_double_sum});
      const std::vector<DelayBreakdown> delays = total_delays(instance, report.assignment);
      double sum = 0.0;
      std::size_t counted = 0;
      for (std::size_t i = 0; i < delays.size(); ++i) {
        if (config.delay_scope == DelayScope::offloaded_only && delays[i].is_local()) continue;
        sum += delays[i].total_s;
        ++counted;
      }
      row.mean_delay_ms = counted > 0 ? (sum / static_cast<double>(counted)) * 1000.0 : 0.0;
      row.accuracy = accuracy_of(instance, report.assignment);
      row.offload_count = report.offload_count;
      row.solver_time_ms = config.deterministic_timing ? 0.0 : report.wall_time_s * 1000.0;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.objective = std::numeric_limits<double>::quiet_NaN();
      row.mean_delay_ms = std::numeric_limits<double>::quiet_NaN();
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  AggregateStat stat() const {
    AggregateStat s;
    s.mean = n > 0 ? mean : 0.0;
    s.stddev = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
    return s;
  }
};

struct GroupAccumulator {
  std::size_t count = 0;
  Welford objective, mean_delay_ms, accuracy, offload_count, solver_time_ms;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  // Fail on an unusable output directory before burning compute.
  fs::create_directories(config.output_dir);
  {
    const fs::path probe = fs::path(config.output_dir) / ".write_probe";
    std::ofstream test(probe);
    if (!test) throw ConfigError("output directory not writable: " + config.output_dir);
    test.close();
    fs::remove(probe);
  }

  UncertaintyTrace trace;
  const UncertaintyTrace* trace_ptr = nullptr;
  if (!config.trace_path.empty()) {
    trace = load_trace_file(config.trace_path);
    trace_ptr = &trace;
  }

  struct Task {
    std::size_t n_users;
    double tau;
    std::uint64_t iteration;
  };
  std::vector<Task> tasks;
  tasks.reserve(config.n_users_sweep.size() * config.tau_sweep.size() * config.iterations);
  for (std::size_t n : config.n_users_sweep) {
    for (double t : config.tau_sweep) {
      for (std::uint64_t it = 0; it < config.iterations; ++it) tasks.push_back({n, t, it});
    }
  }

  const std::size_t n_algs = normalized_algorithms(config.algorithms).size();
  std::vector<RunMetrics> rows(tasks.size() * n_algs);

  auto run_task = [&](std::size_t t) {
    std::vector<RunMetrics> task_rows;
    try {
      task_rows =
          run_iteration(config, trace_ptr, tasks[t].n_users, tasks[t].tau, tasks[t].iteration);
    } catch (const std::exception& e) {
      task_rows.assign(n_algs, RunMetrics{});
      const std::vector<Algorithm> algs = normalized_algorithms(config.algorithms);
      for (std::size_t a = 0; a < n_algs; ++a) {
        task_rows[a].iteration = tasks[t].iteration;
        task_rows[a].algorithm = algs[a];
        task_rows[a].n_users = tasks[t].n_users;
        task_rows[a].tau = tasks[t].tau;
        task_rows[a].metric = config.metric;
        task_rows[a].error = e.what();
        task_rows[a].objective = std::numeric_limits<double>::quiet_NaN();
        task_rows[a].mean_delay_ms = std::numeric_limits<double>::quiet_NaN();
        task_rows[a].accuracy = std::numeric_limits<double>::quiet_NaN();
      }
    }
    for (std::size_t a = 0; a < n_algs; ++a) rows[t * n_algs + a] = std::move(task_rows[a]);
  };

  std::size_t n_threads = config.threads;
  if (n_threads == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    n_threads = hw == 0 ? 1 : std::min<std::size_t>(hw, 8);
  }

  if (n_threads <= 1 || tasks.size() <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    // Results land in preassigned slots, so completion order is irrelevant.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < tasks.size(); t = next.fetch_add(1)) {
          run_task(t);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  ExperimentResult result;
  result.rows = std::move(rows);

  std::map<std::tuple<std::size_t, std::size_t, double>, GroupAccumulator> groups;
  auto alg_rank = [](Algorithm a) {
    const auto& order = all_algorithms();
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), a) - order.begin());
  };
  for (const RunMetrics& row : result.rows) {
    if (!row.error.empty()) continue;
    GroupAccumulator& g = groups[{alg_rank(row.algorithm), row.n_users, row.tau}];
    ++g.count;
    g.objective.add(row.objective);
    g.mean_delay_ms.add(row.mean_delay_ms);
    g.accuracy.add(row.accuracy);
    g.offload_count.add(static_cast<double>(row.offload_count));
    g.solver_time_ms.add(row.solver_time_ms);
  }
  for (const auto& [key, acc] : groups) {
    AggregateRow agg;
    agg.algorithm = all_algorithms()[std::get<0>(key)];
    agg.n_users = std::get<1>(key);
    agg.tau = std::get<2>(key);
    agg.count = acc.count;
    agg.objective = acc.objective.stat();
    agg.mean_delay_ms = acc.mean_delay_ms.stat();
    agg.accuracy = acc.accuracy.stat();
    agg.offload_count = acc.offload_count.stat();
    agg.solver_time_ms = acc.solver_time_ms.stat();
    result.aggregate.push_back(agg);
  }
  return result;
}

namespace {

void write_aggregate_json(std::ostream& out, const std::vector<AggregateRow>& aggregate) {
  // algorithm -> n_users -> tau, keys sorted for byte-stable output.
  std::map<std::string, std::map<std::size_t, std::map<std::string, const AggregateRow*>>> tree;
  for (const AggregateRow& row : aggregate) {
    tree[to_string(row.algorithm)][row.n_users][fmt_shortest(row.tau)] = &row;
  }
  auto stat = [](const AggregateStat& s) {
    return "{\"mean\": " + fmt17(s.mean) + ", \"std\": " + fmt17(s.stddev) + "}";
  };
  out << "{\n";
  bool first_alg = true;
  for (const auto& [alg, by_n] : tree) {
    if (!first_alg) out << ",\n";
    first_alg = false;
    out << "  \"" << alg << "\": {\n";
    bool first_n = true;
    for (const auto& [n, by_tau] : by_n) {
      if (!first_n) out << ",\n";
      first_n = false;
      out << "    \"" << n << "\": {\n";
      bool first_tau = true;
      for (const auto& [tau, row] : by_tau) {
        if (!first_tau) out << ",\n";
        first_tau = false;
        out << "      \"" << tau << "\": {\n"
            << "        \"count\": " << row->count << ",\n"
            << "        \"objective\": " << stat(row->objective) << ",\n"
            << "        \"mean_delay_ms\": " << stat(row->mean_delay_ms) << ",\n"
            << "        \"accuracy\": " << stat(row->accuracy) << ",\n"
            << "        \"offload_count\": " << stat(row->offload_count) << ",\n"
            << "        \"solver_time_ms\": " << stat(row->solver_time_ms) << "\n"
            << "      }";
      }
      out << "\n    }";
    }
    out << "\n  }";
  }
  out << "\n}\n";
}

}  // namespace

std::vector<std::string> emit(const ExperimentResult& result, const ExperimentConfig& config,
                              EmitFormat format) {
  if (result.rows.empty()) throw ConfigError("nothing to emit: result table is empty");
  fs::create_directories(config.output_dir);

  std::vector<std::string> written;

  if (format == EmitFormat::csv || format == EmitFormat::both) {
    const fs::path path = fs::path(config.output_dir) / "metrics.csv";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << "iteration,algorithm,n_users,tau,metric,objective,mean_delay_ms,accuracy,"
           "offload_count,solver_time_ms\n";
    for (const RunMetrics& row : result.rows) {
      out << row.iteration << ',' << to_string(row.algorithm) << ',' << row.n_users << ','
          << fmt17(row.tau) << ',' << to_string(row.metric) << ',' << fmt17(row.objective) << ','
          << fmt17(row.mean_delay_ms) << ',' << fmt17(row.accuracy) << ',' << row.offload_count
          << ',' << fmt17(row.solver_time_ms) << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
    written.push_back(path.string());
  }

  if (format == EmitFormat::json || format == EmitFormat::both) {
    const fs::path path = fs::path(config.output_dir) / "aggregate.json";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    write_aggregate_json(out, result.aggregate);
    if (!out) throw ConfigError("write failed: " + path.string());
    written.push_back(path.string());
  }

  return written;
}

namespace {

template <typename T>
void read_if_present(const nlohmann::json& j, const char* field, T& out) {
  auto it = j.find(field);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad field ") + field + ": " + e.what());
  }
}

PiecewiseLinear curve_from_json(const nlohmann::json& j, const char* field) {
  PiecewiseLinear curve;
  curve.knots.clear();
  if (!j.is_array()) throw ParseError(std::string(field) + " must be an array of [x, y] pairs");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) {
      throw ParseError(std::string(field) + " entries must be [x, y] pairs");
    }
    curve.knots.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return curve;
}

void scenario_from_json(const nlohmann::json& j, ScenarioConfig& sc) {
  read_if_present(j, "n_users", sc.n_users);
  read_if_present(j, "n_servers", sc.n_servers);
  read_if_present(j, "area_side", sc.area_side_m);
  if (auto it = j.find("es_positions"); it != j.end()) {
    sc.es_positions.clear();
    for (const auto& e : *it) {
      if (!e.is_array() || e.size() != 2) {
        throw ParseError("es_positions entries must be [x, y] pairs");
      }
      sc.es_positions.push_back({e[0].get<double>(), e[1].get<double>()});
    }
  } else if (j.contains("n_servers")) {
    sc.es_positions = grid_positions(sc.n_servers, sc.area_side_m);
  }
  read_if_present(j, "bandwidth_hz", sc.radio.bandwidth_hz);
  read_if_present(j, "tx_power_w", sc.radio.tx_power_w);
  read_if_present(j, "noise_psd_dbm_per_hz", sc.radio.noise_psd_dbm_per_hz);
  read_if_present(j, "path_loss_exponent", sc.radio.path_loss_exponent);
  read_if_present(j, "reference_loss_db", sc.radio.reference_loss_db);
  if (auto it = j.find("c_local_range_gflops"); it != j.end()) {
    sc.c_local_range_gflops = {(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  if (auto it = j.find("c_es_range_tflops"); it != j.end()) {
    sc.c_es_range_tflops = {(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  read_if_present(j, "c_max_tflops", sc.c_max_tflops);
  read_if_present(j, "w_slm_flops", sc.w_slm_flops);
  read_if_present(j, "w_llm_flops", sc.w_llm_flops);
  read_if_present(j, "tau", sc.tau);
  read_if_present(j, "query_bits_default", sc.query_bits_default);
  read_if_present(j, "bits_per_token", sc.bits_per_token);
  read_if_present(j, "zero_fading", sc.zero_fading);
  read_if_present(j, "trace_with_replacement", sc.trace_with_replacement);
  read_if_present(j, "master_seed", sc.master_seed);
  if (auto it = j.find("synthetic"); it != j.end()) {
    const nlohmann::json& syn = *it;
    read_if_present(syn, "alpha_bin_weights", sc.synthetic.alpha_bin_weights);
    if (auto c = syn.find("slm_acc_curve"); c != syn.end()) {
      sc.synthetic.slm_acc_curve = curve_from_json(*c, "slm_acc_curve");
    }
    if (auto c = syn.find("llm_acc_curve"); c != syn.end()) {
      sc.synthetic.llm_acc_curve = curve_from_json(*c, "llm_acc_curve");
    }
    read_if_present(syn, "query_tokens", sc.synthetic.query_tokens);
  }
}

nlohmann::json scenario_to_json(const ScenarioConfig& sc) {
  nlohmann::json j;
  j["n_users"] = sc.n_users;
  j["n_servers"] = sc.n_servers;
  j["area_side"] = sc.area_side_m;
  nlohmann::json es = nlohmann::json::array();
  for (const Point2& p : sc.es_positions) es.push_back({p.x, p.y});
  j["es_positions"] = std::move(es);
  j["bandwidth_hz"] = sc.radio.bandwidth_hz;
  j["tx_power_w"] = sc.radio.tx_power_w;
  j["noise_psd_dbm_per_hz"] = sc.radio.noise_psd_dbm_per_hz;
  j["path_loss_exponent"] = sc.radio.path_loss_exponent;
  j["reference_loss_db"] = sc.radio.reference_loss_db;
  j["c_local_range_gflops"] = {sc.c_local_range_gflops.lo, sc.c_local_range_gflops.hi};
  j["c_es_range_tflops"] = {sc.c_es_range_tflops.lo, sc.c_es_range_tflops.hi};
  j["c_max_tflops"] = sc.c_max_tflops;
  j["w_slm_flops"] = sc.w_slm_flops;
  j["w_llm_flops"] = sc.w_llm_flops;
  j["tau"] = sc.tau;
  j["query_bits_default"] = sc.query_bits_default;
  j["bits_per_token"] = sc.bits_per_token;
  j["zero_fading"] = sc.zero_fading;
  j["trace_with_replacement"] = sc.trace_with_replacement;
  j["master_seed"] = sc.master_seed;
  nlohmann::json syn;
  syn["alpha_bin_weights"] = sc.synthetic.alpha_bin_weights;
  nlohmann::json slm = nlohmann::json::array();
  for (const auto& [x, y] : sc.synthetic.slm_acc_curve.knots) slm.push_back({x, y});
  syn["slm_acc_curve"] = std::move(slm);
  nlohmann::json llm = nlohmann::json::array();
  for (const auto& [x, y] : sc.synthetic.llm_acc_curve.knots) llm.push_back({x, y});
  syn["llm_acc_curve"] = std::move(llm);
  syn["query_tokens"] = sc.synthetic.query_tokens;
  j["synthetic"] = std::move(syn);
  return j;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid experiment config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("experiment config must be a JSON object");

  ExperimentConfig cfg;
  if (auto it = j.find("scenario"); it != j.end()) scenario_from_json(*it, cfg.scenario);
  if (auto it = j.find("algorithms"); it != j.end()) {
    cfg.algorithms.clear();
    for (const auto& e : *it) cfg.algorithms.push_back(algorithm_from_string(e.get<std::string>()));
  }
  read_if_present(j, "n_users_sweep", cfg.n_users_sweep);
  read_if_present(j, "tau_sweep", cfg.tau_sweep);
  if (auto it = j.find("metric"); it != j.end()) {
    cfg.metric = metric_from_string(it->get<std::string>());
  }
  read_if_present(j, "iterations", cfg.iterations);
  read_if_present(j, "trace_path", cfg.trace_path);
  read_if_present(j, "output_dir", cfg.output_dir);
  read_if_present(j, "master_seed", cfg.master_seed);
  read_if_present(j, "threads", cfg.threads);
  read_if_present(j, "strict_eq10", cfg.strict_double_sum);
  if (auto it = j.find("delay_scope"); it != j.end()) {
    const std::string scope = it->get<std::string>();
    if (scope == "all") {
      cfg.delay_scope = DelayScope::all_users;
    } else if (scope == "offloaded") {
      cfg.delay_scope = DelayScope::offloaded_only;
    } else {
      throw ParseError("delay_scope must be \"all\" or \"offloaded\"");
    }
  }
  read_if_present(j, "deterministic_timing", cfg.deterministic_timing);
  return cfg;
}

ExperimentConfig load_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_experiment_config(buf.str());
}

std::string save_experiment_config(const ExperimentConfig& config) {
  nlohmann::json j;
  j["scenario"] = scenario_to_json(config.scenario);
  nlohmann::json algs = nlohmann::json::array();
  for (Algorithm a : config.algorithms) algs.push_back(to_string(a));
  j["algorithms"] = std::move(algs);
  j["n_users_sweep"] = config.n_users_sweep;
  j["tau_sweep"] = config.tau_sweep;
  j["metric"] = to_string(config.metric);
  j["iterations"] = config.iterations;
  j["trace_path"] = config.trace_path;
  j["output_dir"] = config.output_dir;
  j["master_seed"] = config.master_seed;
  j["threads"] = config.threads;
  j["strict_eq10"] = config.strict_double_sum;
  j["delay_scope"] = config.delay_scope == DelayScope::all_users ? "all" : "offloaded";
  j["deterministic_timing"] = config.deterministic_timing;
  return j.dump(2);
}

}  // namespace offsim
