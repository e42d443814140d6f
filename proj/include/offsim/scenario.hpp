#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "offsim/radio.hpp"
#include "offsim/types.hpp"
#include "offsim/uncertainty.hpp"

namespace offsim {

// Centers of the first n cells of the smallest square grid covering the
// area. For four servers on a 500 m side this yields (125,125), (375,125),
// (125,375), (375,375).
std::vector<Point2> grid_positions(std::size_t n_servers, double area_side_m);

// Everything needed to sample one world. Capacity ranges keep the units of
// their names; instances carry plain FLOP/s.
struct ScenarioConfig {
  std::size_t n_users = 60;
  std::size_t n_servers = 4;
  double area_side_m = 500.0;
  std::vector<Point2> es_positions = grid_positions(4, 500.0);

  RadioParams radio;

  Interval c_local_range_gflops{45.53, 136.6};
  Interval c_es_range_tflops{9.078, 21.18};
  double c_max_tflops = 1.513;

  double w_slm_flops = 2e9;
  double w_llm_flops = 16e9;

  double tau = 0.6;

  // Query size when no trace supplies token counts; with a trace,
  // query bits = query_tokens * bits_per_token.
  double query_bits_default = 8192.0;
  double bits_per_token = 16.0;

  bool zero_fading = false;
  bool trace_with_replacement = false;

  SyntheticTraceParams synthetic;

  std::uint64_t master_seed = 1;

  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

// One sampled world. All per-user vectors have length n_users, all
// per-server vectors length n_servers; capacities are FLOP/s.
struct Instance {
  std::vector<Point2> user_positions;
  std::vector<Point2> es_positions;
  ChannelMatrix channel_gain;

  std::vector<double> c_local_flops;
  std::vector<double> c_es_flops;
  std::vector<double> query_bits;
  std::vector<double> alpha;
  std::vector<std::uint8_t> slm_correct;
  std::vector<std::uint8_t> llm_correct;

  RadioParams radio;
  double c_max_flops = 0.0;
  double w_slm_flops = 0.0;
  double w_llm_flops = 0.0;

  std::size_t n_users() const noexcept { return user_positions.size(); }
  std::size_t n_servers() const noexcept { return es_positions.size(); }

  void validate() const;
  bool operator==(const Instance&) const = default;
};

// Samples one world deterministically from (config.master_seed,
// iteration_index): uniform user positions, uniform capacities, Rayleigh
// channels, and per-user query data taken from the trace (sampled without
// replacement unless configured otherwise) or from the synthetic model when
// no trace is given. `metric` maps each record's token distribution to the
// uncertainty weight.
Instance generate_instance(const ScenarioConfig& config, const UncertaintyTrace* trace,
                           std::uint64_t iteration_index, Metric metric = Metric::margin);

// JSON document round trip; reals survive bit-exactly. load validates every
// invariant and reports offending fields by name.
std::string save_instance(const Instance& instance);
Instance load_instance(const std::string& document);
void save_instance_file(const std::string& path, const Instance& instance);
Instance load_instance_file(const std::string& path);

}  // namespace offsim
