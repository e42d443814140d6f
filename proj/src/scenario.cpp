#include "offsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "offsim/rng.hpp"

namespace offsim {

std::vector<Point2> grid_positions(std::size_t n_servers, double area_side_m) {
  std::vector<Point2> out;
  if (n_servers == 0) return out;
  const auto cols = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(n_servers))));
  const auto rows = (n_servers + cols - 1) / cols;
  const double dx = area_side_m / static_cast<double>(cols);
  const double dy = area_side_m / static_cast<double>(rows);
  out.reserve(n_servers);
  for (std::size_t r = 0; r < rows && out.size() < n_servers; ++r) {
    for (std::size_t c = 0; c < cols && out.size() < n_servers; ++c) {
      out.push_back({(static_cast<double>(c) + 0.5) * dx, (static_cast<double>(r) + 0.5) * dy});
    }
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (n_users < 1) throw ConfigError("n_users must be >= 1");
  if (n_servers < 1) throw ConfigError("n_servers must be >= 1");
  if (!(area_side_m > 0.0)) throw ConfigError("area_side must be > 0");
  if (es_positions.size() != n_servers) {
    throw ConfigError("es_positions size mismatch: expected " + std::to_string(n_servers) +
                      ", got " + std::to_string(es_positions.size()));
  }
  for (std::size_t j = 0; j < es_positions.size(); ++j) {
    const Point2& p = es_positions[j];
    if (!(p.x >= 0.0 && p.x <= area_side_m && p.y >= 0.0 && p.y <= area_side_m)) {
      throw ConfigError("es_positions[" + std::to_string(j) + "] outside [0, area_side]^2");
    }
  }
  radio.validate();
  if (!(c_local_range_gflops.lo > 0.0) || !(c_local_range_gflops.hi >= c_local_range_gflops.lo)) {
    throw ConfigError("c_local_range_gflops must be a positive interval");
  }
  if (!(c_es_range_tflops.lo > 0.0) || !(c_es_range_tflops.hi >= c_es_range_tflops.lo)) {
    throw ConfigError("c_es_range_tflops must be a positive interval");
  }
  if (!(c_max_tflops > 0.0)) throw ConfigError("c_max_tflops must be > 0");
  if (!(w_slm_flops > 0.0)) throw ConfigError("w_slm_flops must be > 0");
  if (!(w_llm_flops > 0.0)) throw ConfigError("w_llm_flops must be > 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau out of [0,1]");
  if (!(query_bits_default > 0.0)) throw ConfigError("query_bits_default must be > 0");
  if (!(bits_per_token > 0.0)) throw ConfigError("bits_per_token must be > 0");
  synthetic.validate();
}

void Instance::validate() const {
  const std::size_t n = n_users();
  const std::size_t m = n_servers();
  if (n < 1) throw ConfigError("instance has no users");
  if (m < 1) throw ConfigError("instance has no servers");

  auto check_len = [n](std::size_t got, const char* field) {
    if (got != n) {
      throw ConfigError(std::string(field) + " size mismatch: expected " + std::to_string(n) +
                        ", got " + std::to_string(got));
    }
  };
  check_len(c_local_flops.size(), "c_local");
  check_len(query_bits.size(), "query_bits");
  check_len(alpha.size(), "alpha");
  check_len(slm_correct.size(), "slm_correct");
  check_len(llm_correct.size(), "llm_correct");
  if (c_es_flops.size() != m) {
    throw ConfigError("c_es size mismatch: expected " + std::to_string(m) + ", got " +
                      std::to_string(c_es_flops.size()));
  }
  if (channel_gain.n_users != n || channel_gain.n_servers != m) {
    throw ConfigError("channel_gain shape mismatch: expected " + std::to_string(n) + "x" +
                      std::to_string(m));
  }
  channel_gain.validate();

  for (double v : c_local_flops) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("c_local entries must be > 0");
  }
  for (double v : c_es_flops) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("c_es entries must be > 0");
  }
  for (double v : query_bits) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("query_bits entries must be > 0");
  }
  for (double a : alpha) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha out of [0,1]");
  }
  radio.validate();
  if (!(c_max_flops > 0.0)) throw ConfigError("c_max_flops must be > 0");
  if (!(w_slm_flops > 0.0)) throw ConfigError("w_slm_flops must be > 0");
  if (!(w_llm_flops > 0.0)) throw ConfigError("w_llm_flops must be > 0");
}

Instance generate_instance(const ScenarioConfig& config, const UncertaintyTrace* trace,
                           std::uint64_t iteration_index, Metric metric) {
  config.validate();
  const std::size_t n = config.n_users;
  if (trace != nullptr && trace->size() < n && !config.trace_with_replacement) {
    throw ConfigError("trace shorter than n_users: " + std::to_string(trace->size()) + " < " +
                      std::to_string(n));
  }

  Instance inst;
  inst.es_positions = config.es_positions;
  inst.radio = config.radio;
  inst.c_max_flops = config.c_max_tflops * 1e12;
  inst.w_slm_flops = config.w_slm_flops;
  inst.w_llm_flops = config.w_llm_flops;

  {
    Rng rng(derive_seed(config.master_seed, iteration_index, StreamTag::user_positions));
    inst.user_positions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      inst.user_positions.push_back(
          {rng.uniform(0.0, config.area_side_m), rng.uniform(0.0, config.area_side_m)});
    }
  }
  {
    Rng rng(derive_seed(config.master_seed, iteration_index, StreamTag::local_capacity));
    inst.c_local_flops.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      inst.c_local_flops.push_back(
          rng.uniform(config.c_local_range_gflops.lo, config.c_local_range_gflops.hi) * 1e9);
    }
  }
  {
    Rng rng(derive_seed(config.master_seed, iteration_index, StreamTag::es_capacity));
    inst.c_es_flops.reserve(config.n_servers);
    for (std::size_t j = 0; j < config.n_servers; ++j) {
      inst.c_es_flops.push_back(
          rng.uniform(config.c_es_range_tflops.lo, config.c_es_range_tflops.hi) * 1e12);
    }
  }

  inst.channel_gain = draw_channel_matrix(
      inst.user_positions, inst.es_positions, config.radio,
      derive_seed(config.master_seed, iteration_index, StreamTag::channel), config.zero_fading);

  inst.query_bits.resize(n);
  inst.alpha.resize(n);
  inst.slm_correct.resize(n);
  inst.llm_correct.resize(n);

  if (trace != nullptr) {
    Rng rng(derive_seed(config.master_seed, iteration_index, StreamTag::trace_sample));
    std::vector<std::size_t> picks;
    if (config.trace_with_replacement) {
      picks.reserve(n);
      for (std::size_t i = 0; i < n; ++i) picks.push_back(rng.uniform_index(trace->size()));
    } else {
      picks = rng.sample_without_replacement(trace->size(), n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const UncertaintyRecord& rec = trace->records[picks[i]];
      inst.query_bits[i] = static_cast<double>(rec.query_tokens) * config.bits_per_token;
      inst.alpha[i] = apply_metric(metric, rec.topk_probs);
      inst.slm_correct[i] = rec.slm_correct ? 1 : 0;
      inst.llm_correct[i] = rec.llm_correct ? 1 : 0;
    }
  } else {
    Rng rng(derive_seed(config.master_seed, iteration_index, StreamTag::synthetic));
    for (std::size_t i = 0; i < n; ++i) {
      const UncertaintyRecord rec = draw_synthetic_record(rng, config.synthetic);
      inst.query_bits[i] = config.query_bits_default;
      inst.alpha[i] = apply_metric(metric, rec.topk_probs);
      inst.slm_correct[i] = rec.slm_correct ? 1 : 0;
      inst.llm_correct[i] = rec.llm_correct ? 1 : 0;
    }
  }

  inst.validate();
  return inst;
}

namespace {

nlohmann::json points_to_json(const std::vector<Point2>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Point2& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Point2> points_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string(field) + " must be an array of [x, y] pairs");
  std::vector<Point2> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) {
      throw ParseError(std::string(field) + " entries must be [x, y] pairs");
    }
    out.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return out;
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw ParseError(std::string("missing field ") + field);
  return *it;
}

}  // namespace

std::string save_instance(const Instance& instance) {
  nlohmann::json j;
  j["user_positions"] = points_to_json(instance.user_positions);
  j["es_positions"] = points_to_json(instance.es_positions);
  {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < instance.channel_gain.n_users; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t s = 0; s < instance.channel_gain.n_servers; ++s) {
        row.push_back(instance.channel_gain.at(i, s));
      }
      rows.push_back(std::move(row));
    }
    j["channel_gain"] = std::move(rows);
  }
  j["c_local"] = instance.c_local_flops;
  j["c_es"] = instance.c_es_flops;
  j["query_bits"] = instance.query_bits;
  j["alpha"] = instance.alpha;
  {
    nlohmann::json slm = nlohmann::json::array();
    nlohmann::json llm = nlohmann::json::array();
    for (std::size_t i = 0; i < instance.n_users(); ++i) {
      slm.push_back(instance.slm_correct[i] != 0);
      llm.push_back(instance.llm_correct[i] != 0);
    }
    j["slm_correct"] = std::move(slm);
    j["llm_correct"] = std::move(llm);
  }
  j["radio"] = {{"bandwidth_hz", instance.radio.bandwidth_hz},
                {"tx_power_w", instance.radio.tx_power_w},
                {"noise_psd_dbm_per_hz", instance.radio.noise_psd_dbm_per_hz},
                {"path_loss_exponent", instance.radio.path_loss_exponent},
                {"reference_loss_db", instance.radio.reference_loss_db}};
  j["c_max_flops"] = instance.c_max_flops;
  j["w_slm_flops"] = instance.w_slm_flops;
  j["w_llm_flops"] = instance.w_llm_flops;
  return j.dump(2);
}

Instance load_instance(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid instance document: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("instance document must be a JSON object");

  Instance inst;
  try {
    inst.user_positions = points_from_json(require_field(j, "user_positions"), "user_positions");
    inst.es_positions = points_from_json(require_field(j, "es_positions"), "es_positions");

    const nlohmann::json& gains = require_field(j, "channel_gain");
    if (!gains.is_array()) throw ParseError("channel_gain must be an array of rows");
    inst.channel_gain.n_users = gains.size();
    inst.channel_gain.n_servers = inst.es_positions.size();
    for (const auto& row : gains) {
      if (!row.is_array() || row.size() != inst.channel_gain.n_servers) {
        throw ParseError("channel_gain rows must have one entry per server");
      }
      for (const auto& g : row) inst.channel_gain.gains.push_back(g.get<double>());
    }

    inst.c_local_flops = require_field(j, "c_local").get<std::vector<double>>();
    inst.c_es_flops = require_field(j, "c_es").get<std::vector<double>>();
    inst.query_bits = require_field(j, "query_bits").get<std::vector<double>>();
    inst.alpha = require_field(j, "alpha").get<std::vector<double>>();
    for (bool b : require_field(j, "slm_correct").get<std::vector<bool>>()) {
      inst.slm_correct.push_back(b ? 1 : 0);
    }
    for (bool b : require_field(j, "llm_correct").get<std::vector<bool>>()) {
      inst.llm_correct.push_back(b ? 1 : 0);
    }

    const nlohmann::json& radio = require_field(j, "radio");
    inst.radio.bandwidth_hz = require_field(radio, "bandwidth_hz").get<double>();
    inst.radio.tx_power_w = require_field(radio, "tx_power_w").get<double>();
    inst.radio.noise_psd_dbm_per_hz = require_field(radio, "noise_psd_dbm_per_hz").get<double>();
    inst.radio.path_loss_exponent = require_field(radio, "path_loss_exponent").get<double>();
    inst.radio.reference_loss_db = require_field(radio, "reference_loss_db").get<double>();

    inst.c_max_flops = require_field(j, "c_max_flops").get<double>();
    inst.w_slm_flops = require_field(j, "w_slm_flops").get<double>();
    inst.w_llm_flops = require_field(j, "w_llm_flops").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad field type in instance document: ") + e.what());
  }

  try {
    inst.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return inst;
}

void save_instance_file(const std::string& path, const Instance& instance) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open instance file for writing: " + path);
  out << save_instance(instance) << '\n';
}

Instance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_instance(buf.str());
}

}  // namespace offsim
