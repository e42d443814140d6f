#include "offsim/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "offsim/scenario.hpp"

namespace offsim {

namespace {

// Support size over strictly positive entries; the metrics are normalized
// over this so zero-probability tail entries are inert.
std::size_t positive_support(const TokenDistribution& d) {
  std::size_t k = 0;
  for (double p : d.probs) k += (p > 0.0) ? 1 : 0;
  return k;
}

double entropy_nats(const TokenDistribution& d) {
  double h = 0.0;
  for (double p : d.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void require_k2(const TokenDistribution& d, const char* op) {
  if (d.k() < 2) {
    throw ConfigError(std::string(op) + " requires at least 2 probabilities, got " +
                      std::to_string(d.k()));
  }
}

}  // namespace

Metric metric_from_string(const std::string& name) {
  if (name == "margin") return Metric::margin;
  if (name == "entropy") return Metric::entropy;
  if (name == "perplexity") return Metric::perplexity;
  throw ConfigError("unknown uncertainty metric: " + name);
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::margin: return "margin";
    case Metric::entropy: return "entropy";
    case Metric::perplexity: return "perplexity";
  }
  return "margin";
}

TokenDistribution TokenDistribution::from_probs(std::vector<double> probs,
                                                std::vector<std::string>* warnings) {
  if (probs.size() < 2) {
    throw ParseError("topk_probs needs at least 2 entries, got " + std::to_string(probs.size()));
  }
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ParseError("topk_probs entries must be finite and >= 0");
    }
  }
  if (!std::is_sorted(probs.begin(), probs.end(), std::greater<double>())) {
    if (warnings) warnings->push_back("topk_probs not sorted descending; sorting");
    std::sort(probs.begin(), probs.end(), std::greater<double>());
  }
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!(sum > 0.0)) throw ParseError("topk_probs sum to zero");
  if (std::fabs(sum - 1.0) > 1e-6 && warnings) {
    std::ostringstream oss;
    oss << "topk_probs sum " << sum << " deviates from 1; renormalizing";
    warnings->push_back(oss.str());
  }
  for (double& p : probs) p /= sum;
  return TokenDistribution{std::move(probs)};
}

double margin_uncertainty(const TokenDistribution& d) {
  require_k2(d, "margin_uncertainty");
  return 1.0 - (d.probs[0] - d.probs[1]);
}

double entropy_uncertainty(const TokenDistribution& d) {
  require_k2(d, "entropy_uncertainty");
  const std::size_t k_eff = positive_support(d);
  if (k_eff <= 1) return 0.0;
  return entropy_nats(d) / std::log(static_cast<double>(k_eff));
}

double perplexity_uncertainty(const TokenDistribution& d) {
  require_k2(d, "perplexity_uncertainty");
  const std::size_t k_eff = positive_support(d);
  if (k_eff <= 1) return 0.0;
  return (std::exp(entropy_nats(d)) - 1.0) / (static_cast<double>(k_eff) - 1.0);
}

double apply_metric(Metric metric, const TokenDistribution& d) {
  switch (metric) {
    case Metric::margin: return margin_uncertainty(d);
    case Metric::entropy: return entropy_uncertainty(d);
    case Metric::perplexity: return perplexity_uncertainty(d);
  }
  return margin_uncertainty(d);
}

namespace {

UncertaintyRecord parse_record_line(const std::string& line, std::size_t line_no,
                                    std::vector<std::string>* warnings) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected an object");
  for (const char* field : {"topk_probs", "slm_correct", "llm_correct", "query_tokens"}) {
    if (!j.contains(field)) {
      throw ParseError("line " + std::to_string(line_no) + ": missing field " + field);
    }
  }
  UncertaintyRecord rec;
  try {
    std::vector<double> probs = j.at("topk_probs").get<std::vector<double>>();
    std::vector<std::string> local_warnings;
    rec.topk_probs = TokenDistribution::from_probs(std::move(probs), &local_warnings);
    if (warnings) {
      for (const std::string& w : local_warnings) {
        warnings->push_back("line " + std::to_string(line_no) + ": " + w);
      }
    }
    rec.slm_correct = j.at("slm_correct").get<bool>();
    rec.llm_correct = j.at("llm_correct").get<bool>();
    const auto tokens = j.at("query_tokens").get<std::int64_t>();
    if (tokens < 1) {
      throw ParseError("query_tokens must be >= 1, got " + std::to_string(tokens));
    }
    rec.query_tokens = static_cast<std::uint32_t>(tokens);
  } catch (const ParseError& e) {
    const std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": bad field type (" + e.what() + ")");
  }
  return rec;
}

}  // namespace

UncertaintyTrace load_trace(std::istream& in, TraceDiagnostics* diag, bool strict) {
  UncertaintyTrace trace;
  trace.source = UncertaintyTrace::Source::file;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      trace.records.push_back(
          parse_record_line(line, line_no, diag ? &diag->warnings : nullptr));
    } catch (const ParseError& e) {
      if (strict) throw;
      if (diag) diag->errors.push_back(e.what());
    }
  }
  if (trace.records.empty()) throw ParseError("trace contains no valid records");
  return trace;
}

UncertaintyTrace load_trace_file(const std::string& path, TraceDiagnostics* diag, bool strict) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file: " + path);
  UncertaintyTrace trace = load_trace(in, diag, strict);
  trace.origin = path;
  return trace;
}

void save_trace(std::ostream& out, const UncertaintyTrace& trace) {
  for (const UncertaintyRecord& rec : trace.records) {
    nlohmann::json j;
    j["topk_probs"] = rec.topk_probs.probs;
    j["slm_correct"] = rec.slm_correct;
    j["llm_correct"] = rec.llm_correct;
    j["query_tokens"] = rec.query_tokens;
    out << j.dump() << '\n';
  }
}

void save_trace_file(const std::string& path, const UncertaintyTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open trace file for writing: " + path);
  save_trace(out, trace);
}

double PiecewiseLinear::operator()(double x) const {
  if (knots.empty()) return 0.0;
  if (x <= knots.front().first) return knots.front().second;
  if (x >= knots.back().first) return knots.back().second;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (x <= knots[i].first) {
      const auto& [x0, y0] = knots[i - 1];
      const auto& [x1, y1] = knots[i];
      if (x1 == x0) return y1;
      const double t = (x - x0) / (x1 - x0);
      return y0 + t * (y1 - y0);
    }
  }
  return knots.back().second;
}

void PiecewiseLinear::validate(const std::string& name) const {
  if (knots.empty()) throw ConfigError(name + " has no knots");
  double prev_x = -1.0;
  for (const auto& [x, y] : knots) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(name + " knot x out of [0,1]");
    if (!(y >= 0.0 && y <= 1.0)) throw ConfigError(name + " value out of [0,1]");
    if (x <= prev_x) throw ConfigError(name + " knot x values must be strictly increasing");
    prev_x = x;
  }
}

void SyntheticTraceParams::validate() const {
  if (alpha_bin_weights.empty()) throw ConfigError("alpha_bin_weights is empty");
  double sum = 0.0;
  for (double w : alpha_bin_weights) {
    if (!(w >= 0.0)) throw ConfigError("alpha_bin_weights entries must be >= 0");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("alpha_bin_weights must sum to 1");
  slm_acc_curve.validate("slm_acc_curve");
  llm_acc_curve.validate("llm_acc_curve");
  if (query_tokens < 1) throw ConfigError("query_tokens must be >= 1");
}

UncertaintyRecord draw_synthetic_record(Rng& rng, const SyntheticTraceParams& params) {
  // Histogram draw over equal-width bins, uniform within the bin.
  const std::size_t n_bins = params.alpha_bin_weights.size();
  const double u = rng.uniform01();
  double cum = 0.0;
  std::size_t bin = n_bins - 1;
  for (std::size_t b = 0; b < n_bins; ++b) {
    cum += params.alpha_bin_weights[b];
    if (u < cum) {
      bin = b;
      break;
    }
  }
  const double width = 1.0 / static_cast<double>(n_bins);
  const double alpha = (static_cast<double>(bin) + rng.uniform01()) * width;

  // Two-point distribution whose margin uncertainty equals alpha.
  const double p2 = alpha / 2.0;
  UncertaintyRecord rec;
  rec.topk_probs = TokenDistribution{{1.0 - p2, p2}};
  rec.slm_correct = rng.bernoulli(params.slm_acc_curve(alpha));
  rec.llm_correct = rng.bernoulli(params.llm_acc_curve(alpha));
  rec.query_tokens = params.query_tokens;
  return rec;
}

UncertaintyTrace synth_trace(std::size_t n, const SyntheticTraceParams& params,
                             std::uint64_t seed) {
  if (n == 0) throw ConfigError("synthetic trace size must be >= 1");
  params.validate();
  Rng rng(seed);
  UncertaintyTrace trace;
  trace.source = UncertaintyTrace::Source::synthetic;
  trace.origin = "synthetic(n=" + std::to_string(n) + ")";
  trace.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) trace.records.push_back(draw_synthetic_record(rng, params));
  return trace;
}

double accuracy_of(const Instance& instance, const Assignment& assignment) {
  assignment.validate(instance.n_users(), instance.n_servers());
  double correct = 0.0;
  for (std::size_t i = 0; i < instance.n_users(); ++i) {
    const bool hit = assignment.is_offloaded(i) ? instance.llm_correct[i] != 0
                                                : instance.slm_correct[i] != 0;
    correct += hit ? 1.0 : 0.0;
  }
  return correct / static_cast<double>(instance.n_users());
}

}  // namespace offsim
