#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "offsim/assignment.hpp"
#include "offsim/rng.hpp"
#include "offsim/types.hpp"

namespace offsim {

struct Instance;  // scenario.hpp

enum class Metric { margin, entropy, perplexity };

Metric metric_from_string(const std::string& name);
std::string to_string(Metric metric);

// Top-k next-token probabilities: sorted descending, renormalized to sum 1.
struct TokenDistribution {
  std::vector<double> probs;

  // Sorts descending (with a warning when the input was unsorted) and
  // renormalizes (with a warning when the input sum is off by more than
  // 1e-6). Rejects fewer than two entries, negative entries, and zero mass.
  static TokenDistribution from_probs(std::vector<double> probs,
                                      std::vector<std::string>* warnings = nullptr);

  std::size_t k() const noexcept { return probs.size(); }
  bool operator==(const TokenDistribution&) const = default;
};

// 1 - (p1 - p2): 0 on a point mass, 1 on a top-2 tie.
double margin_uncertainty(const TokenDistribution& d);

// Shannon entropy normalized by log of the strictly-positive support size,
// so appending zero-probability tail entries does not change the value.
double entropy_uncertainty(const TokenDistribution& d);

// (exp(H) - 1) / (k_eff - 1): maps perplexity over the positive support onto
// [0, 1], consistent with the entropy normalization.
double perplexity_uncertainty(const TokenDistribution& d);

double apply_metric(Metric metric, const TokenDistribution& d);

// One query's uncertainty data plus ground-truth correctness labels.
struct UncertaintyRecord {
  TokenDistribution topk_probs;
  bool slm_correct = false;
  bool llm_correct = false;
  std::uint32_t query_tokens = 1;

  bool operator==(const UncertaintyRecord&) const = default;
};

struct UncertaintyTrace {
  enum class Source { file, synthetic };

  std::vector<UncertaintyRecord> records;
  Source source = Source::synthetic;
  std::string origin;  // file path or a short synthetic description

  std::size_t size() const noexcept { return records.size(); }
};

struct TraceDiagnostics {
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // populated instead of throwing when strict = false
};

// Line-delimited JSON records with fields topk_probs, slm_correct,
// llm_correct, query_tokens. Malformed records raise ParseError naming the
// line when strict, or are skipped and reported in diagnostics otherwise.
UncertaintyTrace load_trace(std::istream& in, TraceDiagnostics* diag = nullptr,
                            bool strict = true);
UncertaintyTrace load_trace_file(const std::string& path, TraceDiagnostics* diag = nullptr,
                                 bool strict = true);

void save_trace(std::ostream& out, const UncertaintyTrace& trace);
void save_trace_file(const std::string& path, const UncertaintyTrace& trace);

// Piecewise-linear map on [0, 1], clamped outside the knot range.
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> knots;  // (x, y), x ascending

  double operator()(double x) const;
  void validate(const std::string& name) const;  // knots in [0,1] x [0,1]
  bool operator==(const PiecewiseLinear&) const = default;
};

// Synthetic query model: uncertainty drawn from a histogram over [0, 1]
// (equal-width bins), correctness drawn from accuracy curves evaluated at the
// drawn uncertainty. Each record stores the two-point distribution
// (1 - a/2, a/2), whose margin uncertainty reproduces the drawn value a.
struct SyntheticTraceParams {
  std::vector<double> alpha_bin_weights = {0.10, 0.10, 0.08, 0.04, 0.04,
                                           0.04, 0.08, 0.12, 0.20, 0.20};
  PiecewiseLinear slm_acc_curve{{{0.0, 0.95}, {1.0, 0.35}}};
  PiecewiseLinear llm_acc_curve{{{0.0, 0.98}, {1.0, 0.75}}};
  std::uint32_t query_tokens = 512;

  void validate() const;
  bool operator==(const SyntheticTraceParams&) const = default;
};

UncertaintyRecord draw_synthetic_record(Rng& rng, const SyntheticTraceParams& params);

UncertaintyTrace synth_trace(std::size_t n, const SyntheticTraceParams& params,
                             std::uint64_t seed);

// Mean correctness under the assignment: the LLM label for offloaded users,
// the SLM label otherwise.
double accuracy_of(const Instance& instance, const Assignment& assignment);

}  // namespace offsim
