#include <cmath>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "offsim/uncertainty.hpp"
#include "test_util.hpp"

using namespace offsim;

namespace {

TokenDistribution dist(std::vector<double> probs) {
  return TokenDistribution::from_probs(std::move(probs));
}

}  // namespace

TEST_CASE("margin uncertainty boundary cases") {
  CHECK(margin_uncertainty(dist({0.5, 0.3, 0.2})) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(margin_uncertainty(dist({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(margin_uncertainty(dist({0.5, 0.5})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("entropy uncertainty boundary cases") {
  CHECK(entropy_uncertainty(dist({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(entropy_uncertainty(dist({1.0, 0.0, 0.0, 0.0})) == 0.0);
  CHECK(entropy_uncertainty(dist({0.5, 0.5})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("perplexity uncertainty boundary cases") {
  CHECK(perplexity_uncertainty(dist({0.25, 0.25, 0.25, 0.25})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perplexity_uncertainty(dist({1.0, 0.0})) == 0.0);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> probs;
    const std::size_t k = 2 + rng.uniform_index(6);
    for (std::size_t i = 0; i < k; ++i) probs.push_back(rng.uniform01() + 1e-9);
    const double v = perplexity_uncertainty(dist(std::move(probs)));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("zero-probability tail entries change nothing") {
  const TokenDistribution base = dist({0.5, 0.3, 0.2});
  const TokenDistribution padded = dist({0.5, 0.3, 0.2, 0.0, 0.0});
  CHECK(margin_uncertainty(padded) == margin_uncertainty(base));
  CHECK(entropy_uncertainty(padded) == entropy_uncertainty(base));
  CHECK(perplexity_uncertainty(padded) == perplexity_uncertainty(base));
}

TEST_CASE("margin is invariant under input permutation") {
  CHECK(margin_uncertainty(dist({0.2, 0.5, 0.3})) == margin_uncertainty(dist({0.5, 0.3, 0.2})));
}

TEST_CASE("distribution construction validates and normalizes") {
  CHECK_THROWS_AS(TokenDistribution::from_probs({0.9}), ParseError);
  CHECK_THROWS_AS(TokenDistribution::from_probs({0.9, -0.1}), ParseError);
  CHECK_THROWS_AS(TokenDistribution::from_probs({0.0, 0.0}), ParseError);

  std::vector<std::string> warnings;
  const TokenDistribution d = TokenDistribution::from_probs({0.3, 0.5}, &warnings);
  CHECK(d.probs[0] == doctest::Approx(0.625));
  REQUIRE(!warnings.empty());

  warnings.clear();
  TokenDistribution::from_probs({0.6, 0.6}, &warnings);
  REQUIRE(!warnings.empty());
  CHECK(warnings[0].find("renormaliz") != std::string::npos);
}

TEST_CASE("metrics refuse degenerate inputs") {
  TokenDistribution broken;
  broken.probs = {1.0};
  CHECK_THROWS_AS(margin_uncertainty(broken), ConfigError);
  CHECK_THROWS_AS(entropy_uncertainty(broken), ConfigError);
  CHECK_THROWS_AS(perplexity_uncertainty(broken), ConfigError);
}

TEST_CASE("trace loading accepts well-formed lines and warns on sloppy ones") {
  std::istringstream in(
      R"({"topk_probs": [0.7, 0.2, 0.1], "slm_correct": true, "llm_correct": true, "query_tokens": 64}
{"topk_probs": [0.3, 0.5], "slm_correct": false, "llm_correct": true, "query_tokens": 32}

{"topk_probs": [0.5, 0.5], "slm_correct": false, "llm_correct": false, "query_tokens": 16}
)");
  TraceDiagnostics diag;
  const UncertaintyTrace trace = load_trace(in, &diag);
  CHECK(trace.size() == 3);
  REQUIRE(!diag.warnings.empty());
  CHECK(diag.warnings[0].find("line 2") != std::string::npos);
}

TEST_CASE("trace loading rejects records with fewer than two probabilities") {
  std::istringstream in(
      R"({"topk_probs": [0.7, 0.3], "slm_correct": true, "llm_correct": true, "query_tokens": 8}
{"topk_probs": [0.9], "slm_correct": true, "llm_correct": true, "query_tokens": 8}
)");
  CHECK_THROWS_WITH_AS(load_trace(in), doctest::Contains("line 2"), ParseError);
}

TEST_CASE("lenient trace loading skips bad records and reports them") {
  std::istringstream in(
      R"({"topk_probs": [0.9], "slm_correct": true, "llm_correct": true, "query_tokens": 8}
{"topk_probs": [0.7, 0.3], "slm_correct": true, "llm_correct": false, "query_tokens": 8}
not json at all
)");
  TraceDiagnostics diag;
  const UncertaintyTrace trace = load_trace(in, &diag, /*strict=*/false);
  CHECK(trace.size() == 1);
  CHECK(diag.errors.size() == 2);
}

TEST_CASE("trace save/load round trip") {
  const UncertaintyTrace trace = synth_trace(64, {}, 12);
  std::stringstream buf;
  save_trace(buf, trace);
  const UncertaintyTrace reloaded = load_trace(buf);
  REQUIRE(reloaded.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) CHECK(reloaded.records[i] == trace.records[i]);
}

TEST_CASE("synthetic records invert the margin construction") {
  SyntheticTraceParams params;
  params.alpha_bin_weights = {0, 0, 0, 1.0, 0, 0, 0, 0, 0, 0};  // alpha in [0.3, 0.4)
  const UncertaintyTrace trace = synth_trace(500, params, 7);
  for (const UncertaintyRecord& rec : trace.records) {
    const double a = margin_uncertainty(rec.topk_probs);
    CHECK(a >= 0.3);
    CHECK(a < 0.4);
    CHECK(rec.topk_probs.probs[0] == doctest::Approx(1.0 - a / 2.0).epsilon(1e-12));
    CHECK(rec.topk_probs.probs[1] == doctest::Approx(a / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("synthetic correctness follows the accuracy curves") {
  const SyntheticTraceParams params;
  const std::size_t n = 100000;
  const UncertaintyTrace trace = synth_trace(n, params, 4242);

  const std::size_t bins = 10;
  std::vector<double> slm_hits(bins, 0), llm_hits(bins, 0), counts(bins, 0);
  for (const UncertaintyRecord& rec : trace.records) {
    const double a = margin_uncertainty(rec.topk_probs);
    auto b = static_cast<std::size_t>(a * bins);
    if (b >= bins) b = bins - 1;
    counts[b] += 1;
    slm_hits[b] += rec.slm_correct ? 1 : 0;
    llm_hits[b] += rec.llm_correct ? 1 : 0;
  }

  double prev = 1.0;
  for (std::size_t b = 0; b < bins; ++b) {
    REQUIRE(counts[b] > 0);
    const double mid = (static_cast<double>(b) + 0.5) / bins;
    const double slm_emp = slm_hits[b] / counts[b];
    const double llm_emp = llm_hits[b] / counts[b];

    // Binned accuracy must trend down and track the curve within 3 sigma.
    CHECK(slm_emp <= prev + 0.01);
    prev = slm_emp;

    const double slm_expect = params.slm_acc_curve(mid);
    const double llm_expect = params.llm_acc_curve(mid);
    const double slm_sigma = std::sqrt(slm_expect * (1 - slm_expect) / counts[b]);
    const double llm_sigma = std::sqrt(llm_expect * (1 - llm_expect) / counts[b]);
    CHECK(std::fabs(slm_emp - slm_expect) <= 3.0 * slm_sigma + 0.01);
    CHECK(std::fabs(llm_emp - llm_expect) <= 3.0 * llm_sigma + 0.01);
  }
}

TEST_CASE("synthetic traces are deterministic in the seed") {
  const UncertaintyTrace a = synth_trace(100, {}, 9);
  const UncertaintyTrace b = synth_trace(100, {}, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records[i] == b.records[i]);
}

TEST_CASE("curves outside the unit square are rejected") {
  SyntheticTraceParams params;
  params.slm_acc_curve.knots = {{0.0, 1.2}, {1.0, 0.3}};
  CHECK_THROWS_AS(params.validate(), ConfigError);
  params.slm_acc_curve.knots = {{0.0, 0.9}, {1.5, 0.3}};
  CHECK_THROWS_AS(params.validate(), ConfigError);
}

TEST_CASE("accuracy scores the served model per user") {
  Instance inst = testutil::make_instance({{10, 10}, {20, 20}, {30, 30}}, {{125, 125}},
                                          {50e9, 60e9, 70e9}, {10e12}, {0.5, 0.5, 0.5});
  inst.slm_correct = {1, 1, 1};
  inst.llm_correct = {0, 1, 1};

  CHECK(accuracy_of(inst, Assignment::all_local(3)) == 1.0);

  Assignment all = Assignment::all_local(3);
  for (auto& s : all.server_of) s = 0;
  CHECK(accuracy_of(inst, all) == doctest::Approx(2.0 / 3.0));

  // With llm >= slm pointwise, offloading a superset never lowers accuracy.
  inst.slm_correct = {0, 1, 0};
  inst.llm_correct = {1, 1, 1};
  Assignment small = Assignment::all_local(3);
  small.server_of[0] = 0;
  Assignment big = small;
  big.server_of[2] = 0;
  CHECK(accuracy_of(inst, big) >= accuracy_of(inst, small));
}
