#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "offsim/solver.hpp"
#include "test_util.hpp"

using namespace offsim;
using testutil::make_instance;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Test-local enumeration oracle: walks every assignment by odometer and
// keeps the strictly best objective, independent of solver::exhaustive.
Assignment brute_force_best(const Instance& inst, double* best_obj = nullptr) {
  const std::size_t n = inst.n_users();
  const auto m = static_cast<int>(inst.n_servers());
  Assignment current = Assignment::all_local(n);
  Assignment best = current;
  double best_val = objective(inst, current);
  while (true) {
    std::size_t pos = n;
    bool advanced = false;
    while (pos > 0) {
      --pos;
      if (current.server_of[pos] < m - 1) {
        ++current.server_of[pos];
        for (std::size_t r = pos + 1; r < n; ++r) current.server_of[r] = Assignment::kLocal;
        advanced = true;
        break;
      }
    }
    if (!advanced) break;
    const double val = objective(inst, current);
    if (val < best_val) {
      best_val = val;
      best = current;
    }
  }
  if (best_obj) *best_obj = best_val;
  return best;
}

// Unweighted candidate gap recomputed from scratch; used to replay greedy
// audit logs without trusting the solver's incremental state.
double replay_gap(const Instance& inst, const Assignment& partial, std::size_t user,
                  std::size_t server, bool weighted) {
  const auto counts = partial.connected_counts(inst.n_servers());
  const auto interference = interference_by_server(inst, partial);
  const double edge = offloaded_comm_delay_s(inst, user, server, counts[server] + 1,
                                             interference[server]) +
                      offloaded_edge_delay_s(inst, server, counts[server] + 1);
  const double gap = edge - local_delay_s(inst.w_slm_flops, inst.c_local_flops[user]);
  return weighted ? inst.alpha[user] * gap : gap;
}

Instance two_user_world() {
  // User 0: slow local device, high uncertainty. User 1: fast local device,
  // low uncertainty. One server whose solo capacity beats user 0's device
  // but whose shared capacity does not beat user 1's.
  return make_instance({{100, 125}, {150, 125}}, {{125, 125}}, {46e9, 130e9}, {2e12},
                       {0.9, 0.2}, RadioParams{}, /*c_max_flops=*/1.5e12);
}

}  // namespace

TEST_CASE("objective of an all-local assignment is the weighted local sum") {
  const Instance inst = make_instance({{10, 10}, {20, 20}}, {{125, 125}}, {50e9, 100e9}, {10e12},
                                      {0.25, 0.75});
  double expect = 0.25 * (2e9 / 50e9) + 0.75 * (2e9 / 100e9);
  CHECK(objective(inst, Assignment::all_local(2)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zero weights annihilate the objective even with dead channels") {
  Instance inst = make_instance({{10, 10}, {20, 20}}, {{125, 125}}, {50e9, 100e9}, {10e12},
                                {0.0, 0.0});
  std::fill(inst.channel_gain.gains.begin(), inst.channel_gain.gains.end(), 0.0);
  Assignment a = Assignment::all_local(2);
  a.server_of[0] = 0;  // infinite comm delay, weight zero
  CHECK(objective(inst, a) == 0.0);
}

TEST_CASE("single offloaded user objective matches the delay breakdown") {
  const Instance inst = make_instance({{100, 125}}, {{125, 125}}, {50e9}, {2e12}, {0.7});
  Assignment a = Assignment::all_local(1);
  a.server_of[0] = 0;
  const auto delays = total_delays(inst, a);
  CHECK(objective(inst, a) == doctest::Approx(0.7 * delays[0].total_s).epsilon(1e-12));
}

TEST_CASE("strict double-sum mode multiplies local terms across servers") {
  const Instance inst = make_instance({{10, 10}, {400, 400}},
                                      {{125, 125}, {250, 250}, {375, 375}}, {50e9, 100e9},
                                      {10e12, 10e12, 10e12}, {0.5, 0.5});
  Assignment a = Assignment::all_local(2);
  a.server_of[0] = 0;
  const auto delays = total_delays(inst, a);
  const double local0 = 2e9 / 50e9;
  const double local1 = 2e9 / 100e9;
  const double expect = 0.5 * (delays[0].total_s + 2.0 * local0) + 0.5 * 3.0 * local1;
  CHECK(objective(inst, a, {.strict_double_sum = true}) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("surrogate terms expose the weighted local delay") {
  const Instance inst = make_instance({{10, 10}, {20, 20}}, {{125, 125}}, {50e9, 80e9}, {10e12},
                                      {0.3, 0.9});
  const SurrogateTerms terms = compute_q_c(inst, Assignment::all_local(2));
  CHECK(terms.c[0] == doctest::Approx(0.3 * 2e9 / 50e9).epsilon(1e-12));
  CHECK(terms.c[1] == doctest::Approx(0.9 * 2e9 / 80e9).epsilon(1e-12));
}

TEST_CASE("surrogate objective of the empty assignment is zero") {
  const Instance inst = make_instance({{10, 10}}, {{125, 125}}, {50e9}, {10e12}, {0.5});
  CHECK(surrogate_objective(inst, Assignment::all_local(1)) == 0.0);
}

TEST_CASE("single-server surrogate identity against the objective") {
  // With one server and the per-user cap inactive, surrogate + sum(c) equals
  // the exact objective.
  ScenarioConfig cfg = testutil::make_config(8, 1, 404);
  cfg.c_max_tflops = 1e6;  // cap never binds
  for (std::uint64_t it = 0; it < 30; ++it) {
    const Instance inst = generate_instance(cfg, nullptr, it);
    Rng rng(derive_seed(9, it, StreamTag::random_baseline));
    Assignment a = Assignment::all_local(8);
    for (auto& s : a.server_of) {
      if (rng.bernoulli(0.6)) s = 0;
    }
    const double lhs_parts = surrogate_objective(inst, a);
    const SurrogateTerms terms = compute_q_c(inst, a);
    double c_sum = 0.0;
    for (double c : terms.c) c_sum += c;
    const double obj = objective(inst, a);
    CHECK(lhs_parts + c_sum == doctest::Approx(obj).epsilon(1e-9));
  }
}

TEST_CASE("single-user delay gap equals the objective difference") {
  const Instance inst = make_instance({{100, 125}}, {{125, 125}}, {50e9}, {2e12}, {0.7});
  Assignment local = Assignment::all_local(1);
  Assignment off = local;
  off.server_of[0] = 0;
  const double gap = delay_gap(inst, local, 0, 0);
  CHECK(objective(inst, off) - objective(inst, local) == doctest::Approx(gap).epsilon(1e-12));
}

TEST_CASE("zero-weight users have zero delay gap everywhere") {
  Instance inst = make_instance({{100, 125}}, {{125, 125}}, {50e9}, {2e12}, {0.0});
  CHECK(delay_gap(inst, Assignment::all_local(1), 0, 0) == 0.0);
  std::fill(inst.channel_gain.gains.begin(), inst.channel_gain.gains.end(), 0.0);
  CHECK(delay_gap(inst, Assignment::all_local(1), 0, 0) == 0.0);
}

TEST_CASE("hopeless local devices make every edge gap negative") {
  const Instance inst = make_instance({{100, 125}}, {{125, 125}}, {1e6}, {2e12}, {0.9});
  CHECK(delay_gap(inst, Assignment::all_local(1), 0, 0) < 0.0);
}

TEST_CASE("delay gap refuses already-assigned users") {
  const Instance inst = make_instance({{100, 125}, {110, 125}}, {{125, 125}}, {50e9, 50e9},
                                      {2e12}, {0.5, 0.5});
  Assignment partial = Assignment::all_local(2);
  partial.server_of[0] = 0;
  CHECK_THROWS_AS(delay_gap(inst, partial, 0, 0), ConfigError);
}

TEST_CASE("goa matches the enumeration optimum on the two-user world") {
  const Instance inst = two_user_world();
  const SolverReport report = goa(inst, 0.6);

  CHECK(report.assignment.server_of[0] == 0);                  // forced offload, alpha 0.9
  CHECK(report.assignment.server_of[1] == Assignment::kLocal); // sharing would hurt
  CHECK(report.offload_count == 1);

  double best_obj = 0.0;
  const Assignment best = brute_force_best(inst, &best_obj);
  CHECK(report.assignment == best);
  CHECK(report.objective == doctest::Approx(best_obj).epsilon(1e-12));
}

TEST_CASE("goa with tau zero offloads everyone, like edge_all") {
  const ScenarioConfig cfg = testutil::make_config(6, 2, 5);
  const Instance inst = generate_instance(cfg, nullptr, 1);
  const SolverReport g = goa(inst, 0.0);
  CHECK(g.offload_count == 6);
  const SolverReport e = edge_all(inst);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(g.assignment.is_offloaded(i) == e.assignment.is_offloaded(i));
  }
}

TEST_CASE("goa stays all-local when nothing is forced and gaps are positive") {
  // Fast local devices and a weak edge: every gap is positive.
  const Instance inst = make_instance({{10, 10}, {490, 490}}, {{250, 250}}, {130e9, 130e9},
                                      {9.078e12}, {0.3, 0.4}, RadioParams{}, 1.513e12, 2e9,
                                      /*w_llm_flops=*/1e12);
  const SolverReport report = goa(inst, 0.6);
  CHECK(report.offload_count == 0);
  CHECK(report.audit.empty());
  CHECK(report.objective ==
        doctest::Approx(objective(inst, Assignment::all_local(2))).epsilon(1e-12));
}

TEST_CASE("goa with tau one has an empty forced phase") {
  const ScenarioConfig cfg = testutil::make_config(8, 2, 6);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  const SolverReport report = goa(inst, 1.0);
  for (const AuditStep& step : report.audit) CHECK(step.delta < 0.0);
}

TEST_CASE("goa satisfies the forced-offload constraint on random instances") {
  const ScenarioConfig cfg = testutil::make_config(30, 4, 52);
  for (std::uint64_t it = 0; it < 10; ++it) {
    const Instance inst = generate_instance(cfg, nullptr, it);
    const SolverReport report = goa(inst, 0.6);
    report.assignment.validate(30, 4);
    for (std::size_t i = 0; i < 30; ++i) {
      if (inst.alpha[i] > 0.6) CHECK(report.assignment.is_offloaded(i));
    }
    CHECK(report.iterations <= 30);
    std::set<std::size_t> committed;
    for (const AuditStep& s : report.audit) CHECK(committed.insert(s.user).second);
  }
}

TEST_CASE("goa is deterministic") {
  const ScenarioConfig cfg = testutil::make_config(20, 4, 8);
  const Instance inst = generate_instance(cfg, nullptr, 2);
  CHECK(goa(inst, 0.6).assignment == goa(inst, 0.6).assignment);
}

TEST_CASE("goa falls back to the max-gain server when every gap is infinite") {
  Instance inst = make_instance({{100, 125}, {110, 125}}, {{125, 125}, {375, 375}},
                                {50e9, 50e9}, {2e12, 2e12}, {0.9, 0.1});
  std::fill(inst.channel_gain.gains.begin(), inst.channel_gain.gains.end(), 0.0);
  // Strongest gain, yet so deep in the noise that 1 + SINR rounds to 1 and
  // the rate degenerates to zero.
  inst.channel_gain.at(0, 1) = 1e-30;
  const SolverReport report = goa(inst, 0.6);
  CHECK(report.assignment.server_of[0] == 1);
  CHECK(!report.warnings.empty());
  CHECK(report.assignment.server_of[1] == Assignment::kLocal);
}

TEST_CASE("forced sets shrink as tau grows") {
  const ScenarioConfig cfg = testutil::make_config(40, 4, 3);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  std::set<std::size_t> prev;
  for (std::size_t i = 0; i < 40; ++i) {
    if (inst.alpha[i] > 0.2) prev.insert(i);
  }
  for (double tau : {0.4, 0.6, 0.8}) {
    std::set<std::size_t> cur;
    for (std::size_t i = 0; i < 40; ++i) {
      if (inst.alpha[i] > tau) cur.insert(i);
    }
    CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
    prev = cur;
  }
}

TEST_CASE("dmin offloads a user whose edge path is faster") {
  const Instance inst = make_instance({{100, 125}}, {{125, 125}}, {46e9}, {2e12}, {0.5});
  const SolverReport report = dmin(inst);
  CHECK(report.offload_count == 1);  // ~10.7 ms edge vs 43.5 ms local
}

TEST_CASE("dmin keeps everyone local when every edge path is slower") {
  const Instance inst = make_instance({{10, 10}, {20, 20}}, {{250, 250}}, {130e9, 130e9},
                                      {9.078e12}, {0.5, 0.5}, RadioParams{}, 1.513e12, 2e9,
                                      /*w_llm_flops=*/1e12);
  CHECK(dmin(inst).offload_count == 0);
}

TEST_CASE("dmin audit replays as the running arg-min") {
  const ScenarioConfig cfg = testutil::make_config(12, 3, 17);
  const Instance inst = generate_instance(cfg, nullptr, 4);
  const SolverReport report = dmin(inst);

  Assignment partial = Assignment::all_local(12);
  std::set<std::size_t> remaining;
  for (std::size_t i = 0; i < 12; ++i) remaining.insert(i);

  for (const AuditStep& step : report.audit) {
    double min_gap = kInf;
    for (std::size_t u : remaining) {
      for (std::size_t j = 0; j < 3; ++j) {
        min_gap = std::min(min_gap, replay_gap(inst, partial, u, j, /*weighted=*/false));
      }
    }
    const double chosen = replay_gap(inst, partial, step.user, step.server, false);
    CHECK(chosen == doctest::Approx(min_gap).epsilon(1e-12));
    CHECK(step.delta == doctest::Approx(chosen).epsilon(1e-12));
    CHECK(step.candidate_users == remaining.size());
    partial.server_of[step.user] = static_cast<int>(step.server);
    remaining.erase(step.user);
  }

  // Post state: every remaining gap is nonnegative.
  for (std::size_t u : remaining) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(replay_gap(inst, partial, u, j, false) >= 0.0);
    }
  }
}

TEST_CASE("edge_all assigns every user") {
  const ScenarioConfig cfg = testutil::make_config(15, 4, 23);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  CHECK(edge_all(inst).offload_count == 15);
}

TEST_CASE("local_all reports the weighted local objective") {
  const ScenarioConfig cfg = testutil::make_config(10, 4, 29);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  double expect = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    expect += inst.alpha[i] * inst.w_slm_flops / inst.c_local_flops[i];
  }
  const SolverReport report = local_all(inst);
  CHECK(report.offload_count == 0);
  CHECK(report.objective == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("random_k edge cases and determinism") {
  const ScenarioConfig cfg = testutil::make_config(10, 3, 37);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  CHECK(random_k(inst, 0, 5).assignment == local_all(inst).assignment);
  CHECK(random_k(inst, 7, 5).offload_count == 7);
  CHECK(random_k(inst, 10, 5).offload_count == 10);
  CHECK(random_k(inst, 7, 5).assignment == random_k(inst, 7, 5).assignment);
  CHECK_THROWS_AS(random_k(inst, 11, 5), ConfigError);
}

TEST_CASE("exhaustive handles the single-user world directly") {
  const Instance inst = two_user_world();
  Instance solo = make_instance({{100, 125}}, {{125, 125}}, {46e9}, {2e12}, {0.9});
  const SolverReport report = exhaustive(solo);
  Assignment local = Assignment::all_local(1);
  Assignment off = local;
  off.server_of[0] = 0;
  const double best = std::min(objective(solo, local), objective(solo, off));
  CHECK(report.objective == doctest::Approx(best).epsilon(1e-12));
  CHECK(report.iterations == 2);
  (void)inst;
}

TEST_CASE("exhaustive agrees with the test enumeration on 3x2 worlds") {
  const ScenarioConfig cfg = testutil::make_config(3, 2, 61);
  for (std::uint64_t it = 0; it < 10; ++it) {
    const Instance inst = generate_instance(cfg, nullptr, it);
    const SolverReport report = exhaustive(inst);
    CHECK(report.iterations == 27);
    double best_obj = 0.0;
    const Assignment best = brute_force_best(inst, &best_obj);
    CHECK(report.objective == doctest::Approx(best_obj).epsilon(1e-12));
    CHECK(report.assignment == best);
  }
}

TEST_CASE("exhaustive breaks ties toward the lexicographically smallest assignment") {
  // All-zero weights make every assignment cost zero; all-local is first.
  const Instance inst = make_instance({{10, 10}, {20, 20}}, {{125, 125}, {375, 375}},
                                      {50e9, 50e9}, {10e12, 10e12}, {0.0, 0.0});
  CHECK(exhaustive(inst).assignment == Assignment::all_local(2));
}

TEST_CASE("exhaustive refuses oversized state spaces") {
  const ScenarioConfig cfg = testutil::make_config(30, 2, 71);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  CHECK_THROWS_WITH_AS(exhaustive(inst), doctest::Contains("budget"), ConfigError);
}

TEST_CASE("audit logs serialize to parseable line-delimited records") {
  const ScenarioConfig cfg = testutil::make_config(8, 2, 91);
  const Instance inst = generate_instance(cfg, nullptr, 0);
  const SolverReport report = dmin(inst);
  REQUIRE(!report.audit.empty());
  std::ostringstream out;
  write_audit_log(out, report);
  std::istringstream in(out.str());
  std::string line;
  std::size_t parsed = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<std::size_t>() == report.audit[parsed].step);
    CHECK(j.at("user").get<std::size_t>() == report.audit[parsed].user);
    CHECK(j.at("server").get<std::size_t>() == report.audit[parsed].server);
    CHECK(j.at("delta").get<double>() == report.audit[parsed].delta);
    CHECK(j.at("candidate_users").get<std::size_t>() == report.audit[parsed].candidate_users);
    ++parsed;
  }
  CHECK(parsed == report.audit.size());
}

TEST_CASE("the oracle lower-bounds every heuristic") {
  ScenarioConfig cfg = testutil::make_config(5, 2, 83);
  for (std::uint64_t it = 0; it < 25; ++it) {
    const Instance inst = generate_instance(cfg, nullptr, it);
    const double oracle = exhaustive(inst).objective;
    const SolverReport g = goa(inst, 0.6);
    CHECK(oracle <= g.objective);
    CHECK(oracle <= dmin(inst).objective);
    CHECK(oracle <= edge_all(inst).objective);
    CHECK(oracle <= local_all(inst).objective);
    CHECK(oracle <= random_k(inst, g.offload_count, it).objective);
  }
}
