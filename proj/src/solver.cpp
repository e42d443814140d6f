#include "offsim/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "offsim/rng.hpp"

namespace offsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Incremental candidate evaluation over a growing partial assignment.
// Candidates are counted as joined for the bandwidth and capacity shares;
// interference comes from committed users only, so a commitment updates the
// per-server received-power sums in O(M).
class CandidateEvaluator {
 public:
  explicit CandidateEvaluator(const Instance& instance)
      : instance_(instance),
        assignment_(Assignment::all_local(instance.n_users())),
        connected_(instance.n_servers(), 0),
        total_rx_w_(instance.n_servers(), 0.0),
        own_rx_w_(instance.n_servers(), 0.0),
        local_delay_(instance.n_users()) {
    for (std::size_t i = 0; i < instance.n_users(); ++i) {
      local_delay_[i] = local_delay_s(instance.w_slm_flops, instance.c_local_flops[i]);
    }
  }

  CandidateEvaluator(const Instance& instance, const Assignment& partial)
      : CandidateEvaluator(instance) {
    partial.validate(instance.n_users(), instance.n_servers());
    for (std::size_t i = 0; i < partial.n_users(); ++i) {
      if (partial.is_offloaded(i)) {
        commit(i, static_cast<std::size_t>(partial.server_of[i]));
      }
    }
  }

  const Assignment& assignment() const noexcept { return assignment_; }

  void commit(std::size_t user, std::size_t server) {
    assignment_.server_of[user] = static_cast<int>(server);
    ++connected_[server];
    for (std::size_t j = 0; j < instance_.n_servers(); ++j) {
      total_rx_w_[j] += instance_.radio.tx_power_w * instance_.channel_gain.at(user, j);
    }
    own_rx_w_[server] += instance_.radio.tx_power_w * instance_.channel_gain.at(user, server);
  }

  double candidate_edge_total(std::size_t user, std::size_t server) const {
    const std::size_t n_joined = connected_[server] + 1;
    const double interference = total_rx_w_[server] - own_rx_w_[server];
    return offloaded_comm_delay_s(instance_, user, server, n_joined, interference) +
           offloaded_edge_delay_s(instance_, server, n_joined);
  }

  double gap(std::size_t user, std::size_t server, bool weighted) const {
    if (weighted && instance_.alpha[user] == 0.0) return 0.0;
    const double g = candidate_edge_total(user, server) - local_delay_[user];
    return weighted ? instance_.alpha[user] * g : g;
  }

 private:
  const Instance& instance_;
  Assignment assignment_;
  std::vector<std::size_t> connected_;
  std::vector<double> total_rx_w_;
  std::vector<double> own_rx_w_;
  std::vector<double> local_delay_;
};

struct GreedyPolicy {
  bool weighted = true;
  // Stop once the minimum gap is nonnegative; otherwise assign every
  // candidate, falling back to the max-gain server when all gaps are
  // infinite.
  bool stop_when_nonnegative = false;
};

void greedy_assign(const Instance& instance, CandidateEvaluator& eval,
                   std::vector<std::size_t> candidates, const GreedyPolicy& policy,
                   SolverReport& report) {
  const std::size_t n_servers = instance.n_servers();
  while (!candidates.empty()) {
    // Arg-min scan in ascending (user, server) order; strict improvement
    // keeps the lowest-index pair on ties. All-infinite gaps select nothing.
    bool found = false;
    double best_gap = kInf;
    std::size_t best_pos = 0;
    std::size_t best_server = 0;
    for (std::size_t pos = 0; pos < candidates.size(); ++pos) {
      for (std::size_t j = 0; j < n_servers; ++j) {
        const double g = eval.gap(candidates[pos], j, policy.weighted);
        if (g < best_gap) {
          best_gap = g;
          best_pos = pos;
          best_server = j;
          found = true;
        }
      }
    }

    if (policy.stop_when_nonnegative && (!found || best_gap >= 0.0)) break;

    if (!found) {
      // Forced offload with no usable link anywhere: best channel wins.
      best_pos = 0;
      const std::size_t user = candidates[best_pos];
      best_server = 0;
      for (std::size_t j = 1; j < n_servers; ++j) {
        if (instance.channel_gain.at(user, j) > instance.channel_gain.at(user, best_server)) {
          best_server = j;
        }
      }
      best_gap = kInf;
      report.warnings.push_back("user " + std::to_string(user) +
                                " forced to max-gain server " + std::to_string(best_server) +
                                " with infinite delay gap");
    }

    const std::size_t user = candidates[best_pos];
    report.audit.push_back(
        {report.audit.size(), user, best_server, best_gap, candidates.size()});
    eval.commit(user, best_server);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best_pos));
  }
}

SolverReport finalize_report(const Instance& instance, const Assignment& assignment,
                             SolverReport report, Clock::time_point start) {
  report.assignment = assignment;
  report.objective = objective(instance, assignment);
  report.offload_count = assignment.offload_count();
  report.iterations = report.audit.size();
  report.wall_time_s = seconds_since(start);
  return report;
}

}  // namespace

double objective(const Instance& instance, const Assignment& assignment,
                 const ObjectiveOptions& options) {
  const std::vector<DelayBreakdown> delays = total_delays(instance, assignment);
  const auto m = static_cast<double>(instance.n_servers());
  double sum = 0.0;
  for (std::size_t i = 0; i < instance.n_users(); ++i) {
    const double a = instance.alpha[i];
    if (a == 0.0) continue;  // zero weight annihilates even infinite delays
    if (!options.strict_double_sum) {
      sum += a * delays[i].total_s;
    } else {
      const double local = local_delay_s(instance.w_slm_flops, instance.c_local_flops[i]);
      if (delays[i].is_local()) {
        sum += a * m * local;
      } else {
        sum += a * (delays[i].total_s + (m - 1.0) * local);
      }
    }
  }
  return sum;
}

SurrogateTerms compute_q_c(const Instance& instance, const Assignment& assignment) {
  assignment.validate(instance.n_users(), instance.n_servers());
  const std::size_t n = instance.n_users();
  const std::size_t m = instance.n_servers();

  SurrogateTerms terms;
  terms.n_users = n;
  terms.n_servers = m;
  terms.q.resize(n * m, 0.0);
  terms.c.resize(n, 0.0);

  const std::vector<std::size_t> counts = assignment.connected_counts(m);
  const std::vector<double> interference = interference_by_server(instance, assignment);

  for (std::size_t i = 0; i < n; ++i) {
    terms.c[i] =
        instance.alpha[i] * local_delay_s(instance.w_slm_flops, instance.c_local_flops[i]);
    for (std::size_t j = 0; j < m; ++j) {
      if (instance.alpha[i] == 0.0) continue;
      const bool attached_here = assignment.is_offloaded(i) &&
                                 static_cast<std::size_t>(assignment.server_of[i]) == j;
      const std::size_t n_eff = counts[j] + (attached_here ? 0 : 1);
      // The interference snapshot at j already excludes users attached to j;
      // a user attached elsewhere must not interfere with itself.
      double interf = interference[j];
      if (assignment.is_offloaded(i) && !attached_here) {
        interf -= instance.radio.tx_power_w * instance.channel_gain.at(i, j);
      }
      const double share_hz = allocate_bandwidth(instance.radio.bandwidth_hz, n_eff);
      const double noise = noise_power_w(instance.radio.noise_psd_dbm_per_hz, share_hz);
      const double signal = instance.radio.tx_power_w * instance.channel_gain.at(i, j);
      const double se = std::log2(1.0 + sinr_linear(signal, interf, noise));
      const double comm_term =
          se > 0.0 ? instance.query_bits[i] / (instance.radio.bandwidth_hz * se) : kInf;
      terms.q[i * m + j] =
          instance.alpha[i] * (instance.w_llm_flops / instance.c_es_flops[j] + comm_term);
    }
  }
  return terms;
}

double surrogate_objective(const Instance& instance, const Assignment& assignment) {
  const SurrogateTerms terms = compute_q_c(instance, assignment);
  const std::vector<std::size_t> counts = assignment.connected_counts(instance.n_servers());
  double sum = 0.0;
  for (std::size_t i = 0; i < instance.n_users(); ++i) {
    if (!assignment.is_offloaded(i)) continue;
    const auto j = static_cast<std::size_t>(assignment.server_of[i]);
    sum += terms.q_at(i, j) * static_cast<double>(counts[j]) - terms.c[i];
  }
  return sum;
}

double delay_gap(const Instance& instance, const Assignment& partial, std::size_t user,
                 std::size_t server) {
  if (user >= instance.n_users() || server >= instance.n_servers()) {
    throw ConfigError("delay_gap: user or server index out of range");
  }
  if (partial.is_offloaded(user)) {
    throw ConfigError("delay_gap: user " + std::to_string(user) + " already assigned");
  }
  CandidateEvaluator eval(instance, partial);
  return eval.gap(user, server, /*weighted=*/true);
}

SolverReport goa(const Instance& instance, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau out of [0,1]");
  const auto start = Clock::now();

  CandidateEvaluator eval(instance);
  SolverReport report;

  std::vector<std::size_t> forced;
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < instance.n_users(); ++i) {
    (instance.alpha[i] > tau ? forced : remaining).push_back(i);
  }

  greedy_assign(instance, eval, std::move(forced),
                {.weighted = true, .stop_when_nonnegative = false}, report);
  greedy_assign(instance, eval, std::move(remaining),
                {.weighted = true, .stop_when_nonnegative = true}, report);

  return finalize_report(instance, eval.assignment(), std::move(report), start);
}

SolverReport dmin(const Instance& instance) {
  const auto start = Clock::now();
  CandidateEvaluator eval(instance);
  SolverReport report;

  std::vector<std::size_t> all(instance.n_users());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  greedy_assign(instance, eval, std::move(all),
                {.weighted = false, .stop_when_nonnegative = true}, report);

  return finalize_report(instance, eval.assignment(), std::move(report), start);
}

SolverReport edge_all(const Instance& instance) {
  const auto start = Clock::now();
  CandidateEvaluator eval(instance);
  SolverReport report;

  std::vector<std::size_t> all(instance.n_users());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  greedy_assign(instance, eval, std::move(all),
                {.weighted = true, .stop_when_nonnegative = false}, report);

  return finalize_report(instance, eval.assignment(), std::move(report), start);
}

SolverReport local_all(const Instance& instance) {
  const auto start = Clock::now();
  SolverReport report;
  return finalize_report(instance, Assignment::all_local(instance.n_users()), std::move(report),
                         start);
}

SolverReport random_k(const Instance& instance, std::size_t k, std::uint64_t seed) {
  if (k > instance.n_users()) {
    throw ConfigError("random_k: k " + std::to_string(k) + " exceeds n_users " +
                      std::to_string(instance.n_users()));
  }
  const auto start = Clock::now();
  CandidateEvaluator eval(instance);
  SolverReport report;

  Rng rng(seed);
  std::vector<std::size_t> chosen = rng.sample_without_replacement(instance.n_users(), k);
  std::sort(chosen.begin(), chosen.end());
  greedy_assign(instance, eval, std::move(chosen),
                {.weighted = false, .stop_when_nonnegative = false}, report);

  return finalize_report(instance, eval.assignment(), std::move(report), start);
}

SolverReport exhaustive(const Instance& instance, const ExhaustiveOptions& options) {
  const auto start = Clock::now();
  const std::size_t n = instance.n_users();
  const std::size_t m = instance.n_servers();

  double states_estimate = 1.0;
  for (std::size_t i = 0; i < n; ++i) states_estimate *= static_cast<double>(m + 1);
  if (states_estimate > static_cast<double>(options.max_states)) {
    throw ConfigError("exhaustive: (M+1)^N = " + std::to_string(states_estimate) +
                      " states exceeds budget " + std::to_string(options.max_states));
  }

  // Odometer over per-user choices, 0 = local, 1..m = server index + 1; the
  // last user varies fastest, so states appear in lexicographic order and
  // strict improvement keeps the lexicographically smallest optimum.
  std::vector<int> digits(n, 0);
  Assignment current = Assignment::all_local(n);
  Assignment best = current;
  double best_objective = objective(instance, current);
  std::size_t visited = 1;

  while (true) {
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (digits[pos] < static_cast<int>(m)) {
        ++digits[pos];
        current.server_of[pos] = digits[pos] - 1;
        for (std::size_t rest = pos + 1; rest < n; ++rest) {
          digits[rest] = 0;
          current.server_of[rest] = Assignment::kLocal;
        }
        break;
      }
      if (pos == 0) {
        SolverReport report;
        report.iterations = visited;
        SolverReport out = finalize_report(instance, best, std::move(report), start);
        out.objective = best_objective;
        out.iterations = visited;
        return out;
      }
    }
    ++visited;
    const double obj = objective(instance, current);
    if (obj < best_objective) {
      best_objective = obj;
      best = current;
    }
  }
}

void write_audit_log(std::ostream& out, const SolverReport& report) {
  for (const AuditStep& step : report.audit) {
    nlohmann::json j;
    j["step"] = step.step;
    j["user"] = step.user;
    j["server"] = step.server;
    j["delta"] = step.delta;
    j["candidate_users"] = step.candidate_users;
    out << j.dump() << '\n';
  }
}

}  // namespace offsim
