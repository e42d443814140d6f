#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "offsim/assignment.hpp"
#include "offsim/compute.hpp"
#include "offsim/scenario.hpp"

namespace offsim {

// One committed greedy step, for replay verification.
struct AuditStep {
  std::size_t step = 0;
  std::size_t user = 0;
  std::size_t server = 0;
  double delta = 0.0;
  std::size_t candidate_users = 0;  // remaining candidate-set size at selection time
};

struct SolverReport {
  Assignment assignment;
  double objective = 0.0;
  std::size_t offload_count = 0;
  std::size_t iterations = 0;  // committed steps (greedy) or visited states (exhaustive)
  double wall_time_s = 0.0;
  std::vector<AuditStep> audit;
  std::vector<std::string> warnings;
};

struct ObjectiveOptions {
  // When set, reproduces the double-sum reading of the objective in which a
  // user contributes the local term once per server it is *not* attached to
  // (M times when local, M-1 extra times when offloaded). The default counts
  // each local term exactly once.
  bool strict_double_sum = false;
};

// Uncertainty-weighted sum of realized total delays. Zero-weight users
// contribute nothing even when their delay is infinite.
double objective(const Instance& instance, const Assignment& assignment,
                 const ObjectiveOptions& options = {});

// Quadratic surrogate coefficients: q[i][j] pairs the edge compute and
// full-band communication costs, c[i] is the weighted local delay. SINR is
// evaluated under the given assignment, counting user i as joined at j when
// it is not already attached there.
struct SurrogateTerms {
  std::size_t n_users = 0;
  std::size_t n_servers = 0;
  std::vector<double> q;  // row-major users x servers
  std::vector<double> c;  // per user

  double q_at(std::size_t user, std::size_t server) const {
    return q[user * n_servers + server];
  }
};

SurrogateTerms compute_q_c(const Instance& instance, const Assignment& assignment);

// sum_{i,j} x_{i,j} q_{i,j} n_j - sum_i x_i c_i with n_j the connected count.
double surrogate_objective(const Instance& instance, const Assignment& assignment);

// Weighted marginal delay change of offloading `user` to `server` on top of
// `partial`: the candidate is counted as joined for the bandwidth and
// capacity shares while interference comes from the committed assignment
// only. Requires the user to be unassigned in `partial`.
double delay_gap(const Instance& instance, const Assignment& partial, std::size_t user,
                 std::size_t server);

// Greedy offloading in two phases: users above the uncertainty threshold are
// all assigned by repeated arg-min of the weighted gap (falling back to the
// max-gain server, with a warning, if every gap is infinite); the remaining
// users are assigned one at a time while the minimum gap stays negative.
// Arg-min ties break toward the lowest user index, then the lowest server
// index.
SolverReport goa(const Instance& instance, double tau);

// Same greedy loop with the unweighted gap and no forced phase.
SolverReport dmin(const Instance& instance);

// Assigns every user by repeated arg-min of the weighted gap, ignoring the
// nonnegative-gap stop.
SolverReport edge_all(const Instance& instance);

SolverReport local_all(const Instance& instance);

// Uniformly samples k users, then assigns exactly those by the unweighted
// greedy loop.
SolverReport random_k(const Instance& instance, std::size_t k, std::uint64_t seed);

struct ExhaustiveOptions {
  std::uint64_t max_states = 2'000'000;
};

// Enumerates every assignment ((M+1)^N states) in lexicographic order of the
// per-user choice vector (local first) and returns the exact minimum;
// the first optimum encountered wins ties. Refuses when the state count
// exceeds the budget.
SolverReport exhaustive(const Instance& instance, const ExhaustiveOptions& options = {});

// Line-delimited JSON audit records for replay verification.
void write_audit_log(std::ostream& out, const SolverReport& report);

}  // namespace offsim
