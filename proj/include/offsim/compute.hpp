#pragma once

#include <cstddef>
#include <vector>

#include "offsim/assignment.hpp"
#include "offsim/scenario.hpp"

namespace offsim {

// Realized per-user delay under an assignment.
struct DelayBreakdown {
  double comm_s = 0.0;
  double comp_s = 0.0;
  double total_s = 0.0;
  int server = Assignment::kLocal;

  bool is_local() const noexcept { return server == Assignment::kLocal; }
};

// min(c_max, c_es / max(1, n)): equal processor sharing with a per-user cap.
double edge_capacity_share(double c_es_flops, double c_max_flops,
                           std::size_t n_connected) noexcept;

double local_delay_s(double w_slm_flops, double c_local_flops) noexcept;

double edge_compute_delay_s(double w_llm_flops, double share_flops) noexcept;

// Interference power received at each server from users committed to other
// servers. Independent of which attached user is probed.
std::vector<double> interference_by_server(const Instance& instance,
                                           const Assignment& assignment);

// Delay kernel shared by realized evaluation and the solvers' candidate
// evaluation; only n_connected and the interference snapshot differ between
// the two (candidates count themselves as joined and see committed
// interference only).
double offloaded_comm_delay_s(const Instance& instance, std::size_t user, std::size_t server,
                              std::size_t n_connected, double interference_w);
double offloaded_edge_delay_s(const Instance& instance, std::size_t server,
                              std::size_t n_connected);

// Realized delays under the final assignment: bandwidth/capacity shares at
// the final connected counts, interference from the full assignment. Local
// users pay the SLM compute delay only.
std::vector<DelayBreakdown> total_delays(const Instance& instance,
                                         const Assignment& assignment);

}  // namespace offsim
