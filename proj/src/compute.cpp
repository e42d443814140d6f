#include "offsim/compute.hpp"

#include <cmath>

#include "offsim/radio.hpp"

namespace offsim {

double edge_capacity_share(double c_es_flops, double c_max_flops,
                           std::size_t n_connected) noexcept {
  const double equal_share = c_es_flops / static_cast<double>(n_connected > 1 ? n_connected : 1);
  return equal_share < c_max_flops ? equal_share : c_max_flops;
}

double local_delay_s(double w_slm_flops, double c_local_flops) noexcept {
  return w_slm_flops / c_local_flops;
}

double edge_compute_delay_s(double w_llm_flops, double share_flops) noexcept {
  return w_llm_flops / share_flops;
}

std::vector<double> interference_by_server(const Instance& instance,
                                           const Assignment& assignment) {
  // total received power per server minus the part from its own users.
  std::vector<double> total(instance.n_servers(), 0.0);
  std::vector<double> own(instance.n_servers(), 0.0);
  for (std::size_t i = 0; i < assignment.n_users(); ++i) {
    const int s = assignment.server_of[i];
    if (s == Assignment::kLocal) continue;
    for (std::size_t j = 0; j < instance.n_servers(); ++j) {
      total[j] += instance.radio.tx_power_w * instance.channel_gain.at(i, j);
    }
    own[static_cast<std::size_t>(s)] +=
        instance.radio.tx_power_w * instance.channel_gain.at(i, static_cast<std::size_t>(s));
  }
  for (std::size_t j = 0; j < total.size(); ++j) total[j] -= own[j];
  return total;
}

double offloaded_comm_delay_s(const Instance& instance, std::size_t user, std::size_t server,
                              std::size_t n_connected, double interference_w) {
  const RadioParams& radio = instance.radio;
  const double share_hz = allocate_bandwidth(radio.bandwidth_hz, n_connected);
  const double noise_w = noise_power_w(radio.noise_psd_dbm_per_hz, share_hz);
  const double signal_w = radio.tx_power_w * instance.channel_gain.at(user, server);
  const double s = sinr_linear(signal_w, interference_w, noise_w);
  const double rate = share_hz * std::log2(1.0 + s);
  return comm_delay_s(instance.query_bits[user], rate);
}

double offloaded_edge_delay_s(const Instance& instance, std::size_t server,
                              std::size_t n_connected) {
  const double share =
      edge_capacity_share(instance.c_es_flops[server], instance.c_max_flops, n_connected);
  return edge_compute_delay_s(instance.w_llm_flops, share);
}

std::vector<DelayBreakdown> total_delays(const Instance& instance,
                                         const Assignment& assignment) {
  assignment.validate(instance.n_users(), instance.n_servers());

  const std::vector<std::size_t> counts = assignment.connected_counts(instance.n_servers());
  const std::vector<double> interference = interference_by_server(instance, assignment);

  std::vector<DelayBreakdown> out(instance.n_users());
  for (std::size_t i = 0; i < instance.n_users(); ++i) {
    DelayBreakdown& d = out[i];
    const int s = assignment.server_of[i];
    if (s == Assignment::kLocal) {
      d.comm_s = 0.0;
      d.comp_s = local_delay_s(instance.w_slm_flops, instance.c_local_flops[i]);
      d.server = Assignment::kLocal;
    } else {
      const auto j = static_cast<std::size_t>(s);
      d.comm_s = offloaded_comm_delay_s(instance, i, j, counts[j], interference[j]);
      d.comp_s = offloaded_edge_delay_s(instance, j, counts[j]);
      d.server = s;
    }
    d.total_s = d.comm_s + d.comp_s;
  }
  return out;
}

}  // namespace offsim
