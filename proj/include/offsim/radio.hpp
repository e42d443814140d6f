#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "offsim/assignment.hpp"
#include "offsim/types.hpp"

namespace offsim {

// Uplink PHY parameters. The noise term is a power spectral density; actual
// noise power is integrated over the bandwidth allocated to the user.
struct RadioParams {
  double bandwidth_hz = 100e6;          // B, shared per server
  double tx_power_w = 0.2;              // P, fixed uplink power per user
  double noise_psd_dbm_per_hz = -174.0;
  double path_loss_exponent = 3.5;      // log-distance model
  double reference_loss_db = 40.0;      // at the 1 m reference distance

  void validate() const;
  bool operator==(const RadioParams&) const = default;
};

// Linear power gains |h|^2, users x servers, row-major.
struct ChannelMatrix {
  std::size_t n_users = 0;
  std::size_t n_servers = 0;
  std::vector<double> gains;

  double at(std::size_t user, std::size_t server) const {
    return gains[user * n_servers + server];
  }
  double& at(std::size_t user, std::size_t server) { return gains[user * n_servers + server]; }

  void validate() const;
  bool operator==(const ChannelMatrix&) const = default;
};

// Mean linear power gain of the log-distance model. Distances below the 1 m
// reference are clamped to 1 m; never throws.
double path_gain(double dist_m, const RadioParams& params) noexcept;

// Thermal noise power in watts over the given bandwidth.
double noise_power_w(double noise_psd_dbm_per_hz, double bandwidth_hz) noexcept;

// Rayleigh-faded channel draw: per-link path gain scaled by a unit-mean
// exponential (Rayleigh amplitude => exponential power). zero_fading replaces
// the fading factor with 1 for deterministic test setups.
ChannelMatrix draw_channel_matrix(const std::vector<Point2>& user_positions,
                                  const std::vector<Point2>& es_positions,
                                  const RadioParams& params, std::uint64_t seed,
                                  bool zero_fading = false);

// Equal share of the server bandwidth; the max(1, n) guard keeps the idle
// server well defined.
double allocate_bandwidth(double bandwidth_hz, std::size_t n_connected) noexcept;

// signal / (interference + noise); all inputs linear watts.
double sinr_linear(double signal_w, double interference_w, double noise_w) noexcept;

// Total received power at `server` from users committed to *other* servers.
// Users attached to `server` itself and local users contribute nothing, and
// the probing user is always excluded.
double interference_power_w(std::size_t user, std::size_t server, const Assignment& assignment,
                            const ChannelMatrix& channels, const RadioParams& params);

// Uplink SINR of `user` toward `server` under the committed assignment.
double sinr(std::size_t user, std::size_t server, const Assignment& assignment,
            const ChannelMatrix& channels, const RadioParams& params, double noise_w);

// Achievable uplink rate with the bandwidth share for n_connected users at
// the server. The caller decides whether n_connected counts the probing user
// as already joined (candidate evaluation) or not (realized evaluation).
double rate_bps(std::size_t user, std::size_t server, const Assignment& assignment,
                const ChannelMatrix& channels, const RadioParams& params,
                std::size_t n_connected);

// query_bits / rate; +infinity when the rate degenerates to zero, which
// disqualifies the link in the solvers.
double comm_delay_s(double query_bits, double rate_bps) noexcept;

}  // namespace offsim
