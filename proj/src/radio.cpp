#include "offsim/radio.hpp"

#include <cmath>
#include <limits>

#include "offsim/rng.hpp"

namespace offsim {

void RadioParams::validate() const {
  if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be > 0");
  if (!(tx_power_w > 0.0)) throw ConfigError("tx_power_w must be > 0");
  if (!std::isfinite(noise_psd_dbm_per_hz)) throw ConfigError("noise_psd_dbm_per_hz must be finite");
  if (!(path_loss_exponent >= 2.0)) throw ConfigError("path_loss_exponent must be >= 2");
  if (!std::isfinite(reference_loss_db)) throw ConfigError("reference_loss_db must be finite");
}

void ChannelMatrix::validate() const {
  if (gains.size() != n_users * n_servers) {
    throw ConfigError("channel_gain size mismatch: expected " +
                      std::to_string(n_users * n_servers) + " entries, got " +
                      std::to_string(gains.size()));
  }
  for (double g : gains) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw ConfigError("channel_gain entries must be finite and >= 0");
    }
  }
}

double path_gain(double dist_m, const RadioParams& params) noexcept {
  const double d = dist_m > 1.0 ? dist_m : 1.0;
  const double loss_db = params.reference_loss_db + 10.0 * params.path_loss_exponent * std::log10(d);
  return std::pow(10.0, -loss_db / 10.0);
}

double noise_power_w(double noise_psd_dbm_per_hz, double bandwidth_hz) noexcept {
  return std::pow(10.0, (noise_psd_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz;
}

ChannelMatrix draw_channel_matrix(const std::vector<Point2>& user_positions,
                                  const std::vector<Point2>& es_positions,
                                  const RadioParams& params, std::uint64_t seed,
                                  bool zero_fading) {
  ChannelMatrix m;
  m.n_users = user_positions.size();
  m.n_servers = es_positions.size();
  m.gains.resize(m.n_users * m.n_servers);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.n_users; ++i) {
    for (std::size_t j = 0; j < m.n_servers; ++j) {
      const double mean_gain = path_gain(distance_m(user_positions[i], es_positions[j]), params);
      const double fading = zero_fading ? 1.0 : rng.exp_unit_mean();
      m.at(i, j) = mean_gain * fading;
    }
  }
  return m;
}

double allocate_bandwidth(double bandwidth_hz, std::size_t n_connected) noexcept {
  return bandwidth_hz / static_cast<double>(n_connected > 1 ? n_connected : 1);
}

double sinr_linear(double signal_w, double interference_w, double noise_w) noexcept {
  return signal_w / (interference_w + noise_w);
}

double interference_power_w(std::size_t user, std::size_t server, const Assignment& assignment,
                            const ChannelMatrix& channels, const RadioParams& params) {
  double sum = 0.0;
  for (std::size_t other = 0; other < assignment.n_users(); ++other) {
    if (other == user) continue;
    const int s = assignment.server_of[other];
    if (s == Assignment::kLocal || static_cast<std::size_t>(s) == server) continue;
    sum += params.tx_power_w * channels.at(other, server);
  }
  return sum;
}

double sinr(std::size_t user, std::size_t server, const Assignment& assignment,
            const ChannelMatrix& channels, const RadioParams& params, double noise_w) {
  const double signal = params.tx_power_w * channels.at(user, server);
  return sinr_linear(signal, interference_power_w(user, server, assignment, channels, params),
                     noise_w);
}

double rate_bps(std::size_t user, std::size_t server, const Assignment& assignment,
                const ChannelMatrix& channels, const RadioParams& params,
                std::size_t n_connected) {
  const double share_hz = allocate_bandwidth(params.bandwidth_hz, n_connected);
  const double noise_w = noise_power_w(params.noise_psd_dbm_per_hz, share_hz);
  const double s = sinr(user, server, assignment, channels, params, noise_w);
  return share_hz * std::log2(1.0 + s);
}

double comm_delay_s(double query_bits, double rate_bps) noexcept {
  if (!(rate_bps > 0.0)) return std::numeric_limits<double>::infinity();
  return query_bits / rate_bps;
}

}  // namespace offsim
