#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "offsim/types.hpp"

namespace offsim {

// One offloading decision per user: the serving edge server index, or kLocal.
// At most one server per user is structural in this encoding.
struct Assignment {
  static constexpr int kLocal = -1;

  std::vector<int> server_of;

  static Assignment all_local(std::size_t n_users) {
    return Assignment{std::vector<int>(n_users, kLocal)};
  }

  std::size_t n_users() const noexcept { return server_of.size(); }

  bool is_offloaded(std::size_t user) const { return server_of[user] != kLocal; }

  std::size_t offload_count() const noexcept {
    std::size_t n = 0;
    for (int s : server_of) n += (s != kLocal) ? 1 : 0;
    return n;
  }

  std::vector<std::size_t> connected_counts(std::size_t n_servers) const {
    std::vector<std::size_t> counts(n_servers, 0);
    for (int s : server_of) {
      if (s != kLocal) ++counts[static_cast<std::size_t>(s)];
    }
    return counts;
  }

  void validate(std::size_t n_users_expected, std::size_t n_servers) const {
    if (server_of.size() != n_users_expected) {
      throw ConfigError("assignment size mismatch: expected " + std::to_string(n_users_expected) +
                        ", got " + std::to_string(server_of.size()));
    }
    for (std::size_t i = 0; i < server_of.size(); ++i) {
      const int s = server_of[i];
      if (s != kLocal && (s < 0 || static_cast<std::size_t>(s) >= n_servers)) {
        throw ConfigError("assignment server index out of range for user " + std::to_string(i));
      }
    }
  }

  bool operator==(const Assignment&) const = default;
};

}  // namespace offsim
