#pragma once

#include <cmath>
#include <vector>

#include "navrl/common.hpp"

namespace navrl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// Generalized advantage estimation with resets at episode starts.
//
// episode_start has length T or T+1: flag[t] marks that step t begins a new
// episode (no credit flows from t back to t-1). When a (T+1)-th flag is given
// it refers to the state after the last action; if set, the bootstrap value
// is dropped (the trailing episode ended exactly at the window edge).
inline GaeResult compute_gae(const std::vector<double>& rewards,
                             const std::vector<double>& values, double bootstrap_value,
                             const std::vector<uint8_t>& episode_start, double gamma,
                             double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n) throw ArgumentError("rewards/values length mismatch");
  if (episode_start.size() != n && episode_start.size() != n + 1)
    throw ArgumentError("episode_start must have length T or T+1");
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(rewards[i]) || !std::isfinite(values[i]))
      throw NumericError("non-finite input to compute_gae");
  if (!std::isfinite(bootstrap_value)) throw NumericError("non-finite bootstrap value");

  auto starts_at = [&](size_t t) -> bool {
    if (t < episode_start.size()) return episode_start[t] != 0;
    return false;  // T-length form: assume the trailing episode continues
  };

  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (size_t i = n; i-- > 0;) {
    const bool next_is_new = starts_at(i + 1);
    const double next_value = (i + 1 < n) ? values[i + 1] : bootstrap_value;
    const double mask = next_is_new ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * mask - values[i];
    running = delta + gamma * lambda * mask * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

}  // namespace navrl
