#pragma once

#include "navrl/common.hpp"

namespace navrl {

// Reward shaping: step penalty + success bonus + distance-improvement term.
// The distance term pays only when the straight-line distance to the target
// drops below the best seen so far this episode; moving away is never
// penalized beyond the step penalty.
struct RewardState {
  double best_distance_m = 0.0;
  int step_count = 0;

  static RewardState at_start(double initial_distance_m) {
    RewardState s;
    s.best_distance_m = initial_distance_m;
    return s;
  }
};

constexpr double kStepPenalty = -0.01;
constexpr double kSuccessReward = 10.0;

struct ShapedReward {
  double reward = 0.0;
  RewardState next;
};

inline ShapedReward shape_reward(const RewardState& prev, double new_distance_m, bool success) {
  if (new_distance_m < 0.0) throw ArgumentError("distance must be non-negative");
  ShapedReward out;
  const double improvement = std::max(0.0, prev.best_distance_m - new_distance_m);
  out.reward = kStepPenalty + (success ? kSuccessReward : 0.0) + improvement;
  out.next.best_distance_m = std::min(prev.best_distance_m, new_distance_m);
  out.next.step_count = prev.step_count + 1;
  return out;
}

}  // namespace navrl
