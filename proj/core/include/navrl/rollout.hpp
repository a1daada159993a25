#pragma once

#include <memory>
#include <vector>

#include "navrl/config.hpp"
#include "navrl/policy.hpp"
#include "navrl/sim/world.hpp"
#include "navrl/temporal_cache.hpp"

namespace navrl {

// On-policy storage for one update: R worker rows x T steps. Frame
// f = row * steps + t. episode_start has steps+1 flags per row; the final
// flag marks a boundary right at the window edge (drops the bootstrap).
struct RolloutBuffer {
  int rows = 0;
  int steps = 0;
  int patches = 0;
  int backbone_dim = 0;
  MatF visual;  // (rows*steps*patches) x backbone_dim
  std::vector<int> goal_category;
  std::vector<std::optional<BBox>> goal_bbox;
  std::vector<int> actions;
  std::vector<double> behavior_logprob;
  std::vector<double> value_pred;
  std::vector<double> rewards;
  std::vector<uint8_t> episode_start;  // rows * (steps+1)
  std::vector<int> positions;          // within-episode index per frame
  std::vector<double> bootstrap_value; // per row; masked by the edge flag

  // window statistics for logging
  int64_t episodes_finished = 0;
  int64_t successes = 0;
  double reward_sum = 0.0;

  int frames() const { return rows * steps; }
  uint8_t start_flag(int r, int t) const {
    return episode_start[static_cast<size_t>(r) * (steps + 1) + t];
  }
};

// Shared immutable pool of training houses (generated up front).
class HousePool {
 public:
  HousePool(const SimConfig& sim, uint64_t seed_base, int count);
  const std::shared_ptr<const House>& get(size_t index) const {
    return houses_[index % houses_.size()];
  }
  size_t size() const { return houses_.size(); }

 private:
  std::vector<std::shared_ptr<const House>> houses_;
};

// R parallel rollout workers, each owning one environment, one cache
// strategy instance and private RNG streams. Policy weights are read-only
// for the duration of a collect.
class RolloutCollector {
 public:
  RolloutCollector(const EngineConfig& cfg, const PolicyModel<float>& model);

  // Collects exactly rows*steps frames; episodes continue across windows and
  // auto-reset on success/failure/timeout.
  RolloutBuffer collect(int steps);

  // Abandons any open episodes (used at checkpoint boundaries so a resumed
  // run reproduces the continuation exactly).
  void reset_episodes();

  std::vector<std::pair<uint64_t, uint64_t>> rng_states() const;
  void set_rng_states(const std::vector<std::pair<uint64_t, uint64_t>>& states);

 private:
  struct Worker {
    std::unique_ptr<NavEnv> env;
    std::unique_ptr<PolicyStepper<float>> stepper;
    Rng env_rng;
    Rng action_rng;
    bool episode_open = false;
  };

  struct WorkerStats {
    int64_t episodes = 0;
    int64_t successes = 0;
    double reward_sum = 0.0;
  };
  void worker_collect(int w, int steps, RolloutBuffer& out, WorkerStats& stats);

  const EngineConfig& cfg_;
  const PolicyModel<float>& model_;
  RasterSpec spec_;
  HousePool pool_;
  std::vector<Worker> workers_;
};

// Categorical sample over logits; returns (action, logprob of that action).
std::pair<int, double> sample_action(const RowVec<float>& logits, Rng& rng, bool greedy);
double logprob_of(const RowVec<float>& logits, int action);

}  // namespace navrl
