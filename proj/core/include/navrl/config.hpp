#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "navrl/common.hpp"

namespace navrl {

enum class Embodiment { kLoCoBot, kStretch };
enum class GoalMode { kCategory, kBBox, kBoth };
enum class CacheKind { kNoCache, kFeatureCache, kStateCache, kKVCache };

std::string to_string(Embodiment e);
std::string to_string(GoalMode m);
std::string to_string(CacheKind k);
Embodiment embodiment_from_string(const std::string& s);
GoalMode goal_mode_from_string(const std::string& s);
CacheKind cache_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Model architecture.
// ---------------------------------------------------------------------------

struct ModelConfig {
  int hidden_dim = 512;     // d
  int encoder_layers = 3;
  int encoder_heads = 8;
  int decoder_layers = 3;
  int decoder_heads = 8;
  int ffn_dim = 0;          // 0 -> 2 * hidden_dim
  int patch_size = 14;      // P
  int backbone_dim = 384;   // h, width of the frozen patch projection
  int obs_height = 56;
  int obs_width = 56;
  int object_classes = 8;
  int bbox_enc_dim = 64;    // sinusoid width inside the box encoder
  int cache_capacity = 600;
  GoalMode goal_mode = GoalMode::kCategory;
  Embodiment embodiment = Embodiment::kLoCoBot;
  uint64_t backbone_seed = 7;
  uint64_t init_seed = 1;

  int obs_channels() const { return object_classes + 2; }  // free + wall + classes
  int action_count() const { return embodiment == Embodiment::kLoCoBot ? 6 : 7; }
  int patches() const { return (obs_height / patch_size) * (obs_width / patch_size); }
  int ffn() const { return ffn_dim > 0 ? ffn_dim : 2 * hidden_dim; }
  bool use_category() const { return goal_mode != GoalMode::kBBox; }
  bool use_bbox() const { return goal_mode != GoalMode::kCategory; }
  // [visual tokens; g; g_b; STATE]
  int encoder_tokens() const {
    return patches() + (use_category() ? 1 : 0) + (use_bbox() ? 5 : 0) + 1;
  }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Procedural world.
// ---------------------------------------------------------------------------

struct SimConfig {
  float cell_m = 0.05f;        // collision/planning grid resolution
  int room_count_min = 2;
  int room_count_max = 3;
  float room_min_m = 2.6f;
  float room_max_m = 4.2f;
  float door_width_m = 1.0f;
  int object_classes = 8;
  int objects_per_class_min = 1;
  int objects_per_class_max = 2;
  float object_radius_min_m = 0.18f;
  float object_radius_max_m = 0.30f;
  float body_radius_m = 0.18f;
  float fov_deg = 90.0f;
  float vfov_deg = 90.0f;
  float camera_height_m = 0.8f;
  float wall_height_m = 2.0f;
  float max_range_m = 8.0f;

  void validate() const;
};

// Embodiment-dependent episode limits (Appendix-style profiles).
struct EpisodeProfile {
  int max_steps = 500;
  float success_distance_m = 1.0f;
  float move_magnitude_m = 0.2f;
  float rotate_deg = 30.0f;
  float rotate_small_deg = 6.0f;
  float pitch_deg = 30.0f;
};

EpisodeProfile episode_profile(Embodiment e);

// ---------------------------------------------------------------------------
// Training recipe.
// ---------------------------------------------------------------------------

struct TrainConfig {
  double discount_factor = 0.99;    // gamma
  double gae_lambda = 0.95;
  double ppo_clip = 0.1;
  double value_loss_weight = 0.5;
  double entropy_loss_weight = 0.01;
  int update_repeats = 4;
  int mini_batch_per_update = 1;
  double max_gradient_norm = 0.5;
  double learning_rate = 2e-4;      // constant
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int total_rollouts = 16;          // R, parallel rollout workers
  int steps_stage1 = 32;            // rollout length schedule T
  int steps_stage2 = 64;
  int steps_stage3 = 128;
  int64_t stage_threshold1 = 200000;
  int64_t stage_threshold2 = 400000;
  int64_t total_env_steps = 1000000;
  bool normalize_advantages = true;
  int learner_shards = 1;
  CacheKind rollout_cache = CacheKind::kKVCache;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Run management.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string run_dir;
  uint64_t seed = 1;
  int train_houses = 64;
  uint64_t eval_house_base = 1000000;  // held-out house seeds start here
  int eval_episodes = 200;
  int64_t eval_interval_steps = 100000;
  int checkpoint_interval_updates = 50;
  double target_eval_success = -1.0;   // >=0 enables early stop
  bool eval_greedy = true;
  int eval_threads = 0;                // 0 -> hardware
};

struct EngineConfig {
  ModelConfig model;
  SimConfig sim;
  TrainConfig train;
  RunConfig run;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Flat key-value text format. `#` starts a comment; keys mirror the training
// table names (learning_rate, update_repeats, ...). Unknown keys and bad
// values produce line-precise ConfigError messages.
// ---------------------------------------------------------------------------

struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct KvFile {
  std::string source;  // for diagnostics
  std::vector<KvEntry> entries;

  static KvFile parse_text(const std::string& text, const std::string& source_name);
  static KvFile parse_file(const std::string& path);
  const KvEntry* find(const std::string& key) const;
};

// Parses an engine config; `required` keys must be present.
EngineConfig parse_engine_config(const KvFile& kv);
EngineConfig parse_engine_config_file(const std::string& path);

// Canonical round-trippable dump (stored in run manifests and checkpoints).
std::string serialize_engine_config(const EngineConfig& cfg);

}  // namespace navrl
