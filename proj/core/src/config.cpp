#include "navrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace navrl {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::string to_string(Embodiment e) {
  return e == Embodiment::kLoCoBot ? "locobot" : "stretch";
}
std::string to_string(GoalMode m) {
  switch (m) {
    case GoalMode::kCategory: return "category";
    case GoalMode::kBBox: return "bbox";
    default: return "both";
  }
}
std::string to_string(CacheKind k) {
  switch (k) {
    case CacheKind::kNoCache: return "none";
    case CacheKind::kFeatureCache: return "feature";
    case CacheKind::kStateCache: return "state";
    default: return "kv";
  }
}

Embodiment embodiment_from_string(const std::string& s) {
  if (s == "locobot") return Embodiment::kLoCoBot;
  if (s == "stretch") return Embodiment::kStretch;
  throw ConfigError("unknown embodiment '" + s + "' (expected locobot|stretch)");
}
GoalMode goal_mode_from_string(const std::string& s) {
  if (s == "category") return GoalMode::kCategory;
  if (s == "bbox") return GoalMode::kBBox;
  if (s == "both") return GoalMode::kBoth;
  throw ConfigError("unknown goal mode '" + s + "' (expected category|bbox|both)");
}
CacheKind cache_kind_from_string(const std::string& s) {
  if (s == "none") return CacheKind::kNoCache;
  if (s == "feature") return CacheKind::kFeatureCache;
  if (s == "state") return CacheKind::kStateCache;
  if (s == "kv") return CacheKind::kKVCache;
  throw ConfigError("unknown cache strategy '" + s + "' (expected none|feature|state|kv)");
}

EpisodeProfile episode_profile(Embodiment e) {
  EpisodeProfile p;
  if (e == Embodiment::kLoCoBot) {
    p.max_steps = 500;
    p.success_distance_m = 1.0f;
  } else {
    p.max_steps = 600;
    p.success_distance_m = 2.0f;
  }
  return p;
}

void ModelConfig::validate() const {
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (encoder_heads <= 0 || hidden_dim % encoder_heads != 0)
    throw ConfigError("encoder_heads must divide hidden_dim");
  if (decoder_heads <= 0 || hidden_dim % decoder_heads != 0)
    throw ConfigError("decoder_heads must divide hidden_dim");
  if (encoder_layers < 0 || decoder_layers < 0) throw ConfigError("layer counts must be >= 0");
  if (patch_size <= 0) throw ConfigError("patch_size must be positive");
  if (obs_height % patch_size != 0 || obs_width % patch_size != 0)
    throw ConfigError("observation dims must be divisible by patch_size");
  if (backbone_dim <= 0) throw ConfigError("backbone_dim must be positive");
  if (object_classes <= 0) throw ConfigError("object_classes must be positive");
  if (bbox_enc_dim <= 0 || bbox_enc_dim % 2 != 0)
    throw ConfigError("bbox_enc_dim must be a positive even number");
  if (cache_capacity <= 0) throw ConfigError("cache_capacity must be positive");
}

void SimConfig::validate() const {
  if (cell_m <= 0.0f) throw ConfigError("cell_size must be positive");
  if (room_count_min < 1 || room_count_max > 8 || room_count_min > room_count_max)
    throw ConfigError("room count range must satisfy 1 <= min <= max <= 8");
  if (room_min_m < 1.0f || room_min_m > room_max_m)
    throw ConfigError("room size range invalid");
  if (object_classes <= 0) throw ConfigError("object_classes must be positive");
  if (body_radius_m <= 0.0f) throw ConfigError("body_radius must be positive");
  if (fov_deg <= 0.0f || fov_deg >= 180.0f) throw ConfigError("fov_deg must be in (0, 180)");
}

void TrainConfig::validate() const {
  if (!(discount_factor > 0.0 && discount_factor <= 1.0))
    throw ConfigError("discount_factor must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw ConfigError("gae_lambda must be in [0, 1]");
  if (!(ppo_clip > 0.0)) throw ConfigError("ppo_clip must be positive");
  if (update_repeats < 1) throw ConfigError("update_repeats must be >= 1");
  if (mini_batch_per_update != 1)
    throw ConfigError("mini_batch_per_update: only 1 is supported");
  if (max_gradient_norm <= 0.0) throw ConfigError("max_gradient_norm must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (total_rollouts < 1) throw ConfigError("total_rollouts must be >= 1");
  if (steps_stage1 < 1 || steps_stage2 < 1 || steps_stage3 < 1)
    throw ConfigError("stage rollout lengths must be >= 1");
  if (stage_threshold1 < 0 || stage_threshold2 < stage_threshold1)
    throw ConfigError("stage thresholds must be non-decreasing");
  if (total_env_steps < 1) throw ConfigError("total_env_steps must be >= 1");
  if (learner_shards < 1) throw ConfigError("learner_shards must be >= 1");
}

void EngineConfig::validate() const {
  model.validate();
  sim.validate();
  train.validate();
  if (model.object_classes != sim.object_classes)
    throw ConfigError("object_classes must match between model and sim sections");
  const EpisodeProfile p = episode_profile(model.embodiment);
  if (model.cache_capacity < p.max_steps)
    throw ConfigError("cache_capacity must cover the episode step limit (" +
                      std::to_string(p.max_steps) + ")");
  if (run.train_houses < 1) throw ConfigError("train_houses must be >= 1");
  if (run.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
}

KvFile KvFile::parse_text(const std::string& text, const std::string& source_name) {
  KvFile kv;
  kv.source = source_name;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    const size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos) fail(source_name, line, "expected 'key = value'");
    KvEntry e;
    e.key = trim(s.substr(0, eq));
    e.value = trim(s.substr(eq + 1));
    e.line = line;
    if (e.key.empty()) fail(source_name, line, "empty key");
    if (e.value.empty()) fail(source_name, line, "empty value for key '" + e.key + "'");
    kv.entries.push_back(e);
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

const KvEntry* KvFile::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

namespace {

// Binds config keys to struct fields with typed conversion and duplicate /
// unknown-key detection.
class Binder {
 public:
  explicit Binder(const KvFile& kv) : kv_(kv) {}

  void on_i64(const std::string& key, int64_t* out) {
    add(key, [out](const KvEntry& e) { *out = parse_int(e); });
  }
  void on_int(const std::string& key, int* out) {
    add(key, [out](const KvEntry& e) {
      const int64_t v = parse_int(e);
      *out = static_cast<int>(v);
    });
  }
  void on_u64(const std::string& key, uint64_t* out) {
    add(key, [out](const KvEntry& e) { *out = static_cast<uint64_t>(parse_int(e)); });
  }
  void on_double(const std::string& key, double* out) {
    add(key, [out](const KvEntry& e) { *out = parse_double(e); });
  }
  void on_float(const std::string& key, float* out) {
    add(key, [out](const KvEntry& e) { *out = static_cast<float>(parse_double(e)); });
  }
  void on_bool(const std::string& key, bool* out) {
    add(key, [out](const KvEntry& e) {
      if (e.value == "true" || e.value == "1") *out = true;
      else if (e.value == "false" || e.value == "0") *out = false;
      else throw ConfigError("invalid boolean for '" + e.key + "': " + e.value);
    });
  }
  void on_string(const std::string& key, std::string* out) {
    add(key, [out](const KvEntry& e) { *out = e.value; });
  }
  template <typename Fn>
  void on_custom(const std::string& key, Fn fn) {
    add(key, fn);
  }

  void apply() {
    for (const auto& e : kv_.entries) {
      auto it = setters_.find(e.key);
      if (it == setters_.end())
        fail(kv_.source, e.line, "unknown key '" + e.key + "'");
      if (seen_.count(e.key))
        fail(kv_.source, e.line, "duplicate key '" + e.key + "'");
      seen_.insert(e.key);
      try {
        it->second(e);
      } catch (const ConfigError& err) {
        fail(kv_.source, e.line, err.what());
      }
    }
  }

  void require(const std::string& key) const {
    if (!seen_.count(key))
      throw ConfigError(kv_.source + ": missing required key '" + key + "'");
  }

 private:
  static int64_t parse_int(const KvEntry& e) {
    try {
      size_t pos = 0;
      const int64_t v = std::stoll(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("invalid integer for '" + e.key + "': " + e.value);
    }
  }
  static double parse_double(const KvEntry& e) {
    try {
      size_t pos = 0;
      const double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("invalid number for '" + e.key + "': " + e.value);
    }
  }

  void add(const std::string& key, std::function<void(const KvEntry&)> fn) {
    setters_[key] = std::move(fn);
  }

  const KvFile& kv_;
  std::map<std::string, std::function<void(const KvEntry&)>> setters_;
  std::set<std::string> seen_;
};

}  // namespace

EngineConfig parse_engine_config(const KvFile& kv) {
  EngineConfig cfg;
  Binder b(kv);

  // model
  b.on_int("hidden_dim", &cfg.model.hidden_dim);
  b.on_int("encoder_layers", &cfg.model.encoder_layers);
  b.on_int("encoder_heads", &cfg.model.encoder_heads);
  b.on_int("decoder_layers", &cfg.model.decoder_layers);
  b.on_int("decoder_heads", &cfg.model.decoder_heads);
  b.on_int("ffn_dim", &cfg.model.ffn_dim);
  b.on_int("patch_size", &cfg.model.patch_size);
  b.on_int("backbone_dim", &cfg.model.backbone_dim);
  b.on_int("obs_height", &cfg.model.obs_height);
  b.on_int("obs_width", &cfg.model.obs_width);
  b.on_int("bbox_enc_dim", &cfg.model.bbox_enc_dim);
  b.on_int("cache_capacity", &cfg.model.cache_capacity);
  b.on_u64("backbone_seed", &cfg.model.backbone_seed);
  b.on_u64("init_seed", &cfg.model.init_seed);
  b.on_custom("goal_mode", [&cfg](const KvEntry& e) {
    cfg.model.goal_mode = goal_mode_from_string(e.value);
  });
  b.on_custom("embodiment", [&cfg](const KvEntry& e) {
    cfg.model.embodiment = embodiment_from_string(e.value);
  });
  b.on_custom("object_classes", [&cfg](const KvEntry& e) {
    const int v = std::stoi(e.value);
    cfg.model.object_classes = v;
    cfg.sim.object_classes = v;
  });

  // sim
  b.on_float("cell_size", &cfg.sim.cell_m);
  b.on_int("room_count_min", &cfg.sim.room_count_min);
  b.on_int("room_count_max", &cfg.sim.room_count_max);
  b.on_float("room_min_size", &cfg.sim.room_min_m);
  b.on_float("room_max_size", &cfg.sim.room_max_m);
  b.on_float("door_width", &cfg.sim.door_width_m);
  b.on_int("objects_per_class_min", &cfg.sim.objects_per_class_min);
  b.on_int("objects_per_class_max", &cfg.sim.objects_per_class_max);
  b.on_float("object_radius_min", &cfg.sim.object_radius_min_m);
  b.on_float("object_radius_max", &cfg.sim.object_radius_max_m);
  b.on_float("body_radius", &cfg.sim.body_radius_m);
  b.on_float("fov_deg", &cfg.sim.fov_deg);
  b.on_float("vfov_deg", &cfg.sim.vfov_deg);
  b.on_float("camera_height", &cfg.sim.camera_height_m);
  b.on_float("wall_height", &cfg.sim.wall_height_m);
  b.on_float("max_range", &cfg.sim.max_range_m);

  // training (Table-style names)
  b.on_double("discount_factor", &cfg.train.discount_factor);
  b.on_double("gae_lambda", &cfg.train.gae_lambda);
  b.on_double("ppo_clip", &cfg.train.ppo_clip);
  b.on_double("value_loss_weight", &cfg.train.value_loss_weight);
  b.on_double("entropy_loss_weight", &cfg.train.entropy_loss_weight);
  b.on_int("update_repeats", &cfg.train.update_repeats);
  b.on_int("mini_batch_per_update", &cfg.train.mini_batch_per_update);
  b.on_double("max_gradient_norm", &cfg.train.max_gradient_norm);
  b.on_double("learning_rate", &cfg.train.learning_rate);
  b.on_double("adam_beta1", &cfg.train.adam_beta1);
  b.on_double("adam_beta2", &cfg.train.adam_beta2);
  b.on_double("adam_eps", &cfg.train.adam_eps);
  b.on_int("total_rollouts", &cfg.train.total_rollouts);
  b.on_int("steps_stage1", &cfg.train.steps_stage1);
  b.on_int("steps_stage2", &cfg.train.steps_stage2);
  b.on_int("steps_stage3", &cfg.train.steps_stage3);
  b.on_i64("stage_threshold1", &cfg.train.stage_threshold1);
  b.on_i64("stage_threshold2", &cfg.train.stage_threshold2);
  b.on_i64("total_env_steps", &cfg.train.total_env_steps);
  b.on_bool("normalize_advantages", &cfg.train.normalize_advantages);
  b.on_int("learner_shards", &cfg.train.learner_shards);
  b.on_custom("rollout_cache", [&cfg](const KvEntry& e) {
    cfg.train.rollout_cache = cache_kind_from_string(e.value);
  });

  // run management
  b.on_string("run_dir", &cfg.run.run_dir);
  b.on_u64("seed", &cfg.run.seed);
  b.on_int("train_houses", &cfg.run.train_houses);
  b.on_u64("eval_house_base", &cfg.run.eval_house_base);
  b.on_int("eval_episodes", &cfg.run.eval_episodes);
  b.on_i64("eval_interval_steps", &cfg.run.eval_interval_steps);
  b.on_int("checkpoint_interval_updates", &cfg.run.checkpoint_interval_updates);
  b.on_double("target_eval_success", &cfg.run.target_eval_success);
  b.on_bool("eval_greedy", &cfg.run.eval_greedy);
  b.on_int("eval_threads", &cfg.run.eval_threads);

  b.apply();
  b.require("run_dir");
  b.require("total_env_steps");

  cfg.validate();
  return cfg;
}

EngineConfig parse_engine_config_file(const std::string& path) {
  return parse_engine_config(KvFile::parse_file(path));
}

std::string serialize_engine_config(const EngineConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "# model\n";
  out << "hidden_dim = " << cfg.model.hidden_dim << "\n";
  out << "encoder_layers = " << cfg.model.encoder_layers << "\n";
  out << "encoder_heads = " << cfg.model.encoder_heads << "\n";
  out << "decoder_layers = " << cfg.model.decoder_layers << "\n";
  out << "decoder_heads = " << cfg.model.decoder_heads << "\n";
  out << "ffn_dim = " << cfg.model.ffn_dim << "\n";
  out << "patch_size = " << cfg.model.patch_size << "\n";
  out << "backbone_dim = " << cfg.model.backbone_dim << "\n";
  out << "obs_height = " << cfg.model.obs_height << "\n";
  out << "obs_width = " << cfg.model.obs_width << "\n";
  out << "object_classes = " << cfg.model.object_classes << "\n";
  out << "bbox_enc_dim = " << cfg.model.bbox_enc_dim << "\n";
  out << "cache_capacity = " << cfg.model.cache_capacity << "\n";
  out << "goal_mode = " << to_string(cfg.model.goal_mode) << "\n";
  out << "embodiment = " << to_string(cfg.model.embodiment) << "\n";
  out << "backbone_seed = " << cfg.model.backbone_seed << "\n";
  out << "init_seed = " << cfg.model.init_seed << "\n";
  out << "# sim\n";
  out << "cell_size = " << cfg.sim.cell_m << "\n";
  out << "room_count_min = " << cfg.sim.room_count_min << "\n";
  out << "room_count_max = " << cfg.sim.room_count_max << "\n";
  out << "room_min_size = " << cfg.sim.room_min_m << "\n";
  out << "room_max_size = " << cfg.sim.room_max_m << "\n";
  out << "door_width = " << cfg.sim.door_width_m << "\n";
  out << "objects_per_class_min = " << cfg.sim.objects_per_class_min << "\n";
  out << "objects_per_class_max = " << cfg.sim.objects_per_class_max << "\n";
  out << "object_radius_min = " << cfg.sim.object_radius_min_m << "\n";
  out << "object_radius_max = " << cfg.sim.object_radius_max_m << "\n";
  out << "body_radius = " << cfg.sim.body_radius_m << "\n";
  out << "fov_deg = " << cfg.sim.fov_deg << "\n";
  out << "vfov_deg = " << cfg.sim.vfov_deg << "\n";
  out << "camera_height = " << cfg.sim.camera_height_m << "\n";
  out << "wall_height = " << cfg.sim.wall_height_m << "\n";
  out << "max_range = " << cfg.sim.max_range_m << "\n";
  out << "# training\n";
  out << "discount_factor = " << cfg.train.discount_factor << "\n";
  out << "gae_lambda = " << cfg.train.gae_lambda << "\n";
  out << "ppo_clip = " << cfg.train.ppo_clip << "\n";
  out << "value_loss_weight = " << cfg.train.value_loss_weight << "\n";
  out << "entropy_loss_weight = " << cfg.train.entropy_loss_weight << "\n";
  out << "update_repeats = " << cfg.train.update_repeats << "\n";
  out << "mini_batch_per_update = " << cfg.train.mini_batch_per_update << "\n";
  out << "max_gradient_norm = " << cfg.train.max_gradient_norm << "\n";
  out << "learning_rate = " << cfg.train.learning_rate << "\n";
  out << "adam_beta1 = " << cfg.train.adam_beta1 << "\n";
  out << "adam_beta2 = " << cfg.train.adam_beta2 << "\n";
  out << "adam_eps = " << cfg.train.adam_eps << "\n";
  out << "total_rollouts = " << cfg.train.total_rollouts << "\n";
  out << "steps_stage1 = " << cfg.train.steps_stage1 << "\n";
  out << "steps_stage2 = " << cfg.train.steps_stage2 << "\n";
  out << "steps_stage3 = " << cfg.train.steps_stage3 << "\n";
  out << "stage_threshold1 = " << cfg.train.stage_threshold1 << "\n";
  out << "stage_threshold2 = " << cfg.train.stage_threshold2 << "\n";
  out << "total_env_steps = " << cfg.train.total_env_steps << "\n";
  out << "normalize_advantages = " << (cfg.train.normalize_advantages ? "true" : "false") << "\n";
  out << "learner_shards = " << cfg.train.learner_shards << "\n";
  out << "rollout_cache = " << to_string(cfg.train.rollout_cache) << "\n";
  out << "# run\n";
  out << "run_dir = " << cfg.run.run_dir << "\n";
  out << "seed = " << cfg.run.seed << "\n";
  out << "train_houses = " << cfg.run.train_houses << "\n";
  out << "eval_house_base = " << cfg.run.eval_house_base << "\n";
  out << "eval_episodes = " << cfg.run.eval_episodes << "\n";
  out << "eval_interval_steps = " << cfg.run.eval_interval_steps << "\n";
  out << "checkpoint_interval_updates = " << cfg.run.checkpoint_interval_updates << "\n";
  out << "target_eval_success = " << cfg.run.target_eval_success << "\n";
  out << "eval_greedy = " << (cfg.run.eval_greedy ? "true" : "false") << "\n";
  out << "eval_threads = " << cfg.run.eval_threads << "\n";
  return out.str();
}

}  // namespace navrl
