#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "navrl/config.hpp"
#include "navrl/policy.hpp"

namespace navrl {

// ---------------------------------------------------------------------------
// The four rollout-time cache strategies behind one stepping interface.
// Observable outputs are identical; only the recompute scope differs:
//
//   none     stores raw frames, reruns backbone + goal + state encoder +
//            full decoder over the whole episode every step
//   feature  stores (v, g, g_b), reruns state encoder + full decoder
//   state    stores s, reruns only the full decoder
//   kv       stores per-layer K/V, runs everything once per step
// ---------------------------------------------------------------------------

template <typename T>
class PolicyStepper {
 public:
  PolicyStepper(const PolicyModel<T>& model, CacheKind kind, CallCounters* counters = nullptr)
      : model_(model), kind_(kind), counters_(counters) {
    const auto& cfg = model.config();
    if (kind_ == CacheKind::kKVCache) kv_ = model.make_cache();
    if (kind_ == CacheKind::kStateCache)
      s_store_ = Mat<T>::Zero(cfg.cache_capacity, cfg.hidden_dim);
  }

  CacheKind kind() const { return kind_; }
  int t() const { return t_; }
  const Mat<T>& last_visual() const { return last_r_; }
  const RowVec<T>& last_state() const { return last_s_; }

  void reset_episode() {
    t_ = 0;
    obs_store_.clear();
    goal_store_.clear();
    v_store_.clear();
    g_store_.clear();
    gb_store_.clear();
    kv_.reset();
  }

  PolicyOutputT<T> step(const Observation& obs, const GoalSpec& goal) {
    return run(obs, goal, /*commit=*/true);
  }

  // Computes the output for (obs, goal) at the current position without
  // advancing any store; used for value bootstraps at rollout window edges.
  PolicyOutputT<T> peek(const Observation& obs, const GoalSpec& goal) {
    return run(obs, goal, /*commit=*/false);
  }

 private:
  PolicyOutputT<T> run(const Observation& obs, const GoalSpec& goal, bool commit) {
    const auto& cfg = model_.config();
    if (t_ >= cfg.cache_capacity)
      throw RolloverError("cache strategy store exceeded capacity " +
                          std::to_string(cfg.cache_capacity));
    RowVec<T> belief;
    switch (kind_) {
      case CacheKind::kNoCache: {
        // rerun the feedforward across all modules for the whole history
        Mat<T> states(t_ + 1, cfg.hidden_dim);
        for (int j = 0; j < t_; ++j) {
          Mat<T> rj;
          states.row(j) =
              model_.state_from_obs(obs_store_[static_cast<size_t>(j)],
                                    goal_store_[static_cast<size_t>(j)], counters_, &rj);
        }
        states.row(t_) = model_.state_from_obs(obs, goal, counters_, &last_r_);
        last_s_ = states.row(t_);
        belief = decode_all(states);
        if (commit) {
          obs_store_.push_back(obs);
          goal_store_.push_back(goal);
        }
        break;
      }
      case CacheKind::kFeatureCache: {
        last_r_ = model_.patchify_encode(obs, counters_);
        Mat<T> v = model_.project_visual(last_r_);
        std::optional<Mat<T>> g, gb;
        if (cfg.use_category()) {
          if (!goal.category.has_value()) throw ConfigError("goal mode requires a category");
          g = model_.encode_goal_category(*goal.category);
        }
        if (cfg.use_bbox()) gb = model_.encode_goal_bbox(goal.bbox);
        Mat<T> states(t_ + 1, cfg.hidden_dim);
        for (int j = 0; j < t_; ++j)
          states.row(j) = model_.state_encode(
              v_store_[static_cast<size_t>(j)],
              cfg.use_category() ? &g_store_[static_cast<size_t>(j)] : nullptr,
              cfg.use_bbox() ? &gb_store_[static_cast<size_t>(j)] : nullptr, counters_);
        states.row(t_) =
            model_.state_encode(v, g ? &*g : nullptr, gb ? &*gb : nullptr, counters_);
        last_s_ = states.row(t_);
        belief = decode_all(states);
        if (commit) {
          v_store_.push_back(std::move(v));
          if (g) g_store_.push_back(std::move(*g));
          if (gb) gb_store_.push_back(std::move(*gb));
        }
        break;
      }
      case CacheKind::kStateCache: {
        RowVec<T> s = model_.state_from_obs(obs, goal, counters_, &last_r_);
        last_s_ = s;
        Mat<T> states(t_ + 1, cfg.hidden_dim);
        if (t_ > 0) states.topRows(t_) = s_store_.topRows(t_);
        states.row(t_) = s;
        belief = decode_all(states);
        if (commit) s_store_.row(t_) = s;
        break;
      }
      case CacheKind::kKVCache: {
        RowVec<T> s = model_.state_from_obs(obs, goal, counters_, &last_r_);
        last_s_ = s;
        belief = model_.decode_step(s, kv_, counters_, commit);
        break;
      }
    }
    if (commit) ++t_;
    return model_.actor_critic(belief);
  }

  RowVec<T> decode_all(const Mat<T>& states) {
    std::vector<int> pos(static_cast<size_t>(states.rows()));
    for (int i = 0; i < static_cast<int>(pos.size()); ++i) pos[static_cast<size_t>(i)] = i;
    Mat<T> beliefs = model_.decode_full(states, pos, counters_);
    return beliefs.row(beliefs.rows() - 1);
  }

  const PolicyModel<T>& model_;
  CacheKind kind_;
  CallCounters* counters_;
  int t_ = 0;

  std::vector<Observation> obs_store_;
  std::vector<GoalSpec> goal_store_;
  std::vector<Mat<T>> v_store_, g_store_, gb_store_;
  Mat<T> s_store_;
  DecoderCache<T> kv_;
  Mat<T> last_r_;
  RowVec<T> last_s_;
};

// ---------------------------------------------------------------------------
// Profiling: identical input streams, per-step wall times and exact call
// counters. Wall-clock claims stay ordering-only; the counters carry the
// complexity assertions.
// ---------------------------------------------------------------------------

struct CostReport {
  std::string strategy;
  int steps = 0;
  double median_step_ms = 0.0;
  double total_ms = 0.0;
  int64_t backbone_calls = 0;
  int64_t encoder_calls = 0;
  int64_t decoder_score_ops = 0;
  std::vector<double> step_ms;  // medians over trials, per step index
};

inline void write_cost_csv_header(std::ostream& out) {
  out << "strategy,T,median_step_ms,total_ms,backbone_calls,encoder_calls,decoder_score_ops\n";
}
inline void write_cost_csv_row(std::ostream& out, const CostReport& r) {
  out << r.strategy << ',' << r.steps << ',' << r.median_step_ms << ',' << r.total_ms << ','
      << r.backbone_calls << ',' << r.encoder_calls << ',' << r.decoder_score_ops << "\n";
}

struct EpisodeStream {
  std::vector<Observation> observations;
  std::vector<GoalSpec> goals;
};

// Deterministic synthetic episode for profiling and equivalence checks.
inline EpisodeStream make_episode_stream(const ModelConfig& cfg, int steps, uint64_t seed) {
  EpisodeStream st;
  Rng rng(seed);
  for (int t = 0; t < steps; ++t) {
    Observation o = Observation::zeros(cfg.obs_height, cfg.obs_width, cfg.obs_channels());
    for (int y = 0; y < o.height; ++y)
      for (int x = 0; x < o.width; ++x) {
        const int c = static_cast<int>(rng.below(static_cast<uint64_t>(o.channels + 1)));
        if (c < o.channels) o.at(y, x, c) = 1.0f;
      }
    GoalSpec g;
    if (cfg.use_category())
      g.category = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.object_classes)));
    if (cfg.use_bbox() && rng.uniform() < 0.7) {
      const float x1 = static_cast<float>(rng.uniform() * 0.5);
      const float y1 = static_cast<float>(rng.uniform() * 0.5);
      const float x2 = x1 + static_cast<float>(rng.uniform() * 0.5);
      const float y2 = y1 + static_cast<float>(rng.uniform() * 0.5);
      g.bbox = BBox{x1, y1, x2, y2, (x2 - x1) * (y2 - y1)};
    }
    st.observations.push_back(std::move(o));
    st.goals.push_back(g);
  }
  return st;
}

template <typename T>
CostReport profile_strategy(const PolicyModel<T>& model, CacheKind kind,
                            const EpisodeStream& stream, int trials) {
  const int steps = static_cast<int>(stream.observations.size());
  if (steps < 16) throw ArgumentError("profile_strategy requires T >= 16");
  if (trials < 3) throw ArgumentError("profile_strategy requires trials >= 3");

  CostReport rep;
  rep.strategy = to_string(kind);
  rep.steps = steps;

  std::vector<std::vector<double>> per_step(static_cast<size_t>(trials));
  std::vector<double> totals(static_cast<size_t>(trials));
  CallCounters counters;
  for (int trial = 0; trial < trials; ++trial) {
    counters.reset();
    PolicyStepper<T> stepper(model, kind, &counters);
    auto& times = per_step[static_cast<size_t>(trial)];
    times.resize(static_cast<size_t>(steps));
    const auto t0 = std::chrono::steady_clock::now();
    for (int t = 0; t < steps; ++t) {
      const auto a = std::chrono::steady_clock::now();
      stepper.step(stream.observations[static_cast<size_t>(t)],
                   stream.goals[static_cast<size_t>(t)]);
      const auto b = std::chrono::steady_clock::now();
      times[static_cast<size_t>(t)] = std::chrono::duration<double, std::milli>(b - a).count();
    }
    const auto t1 = std::chrono::steady_clock::now();
    totals[static_cast<size_t>(trial)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  // counters are identical across trials; keep the last
  rep.backbone_calls = counters.backbone_calls;
  rep.encoder_calls = counters.encoder_calls;
  rep.decoder_score_ops = counters.decoder_score_ops;

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  rep.total_ms = median(totals);
  rep.step_ms.resize(static_cast<size_t>(steps));
  std::vector<double> all_steps;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> col(static_cast<size_t>(trials));
    for (int trial = 0; trial < trials; ++trial)
      col[static_cast<size_t>(trial)] = per_step[static_cast<size_t>(trial)][static_cast<size_t>(t)];
    rep.step_ms[static_cast<size_t>(t)] = median(col);
    all_steps.push_back(rep.step_ms[static_cast<size_t>(t)]);
  }
  rep.median_step_ms = median(all_steps);
  return rep;
}

inline const std::vector<CacheKind>& all_cache_kinds() {
  static const std::vector<CacheKind> kinds = {CacheKind::kNoCache, CacheKind::kFeatureCache,
                                               CacheKind::kStateCache, CacheKind::kKVCache};
  return kinds;
}

}  // namespace navrl
