#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navrl/config.hpp"
#include "navrl/nn.hpp"
#include "navrl/types.hpp"

namespace navrl {

// Per-trajectory decoder cache: per-layer keys (post-rotation) and values.
// reset() drops occupancy without releasing storage.
template <typename T>
struct DecoderCache {
  std::vector<Mat<T>> keys;
  std::vector<Mat<T>> values;
  int occupancy = 0;
  int capacity = 0;

  void init(int layers, int cap, int dim) {
    capacity = cap;
    occupancy = 0;
    keys.assign(static_cast<size_t>(layers), Mat<T>::Zero(cap, dim));
    values.assign(static_cast<size_t>(layers), Mat<T>::Zero(cap, dim));
  }
  void reset() { occupancy = 0; }
};

// The policy network: frozen patch backbone -> visual projection -> goal
// encoders -> transformer state encoder (STATE token readout) -> causal
// transformer decoder (pre-norm, RMS norm, gated MLP, rotary positions on the
// within-episode step index) -> linear actor & critic heads.
//
// Forward passes are pure given (weights, cache) and may run concurrently on
// shared read-only weights; a DecoderCache belongs to exactly one trajectory.
template <typename T>
class PolicyModel {
 public:
  explicit PolicyModel(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    build();
  }

  const ModelConfig& config() const { return cfg; }
  ParamRegistry<T>& params() { return registry; }
  const ParamRegistry<T>& params() const { return registry; }

  // --- frozen visual backbone -------------------------------------------
  // Patchifies the raster and applies a seed-fixed random linear map per
  // patch. Not a Parameter: gradients cannot reach it.
  Mat<T> patchify_encode(const Observation& obs, CallCounters* counters = nullptr) const {
    if (obs.height != cfg.obs_height || obs.width != cfg.obs_width ||
        obs.channels != cfg.obs_channels())
      throw ConfigError("observation dims do not match model config");
    if (counters) ++counters->backbone_calls;
    const int p = cfg.patch_size;
    const int py_n = obs.height / p;
    const int px_n = obs.width / p;
    const int patch_dim = p * p * obs.channels;
    Mat<T> r(py_n * px_n, cfg.backbone_dim);
    RowVec<T> flat(patch_dim);
    for (int py = 0; py < py_n; ++py) {
      for (int px = 0; px < px_n; ++px) {
        int k = 0;
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            for (int c = 0; c < obs.channels; ++c)
              flat[k++] = static_cast<T>(obs.at(py * p + dy, px * p + dx, c));
        r.row(py * px_n + px) = flat * patch_w.transpose() + patch_b;
      }
    }
    return r;
  }

  // --- trainable encoders -------------------------------------------------
  Mat<T> project_visual(const Mat<T>& r) const {
    if (r.cols() != cfg.backbone_dim)
      throw ConfigError("visual representation width does not match backbone_dim");
    const RowVec<T> b = proj_b.value.row(0);
    return linear(r, proj_w.value, &b);
  }

  Mat<T> encode_goal_category(int class_id) const {
    if (class_id < 0 || class_id >= cfg.object_classes)
      throw ArgumentError("goal category id out of range: " + std::to_string(class_id));
    Mat<T> row = goal_table.value.row(class_id);
    const RowVec<T> b = goal_proj_b.value.row(0);
    return linear(row, goal_proj_w.value, &b);
  }

  // Sinusoidal scalar encoding used for each of the 5 box values; value 0
  // maps to (sin 0, cos 0, ...) = (0, 1, 0, 1, ...).
  static RowVec<T> sinusoid_encode(T value, int enc_dim, double scale = kBoxValueScale) {
    RowVec<T> out(enc_dim);
    for (int i = 0; i * 2 + 1 < enc_dim; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / enc_dim);
      const double angle = static_cast<double>(value) * scale * freq;
      out[2 * i] = static_cast<T>(std::sin(angle));
      out[2 * i + 1] = static_cast<T>(std::cos(angle));
    }
    return out;
  }

  Mat<T> encode_goal_bbox(const std::optional<BBox>& box) const {
    if (!box.has_value()) return box_sentinel.value;  // learned no-detection rows
    const BBox& b = *box;
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > 1 || b.y2 > 1 || b.x1 > b.x2 || b.y1 > b.y2)
      throw ArgumentError("bbox coordinates must be normalized with x1<=x2, y1<=y2");
    const T vals[5] = {static_cast<T>(b.x1), static_cast<T>(b.y1), static_cast<T>(b.x2),
                       static_cast<T>(b.y2), static_cast<T>(b.area)};
    Mat<T> enc(5, cfg.bbox_enc_dim);
    for (int i = 0; i < 5; ++i)
      enc.row(i) = sinusoid_encode(vals[i], cfg.bbox_enc_dim) + box_type_emb.value.row(i);
    // two-layer MLP to model width
    const RowVec<T> b1 = box_mlp_b1.value.row(0);
    Mat<T> hst = linear(enc, box_mlp_w1.value, &b1);
    for (Eigen::Index i = 0; i < hst.size(); ++i) hst.data()[i] = silu(hst.data()[i]);
    const RowVec<T> b2 = box_mlp_b2.value.row(0);
    return linear(hst, box_mlp_w2.value, &b2);
  }

  // --- transformer state encoder ------------------------------------------
  // Non-causal attention over [v; g; g_b; STATE] with no positional encoding;
  // returns the output at the STATE position.
  RowVec<T> state_encode(const Mat<T>& v, const Mat<T>* g, const Mat<T>* gb,
                         CallCounters* counters = nullptr) const {
    if (cfg.use_category() && g == nullptr)
      throw ConfigError("goal mode requires a category embedding");
    if (cfg.use_bbox() && gb == nullptr)
      throw ConfigError("goal mode requires a bbox embedding");
    if (counters) ++counters->encoder_calls;
    const int n = static_cast<int>(v.rows()) + (cfg.use_category() ? 1 : 0) +
                  (cfg.use_bbox() ? 5 : 0) + 1;
    Mat<T> x(n, cfg.hidden_dim);
    int row = 0;
    x.topRows(v.rows()) = v;
    row += static_cast<int>(v.rows());
    if (cfg.use_category()) x.row(row++) = g->row(0);
    if (cfg.use_bbox()) {
      x.middleRows(row, 5) = *gb;
      row += 5;
    }
    x.row(row) = state_token.value.row(0);
    for (const auto& blk : enc_blocks) encoder_block_forward(x, blk, cfg.encoder_heads);
    return x.row(row);
  }

  // --- causal decoder -------------------------------------------------------
  DecoderCache<T> make_cache() const {
    DecoderCache<T> c;
    c.init(cfg.decoder_layers, cfg.cache_capacity, cfg.hidden_dim);
    return c;
  }

  // One incremental step at position cache.occupancy. With commit=false the
  // belief is computed but the cache is left untouched (used for value
  // bootstraps at rollout boundaries).
  RowVec<T> decode_step(const RowVec<T>& s, DecoderCache<T>& cache,
                        CallCounters* counters = nullptr, bool commit = true) const {
    const int t = cache.occupancy;
    if (t >= cache.capacity)
      throw RolloverError("decoder cache capacity exceeded (capacity " +
                          std::to_string(cache.capacity) + ")");
    if (counters) {
      ++counters->decoder_calls;
      counters->decoder_score_ops += static_cast<int64_t>(cfg.decoder_layers) * (t + 1);
    }
    const int heads = cfg.decoder_heads;
    const int hd = cfg.hidden_dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    RowVec<T> x = s;
    std::vector<T> probs(static_cast<size_t>(t) + 1);
    for (int l = 0; l < cfg.decoder_layers; ++l) {
      const auto& blk = dec_blocks[static_cast<size_t>(l)];
      Mat<T> xn = rms_norm(Mat<T>(x), blk.attn_norm_gain.value.row(0));
      RowVec<T> q = xn.row(0) * blk.wq.value.transpose();
      RowVec<T> k = xn.row(0) * blk.wk.value.transpose();
      RowVec<T> v = xn.row(0) * blk.wv.value.transpose();
      rope_apply_row<T>(q, heads, rope, t);
      rope_apply_row<T>(k, heads, rope, t);
      RowVec<T> mixed(cfg.hidden_dim);
      const Mat<T>& keys = cache.keys[static_cast<size_t>(l)];
      const Mat<T>& vals = cache.values[static_cast<size_t>(l)];
      for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        for (int j = 0; j < t; ++j)
          probs[static_cast<size_t>(j)] =
              scale * keys.row(j).segment(off, hd).dot(q.segment(off, hd));
        probs[static_cast<size_t>(t)] =
            scale * k.segment(off, hd).dot(q.segment(off, hd));
        softmax_inplace(probs.data(), t + 1);
        RowVec<T> acc = RowVec<T>::Zero(hd);
        for (int j = 0; j < t; ++j)
          acc += probs[static_cast<size_t>(j)] * vals.row(j).segment(off, hd);
        acc += probs[static_cast<size_t>(t)] * v.segment(off, hd);
        mixed.segment(off, hd) = acc;
      }
      x += mixed * blk.wo.value.transpose();
      Mat<T> xm = rms_norm(Mat<T>(x), blk.mlp_norm_gain.value.row(0));
      x += gated_mlp(xm, blk).row(0);
      if (commit) {
        cache.keys[static_cast<size_t>(l)].row(t) = k;
        cache.values[static_cast<size_t>(l)].row(t) = v;
      }
    }
    if (commit) ++cache.occupancy;
    Mat<T> out = rms_norm(Mat<T>(x), final_norm_gain.value.row(0));
    return out.row(0);
  }

  // Full causal forward over a feature sequence; positions carry the
  // within-episode step index per row. Equivalent to stepping decode_step
  // over the sequence.
  Mat<T> decode_full(const Mat<T>& states, const std::vector<int>& positions,
                     CallCounters* counters = nullptr) const {
    const int n = static_cast<int>(states.rows());
    if (static_cast<int>(positions.size()) != n)
      throw ArgumentError("positions length must match state count");
    if (counters) {
      ++counters->decoder_calls;
      int64_t pairs = 0;
      for (int i = 0; i < n; ++i) pairs += i + 1;
      counters->decoder_score_ops += static_cast<int64_t>(cfg.decoder_layers) * pairs;
    }
    const int heads = cfg.decoder_heads;
    const int hd = cfg.hidden_dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    Mat<T> x = states;
    std::vector<T> probs(static_cast<size_t>(n));
    for (const auto& blk : dec_blocks) {
      Mat<T> xn = rms_norm(x, blk.attn_norm_gain.value.row(0));
      Mat<T> q = xn * blk.wq.value.transpose();
      Mat<T> k = xn * blk.wk.value.transpose();
      Mat<T> v = xn * blk.wv.value.transpose();
      for (int i = 0; i < n; ++i) {
        rope_apply_row<T>(q.row(i), heads, rope, positions[static_cast<size_t>(i)]);
        rope_apply_row<T>(k.row(i), heads, rope, positions[static_cast<size_t>(i)]);
      }
      Mat<T> mixed(n, cfg.hidden_dim);
      for (int i = 0; i < n; ++i) {
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = 0; j <= i; ++j)
            probs[static_cast<size_t>(j)] =
                scale * k.row(j).segment(off, hd).dot(q.row(i).segment(off, hd));
          softmax_inplace(probs.data(), i + 1);
          RowVec<T> acc = RowVec<T>::Zero(hd);
          for (int j = 0; j <= i; ++j)
            acc += probs[static_cast<size_t>(j)] * v.row(j).segment(off, hd);
          mixed.row(i).segment(off, hd) = acc;
        }
      }
      x += mixed * blk.wo.value.transpose();
      Mat<T> xm = rms_norm(x, blk.mlp_norm_gain.value.row(0));
      x += gated_mlp(xm, blk);
    }
    return rms_norm(x, final_norm_gain.value.row(0));
  }

  // --- heads ---------------------------------------------------------------
  PolicyOutputT<T> actor_critic(const RowVec<T>& belief) const {
    PolicyOutputT<T> out;
    out.logits = belief * actor_w.value.transpose() + actor_b.value.row(0);
    out.value = belief.dot(critic_w.value.row(0)) + critic_b.value(0, 0);
    return out;
  }

  // Convenience: observation + goal -> state feature.
  RowVec<T> state_from_obs(const Observation& obs, const GoalSpec& goal,
                           CallCounters* counters = nullptr, Mat<T>* r_out = nullptr) const {
    Mat<T> r = patchify_encode(obs, counters);
    if (r_out) *r_out = r;
    return state_from_visual(r, goal, counters);
  }

  RowVec<T> state_from_visual(const Mat<T>& r, const GoalSpec& goal,
                              CallCounters* counters = nullptr) const {
    Mat<T> v = project_visual(r);
    std::optional<Mat<T>> g, gb;
    if (cfg.use_category()) {
      if (!goal.category.has_value()) throw ConfigError("goal mode requires a category");
      g = encode_goal_category(*goal.category);
    }
    if (cfg.use_bbox()) gb = encode_goal_bbox(goal.bbox);
    return state_encode(v, g ? &*g : nullptr, gb ? &*gb : nullptr, counters);
  }

  // Encoder block used at inference; bidirectional attention, acts in place.
  void encoder_block_forward(Mat<T>& x, const BlockParams<T>& blk, int heads) const {
    const int n = static_cast<int>(x.rows());
    const int hd = cfg.hidden_dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    Mat<T> xn = rms_norm(x, blk.attn_norm_gain.value.row(0));
    Mat<T> q = xn * blk.wq.value.transpose();
    Mat<T> k = xn * blk.wk.value.transpose();
    Mat<T> v = xn * blk.wv.value.transpose();
    Mat<T> mixed(n, cfg.hidden_dim);
    std::vector<T> probs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        for (int j = 0; j < n; ++j)
          probs[static_cast<size_t>(j)] =
              scale * k.row(j).segment(off, hd).dot(q.row(i).segment(off, hd));
        softmax_inplace(probs.data(), n);
        RowVec<T> acc = RowVec<T>::Zero(hd);
        for (int j = 0; j < n; ++j)
          acc += probs[static_cast<size_t>(j)] * v.row(j).segment(off, hd);
        mixed.row(i).segment(off, hd) = acc;
      }
    }
    x += mixed * blk.wo.value.transpose();
    Mat<T> xm = rms_norm(x, blk.mlp_norm_gain.value.row(0));
    x += gated_mlp(xm, blk);
  }

  static constexpr double kBoxValueScale = 64.0;

  // --- storage (trainer and checkpoint code walk these directly) -----------
  ModelConfig cfg;

  Mat<T> patch_w;   // frozen: backbone_dim x (P*P*C)
  RowVec<T> patch_b;

  Parameter<T> proj_w, proj_b;
  Parameter<T> goal_table, goal_proj_w, goal_proj_b;
  Parameter<T> box_type_emb, box_mlp_w1, box_mlp_b1, box_mlp_w2, box_mlp_b2, box_sentinel;
  Parameter<T> state_token;
  std::vector<BlockParams<T>> enc_blocks, dec_blocks;
  Parameter<T> final_norm_gain;
  Parameter<T> actor_w, actor_b, critic_w, critic_b;
  RopeTable<T> rope;
  ParamRegistry<T> registry;

 private:
  void build() {
    const int d = cfg.hidden_dim;
    const int ffn = cfg.ffn();
    Rng rng(cfg.init_seed);
    const double std_emb = 0.02;
    const double std_res = 0.02 / std::sqrt(2.0 * std::max(1, cfg.decoder_layers));

    proj_w.init_normal(d, cfg.backbone_dim, rng, std_emb);
    proj_b.init_zero(1, d);
    goal_table.init_normal(cfg.object_classes, d, rng, std_emb);
    goal_proj_w.init_normal(d, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    goal_proj_b.init_zero(1, d);
    box_type_emb.init_normal(5, cfg.bbox_enc_dim, rng, 0.1);
    box_mlp_w1.init_normal(d, cfg.bbox_enc_dim, rng, 1.0 / std::sqrt(cfg.bbox_enc_dim * 1.0));
    box_mlp_b1.init_zero(1, d);
    box_mlp_w2.init_normal(d, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    box_mlp_b2.init_zero(1, d);
    box_sentinel.init_normal(5, d, rng, std_emb);
    state_token.init_normal(1, d, rng, std_emb);

    enc_blocks.resize(static_cast<size_t>(cfg.encoder_layers));
    for (auto& b : enc_blocks) {
      b.init(d, ffn, rng, std_emb);
      b.wo.init_normal(d, d, rng, std_res);
      b.w_down.init_normal(d, ffn, rng, std_res);
    }
    dec_blocks.resize(static_cast<size_t>(cfg.decoder_layers));
    for (auto& b : dec_blocks) {
      b.init(d, ffn, rng, std_emb);
      b.wo.init_normal(d, d, rng, std_res);
      b.w_down.init_normal(d, ffn, rng, std_res);
    }
    final_norm_gain.init_constant(1, d, T(1));
    actor_w.init_normal(cfg.action_count(), d, rng, 0.01);
    actor_b.init_zero(1, cfg.action_count());
    critic_w.init_normal(1, d, rng, 0.01);
    critic_b.init_zero(1, 1);

    // frozen backbone from its own seed
    const int patch_dim = cfg.patch_size * cfg.patch_size * cfg.obs_channels();
    Rng brng(cfg.backbone_seed);
    patch_w.resize(cfg.backbone_dim, patch_dim);
    const double bstd = 1.0 / std::sqrt(static_cast<double>(patch_dim));
    for (Eigen::Index i = 0; i < patch_w.rows(); ++i)
      for (Eigen::Index j = 0; j < patch_w.cols(); ++j)
        patch_w(i, j) = static_cast<T>(brng.normal() * bstd);
    patch_b.resize(cfg.backbone_dim);
    for (Eigen::Index j = 0; j < patch_b.size(); ++j)
      patch_b[j] = static_cast<T>(brng.normal() * 0.02);

    rope.build(cfg.cache_capacity, cfg.hidden_dim / cfg.decoder_heads);

    register_params();
  }

  void register_params() {
    registry.add(&proj_w, "proj.w");
    registry.add(&proj_b, "proj.b");
    registry.add(&goal_table, "goal.table");
    registry.add(&goal_proj_w, "goal.proj_w");
    registry.add(&goal_proj_b, "goal.proj_b");
    registry.add(&box_type_emb, "box.type_emb");
    registry.add(&box_mlp_w1, "box.mlp_w1");
    registry.add(&box_mlp_b1, "box.mlp_b1");
    registry.add(&box_mlp_w2, "box.mlp_w2");
    registry.add(&box_mlp_b2, "box.mlp_b2");
    registry.add(&box_sentinel, "box.sentinel");
    registry.add(&state_token, "state_token");
    for (size_t i = 0; i < enc_blocks.size(); ++i)
      enc_blocks[i].register_into(registry, "enc." + std::to_string(i));
    for (size_t i = 0; i < dec_blocks.size(); ++i)
      dec_blocks[i].register_into(registry, "dec." + std::to_string(i));
    registry.add(&final_norm_gain, "final_norm");
    registry.add(&actor_w, "actor.w");
    registry.add(&actor_b, "actor.b");
    registry.add(&critic_w, "critic.w");
    registry.add(&critic_b, "critic.b");
  }
};

using PolicyModelF = PolicyModel<float>;
using PolicyModelD = PolicyModel<double>;

}  // namespace navrl
