#pragma once

#include <optional>
#include <vector>

#include "navrl/policy.hpp"

namespace navrl {

// ---------------------------------------------------------------------------
// Episodic attention mask over an R x T rollout window (block lower
// triangular): position (r, i) may attend to (r, j) iff j <= i and both steps
// belong to the same episode. Positions carry the within-episode step index
// used for rotary embedding; windows that open mid-episode continue the true
// episode-local index recorded at rollout time.
// ---------------------------------------------------------------------------

struct EpisodicMask {
  int rows = 0;
  int steps = 0;
  std::vector<uint8_t> episode_start;  // rows*steps
  std::vector<int> positions;          // rows*steps, within-episode index
  std::vector<int> ep_begin;           // rows*steps, window-local episode begin

  static EpisodicMask from_flags(int rows, int steps, std::vector<uint8_t> flags,
                                 std::vector<int> pos = {}) {
    if (static_cast<int>(flags.size()) != rows * steps)
      throw ArgumentError("episode flags must have rows*steps entries");
    EpisodicMask m;
    m.rows = rows;
    m.steps = steps;
    m.episode_start = std::move(flags);
    m.ep_begin.resize(static_cast<size_t>(rows) * steps);
    for (int r = 0; r < rows; ++r) {
      int begin = 0;
      for (int t = 0; t < steps; ++t) {
        if (m.episode_start[static_cast<size_t>(r) * steps + t]) begin = t;
        m.ep_begin[static_cast<size_t>(r) * steps + t] = begin;
      }
    }
    if (pos.empty()) {
      m.positions.resize(static_cast<size_t>(rows) * steps);
      for (int r = 0; r < rows; ++r)
        for (int t = 0; t < steps; ++t)
          m.positions[static_cast<size_t>(r) * steps + t] =
              t - m.ep_begin[static_cast<size_t>(r) * steps + t];
    } else {
      if (static_cast<int>(pos.size()) != rows * steps)
        throw ArgumentError("positions must have rows*steps entries");
      m.positions = std::move(pos);
      for (int r = 0; r < rows; ++r)
        for (int t = 0; t < steps; ++t) {
          const size_t i = static_cast<size_t>(r) * steps + t;
          if (m.episode_start[i] && m.positions[i] != 0)
            throw ArgumentError("episode-start step must have position 0");
          if (t > 0 && !m.episode_start[i] && m.positions[i] != m.positions[i - 1] + 1)
            throw ArgumentError("positions must increase by 1 within an episode");
        }
    }
    return m;
  }

  int begin(int r, int t) const { return ep_begin[static_cast<size_t>(r) * steps + t]; }
  int position(int r, int t) const { return positions[static_cast<size_t>(r) * steps + t]; }
  bool allows(int r, int i, int j) const { return j <= i && j >= begin(r, i); }
};

// ---------------------------------------------------------------------------
// Batched training input. Frame f = row * steps + t; the visual tensor holds
// the frozen backbone output for every frame, stacked patch-wise.
// ---------------------------------------------------------------------------

template <typename T>
struct TrainBatchInput {
  int rows = 0;
  int steps = 0;
  Mat<T> visual;  // (rows*steps*patches) x backbone_dim
  std::vector<int> goal_category;              // per frame, -1 when unused
  std::vector<std::optional<BBox>> goal_bbox;  // per frame
  EpisodicMask mask;

  int frames() const { return rows * steps; }
};

// ---------------------------------------------------------------------------
// Decoder-only batched forward (the training-batch op): runs the causal
// decoder over R x T state features under the episodic mask and returns all
// beliefs. Masked-out pairs are never evaluated, so beliefs in one episode
// are bit-for-bit independent of features in any other.
// ---------------------------------------------------------------------------

template <typename T>
Mat<T> forward_training_batch(const PolicyModel<T>& model, const Mat<T>& features,
                              const EpisodicMask& mask) {
  const int n = mask.rows * mask.steps;
  if (static_cast<int>(features.rows()) != n)
    throw ArgumentError("feature count must equal rows*steps");
  const auto& cfg = model.config();
  const int heads = cfg.decoder_heads;
  const int hd = cfg.hidden_dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Mat<T> x = features;
  std::vector<T> probs(static_cast<size_t>(mask.steps));
  for (const auto& blk : model.dec_blocks) {
    Mat<T> xn = rms_norm(x, blk.attn_norm_gain.value.row(0));
    Mat<T> q = xn * blk.wq.value.transpose();
    Mat<T> k = xn * blk.wk.value.transpose();
    Mat<T> v = xn * blk.wv.value.transpose();
    for (int r = 0; r < mask.rows; ++r)
      for (int t = 0; t < mask.steps; ++t) {
        const int f = r * mask.steps + t;
        rope_apply_row<T>(q.row(f), heads, model.rope, mask.position(r, t));
        rope_apply_row<T>(k.row(f), heads, model.rope, mask.position(r, t));
      }
    Mat<T> mixed(n, cfg.hidden_dim);
    for (int r = 0; r < mask.rows; ++r) {
      for (int i = 0; i < mask.steps; ++i) {
        const int fi = r * mask.steps + i;
        const int jb = mask.begin(r, i);
        const int cnt = i - jb + 1;
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = jb; j <= i; ++j)
            probs[static_cast<size_t>(j - jb)] =
                scale *
                k.row(r * mask.steps + j).segment(off, hd).dot(q.row(fi).segment(off, hd));
          softmax_inplace(probs.data(), cnt);
          RowVec<T> acc = RowVec<T>::Zero(hd);
          for (int j = jb; j <= i; ++j)
            acc += probs[static_cast<size_t>(j - jb)] *
                   v.row(r * mask.steps + j).segment(off, hd);
          mixed.row(fi).segment(off, hd) = acc;
        }
      }
    }
    x += mixed * blk.wo.value.transpose();
    Mat<T> xm = rms_norm(x, blk.mlp_norm_gain.value.row(0));
    x += gated_mlp(xm, blk);
  }
  return rms_norm(x, model.final_norm_gain.value.row(0));
}

// ---------------------------------------------------------------------------
// Full differentiable pipeline for PPO updates:
//   visual -> projection -> goal encoders -> state encoder -> masked decoder
//   -> actor/critic heads,
// with hand-written backward. Work splits over learner shards (contiguous
// rollout-row ranges); per-shard gradient buffers reduce in shard order, so a
// fixed shard count reproduces results bit-for-bit.
// ---------------------------------------------------------------------------

template <typename T>
class TrainGraph {
 public:
  TrainGraph(PolicyModel<T>& model, int shards)
      : model_(model), shards_(std::max(1, shards)) {}

  void forward(const TrainBatchInput<T>& batch);
  void backward(const Mat<T>& dlogits, const RowVec<T>& dvalues);

  const Mat<T>& logits() const { return logits_; }
  const RowVec<T>& values() const { return values_; }
  const Mat<T>& beliefs() const { return beliefs_; }

 private:
  struct BlockStash {
    Mat<T> x_in;  // residual stream entering the block
    Mat<T> inv1;  // n x 1, attention-norm 1/rms
    Mat<T> q, k, v;
    Mat<T> mixed;
    Mat<T> x_mid;  // residual after attention
    Mat<T> inv2;
    Mat<T> gate_pre, up;

    void alloc(Eigen::Index n, int d, int ffn) {
      x_in.resize(n, d);
      inv1.resize(n, 1);
      q.resize(n, d);
      k.resize(n, d);
      v.resize(n, d);
      mixed.resize(n, d);
      x_mid.resize(n, d);
      inv2.resize(n, 1);
      gate_pre.resize(n, ffn);
      up.resize(n, ffn);
    }
  };

  // Block-local rms norm writing 1/rms per row.
  template <typename G>
  static Mat<T> norm_rows(const Mat<T>& x, const Eigen::MatrixBase<G>& gain_expr,
                          Eigen::Ref<Mat<T>> inv_out) {
    const RowVec<T> gain = gain_expr;
    Mat<T> y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const T ms = x.row(i).squaredNorm() / static_cast<T>(x.cols());
      const T inv = T(1) / std::sqrt(ms + static_cast<T>(kRmsEps));
      inv_out(i, 0) = inv;
      y.row(i) = x.row(i).cwiseProduct(gain) * inv;
    }
    return y;
  }

  // Recomputes the normalized activations from the stashed 1/rms.
  template <typename G>
  static Mat<T> norm_rows_from_inv(const Mat<T>& x, const Eigen::MatrixBase<G>& gain_expr,
                                   const Eigen::Ref<const Mat<T>>& inv) {
    const RowVec<T> gain = gain_expr;
    Mat<T> y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      y.row(i) = x.row(i).cwiseProduct(gain) * inv(i, 0);
    return y;
  }

  template <typename G>
  static void norm_rows_backward(const Mat<T>& x, const Eigen::MatrixBase<G>& gain_expr,
                                 const Eigen::Ref<const Mat<T>>& inv, const Mat<T>& dy,
                                 Mat<T>& dgain_acc, Mat<T>& dx_acc) {
    const RowVec<T> gain = gain_expr;
    const T n = static_cast<T>(x.cols());
    RowVec<T> dgain = RowVec<T>::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const T iv = inv(i, 0);
      dgain += dy.row(i).cwiseProduct(x.row(i)) * iv;
      const RowVec<T> dyg = dy.row(i).cwiseProduct(gain);
      const T dot = dyg.cwiseProduct(x.row(i)).sum();
      dx_acc.row(i) += dyg * iv - x.row(i) * (dot * iv * iv * iv / n);
    }
    dgain_acc.row(0) += dgain;
  }

  void encoder_forward_rows(int rb, int re);
  void decoder_forward_rows(int rb, int re);
  void encoder_backward_rows(int shard, int rb, int re);
  void decoder_backward_rows(int shard, int rb, int re, const Mat<T>& dlogits,
                             const RowVec<T>& dvalues);

  Mat<T>& grad_of(int shard, const Parameter<T>& p) {
    const auto& params = model_.params().all();
    for (size_t i = 0; i < params.size(); ++i)
      if (params[i] == &p) return shard_grads_[static_cast<size_t>(shard)][i];
    throw ArgumentError("parameter not registered: " + p.name);
  }

  PolicyModel<T>& model_;
  int shards_;
  const TrainBatchInput<T>* batch_ = nullptr;
  int row_shards_ = 1;

  int ell_ = 0, n_tok_ = 0, state_row_ = 0;
  int cat_row_ = -1, box_row_ = -1;

  Mat<T> v_tokens_;          // (frames*ell) x d
  Mat<T> goal_table_rows_;   // frames x d
  Mat<T> goal_g_;            // frames x d
  Mat<T> box_enc_, box_hidden_, box_gb_;
  Mat<T> enc_x0_;            // (frames*n_tok) x d
  std::vector<BlockStash> enc_stash_;
  Mat<T> state_features_;    // frames x d

  std::vector<BlockStash> dec_stash_;
  Mat<T> dec_out_;           // frames x d, before final norm
  Mat<T> final_inv_;
  Mat<T> beliefs_;
  Mat<T> logits_;
  RowVec<T> values_;

  Mat<T> d_state_features_;
  std::vector<std::vector<Mat<T>>> shard_grads_;
};

template <typename T>
void TrainGraph<T>::forward(const TrainBatchInput<T>& batch) {
  batch_ = &batch;
  const auto& cfg = model_.config();
  const int frames = batch.frames();
  ell_ = cfg.patches();
  n_tok_ = cfg.encoder_tokens();
  row_shards_ = std::max(1, std::min(shards_, batch.rows));

  if (batch.visual.rows() != static_cast<Eigen::Index>(frames) * ell_)
    throw ArgumentError("visual tensor rows must equal frames*patches");
  if (batch.mask.rows != batch.rows || batch.mask.steps != batch.steps)
    throw ArgumentError("mask shape must match the batch");

  int row = ell_;
  cat_row_ = cfg.use_category() ? row++ : -1;
  box_row_ = cfg.use_bbox() ? row : -1;
  if (cfg.use_bbox()) row += 5;
  state_row_ = row;

  const int d = cfg.hidden_dim;
  const RowVec<T> proj_b = model_.proj_b.value.row(0);
  v_tokens_ = linear(batch.visual, model_.proj_w.value, &proj_b);

  if (cfg.use_category()) {
    goal_table_rows_.resize(frames, d);
    for (int f = 0; f < frames; ++f) {
      const int id = batch.goal_category[static_cast<size_t>(f)];
      if (id < 0 || id >= cfg.object_classes)
        throw ArgumentError("goal category id out of range in batch");
      goal_table_rows_.row(f) = model_.goal_table.value.row(id);
    }
    const RowVec<T> gb = model_.goal_proj_b.value.row(0);
    goal_g_ = linear(goal_table_rows_, model_.goal_proj_w.value, &gb);
  }

  if (cfg.use_bbox()) {
    box_enc_.resize(static_cast<Eigen::Index>(frames) * 5, cfg.bbox_enc_dim);
    for (int f = 0; f < frames; ++f) {
      const auto& ob = batch.goal_bbox[static_cast<size_t>(f)];
      if (ob.has_value()) {
        const T vals[5] = {static_cast<T>(ob->x1), static_cast<T>(ob->y1),
                           static_cast<T>(ob->x2), static_cast<T>(ob->y2),
                           static_cast<T>(ob->area)};
        for (int i = 0; i < 5; ++i)
          box_enc_.row(f * 5 + i) =
              PolicyModel<T>::sinusoid_encode(vals[i], cfg.bbox_enc_dim) +
              model_.box_type_emb.value.row(i);
      } else {
        box_enc_.middleRows(static_cast<Eigen::Index>(f) * 5, 5).setZero();
      }
    }
    const RowVec<T> b1 = model_.box_mlp_b1.value.row(0);
    box_hidden_ = linear(box_enc_, model_.box_mlp_w1.value, &b1);
    Mat<T> act(box_hidden_.rows(), box_hidden_.cols());
    for (Eigen::Index i = 0; i < act.size(); ++i) act.data()[i] = silu(box_hidden_.data()[i]);
    const RowVec<T> b2 = model_.box_mlp_b2.value.row(0);
    box_gb_ = linear(act, model_.box_mlp_w2.value, &b2);
    for (int f = 0; f < frames; ++f)
      if (!batch.goal_bbox[static_cast<size_t>(f)].has_value())
        box_gb_.middleRows(static_cast<Eigen::Index>(f) * 5, 5) = model_.box_sentinel.value;
  }

  enc_x0_.resize(static_cast<Eigen::Index>(frames) * n_tok_, d);
  for (int f = 0; f < frames; ++f) {
    const Eigen::Index base = static_cast<Eigen::Index>(f) * n_tok_;
    enc_x0_.middleRows(base, ell_) =
        v_tokens_.middleRows(static_cast<Eigen::Index>(f) * ell_, ell_);
    if (cat_row_ >= 0) enc_x0_.row(base + cat_row_) = goal_g_.row(f);
    if (box_row_ >= 0)
      enc_x0_.middleRows(base + box_row_, 5) =
          box_gb_.middleRows(static_cast<Eigen::Index>(f) * 5, 5);
    enc_x0_.row(base + state_row_) = model_.state_token.value.row(0);
  }

  const Eigen::Index enc_rows = enc_x0_.rows();
  enc_stash_.assign(static_cast<size_t>(cfg.encoder_layers), BlockStash{});
  for (auto& st : enc_stash_) st.alloc(enc_rows, d, cfg.ffn());
  state_features_.resize(frames, d);

  dec_stash_.assign(static_cast<size_t>(cfg.decoder_layers), BlockStash{});
  for (auto& st : dec_stash_) st.alloc(frames, d, cfg.ffn());
  dec_out_.resize(frames, d);
  final_inv_.resize(frames, 1);
  beliefs_.resize(frames, d);
  logits_.resize(frames, cfg.action_count());
  values_.resize(frames);

  run_sharded(batch.rows, row_shards_, [&](int, int rb, int re) {
    encoder_forward_rows(rb, re);
    decoder_forward_rows(rb, re);
  });
}

template <typename T>
void TrainGraph<T>::encoder_forward_rows(int rb, int re) {
  const auto& cfg = model_.config();
  const int d = cfg.hidden_dim;
  const int heads = cfg.encoder_heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const int fb = rb * batch_->steps;
  const int fe = re * batch_->steps;
  const Eigen::Index tb = static_cast<Eigen::Index>(fb) * n_tok_;
  const Eigen::Index tn = static_cast<Eigen::Index>(fe - fb) * n_tok_;

  Mat<T> x = enc_x0_.middleRows(tb, tn);
  std::vector<T> probs(static_cast<size_t>(n_tok_));
  for (size_t l = 0; l < enc_stash_.size(); ++l) {
    auto& st = enc_stash_[l];
    const auto& blk = model_.enc_blocks[l];
    st.x_in.middleRows(tb, tn) = x;
    Mat<T> xn = norm_rows(x, blk.attn_norm_gain.value.row(0), st.inv1.middleRows(tb, tn));
    Mat<T> q = xn * blk.wq.value.transpose();
    Mat<T> k = xn * blk.wk.value.transpose();
    Mat<T> v = xn * blk.wv.value.transpose();
    Mat<T> mixed(tn, d);
    for (int f = 0; f < fe - fb; ++f) {
      const Eigen::Index base = static_cast<Eigen::Index>(f) * n_tok_;
      for (int i = 0; i < n_tok_; ++i) {
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = 0; j < n_tok_; ++j)
            probs[static_cast<size_t>(j)] =
                scale * k.row(base + j).segment(off, hd).dot(q.row(base + i).segment(off, hd));
          softmax_inplace(probs.data(), n_tok_);
          RowVec<T> acc = RowVec<T>::Zero(hd);
          for (int j = 0; j < n_tok_; ++j)
            acc += probs[static_cast<size_t>(j)] * v.row(base + j).segment(off, hd);
          mixed.row(base + i).segment(off, hd) = acc;
        }
      }
    }
    st.q.middleRows(tb, tn) = q;
    st.k.middleRows(tb, tn) = k;
    st.v.middleRows(tb, tn) = v;
    st.mixed.middleRows(tb, tn) = mixed;
    x += mixed * blk.wo.value.transpose();
    st.x_mid.middleRows(tb, tn) = x;
    Mat<T> xm = norm_rows(x, blk.mlp_norm_gain.value.row(0), st.inv2.middleRows(tb, tn));
    Mat<T> gate_pre = xm * blk.w_gate.value.transpose();
    Mat<T> up = xm * blk.w_up.value.transpose();
    st.gate_pre.middleRows(tb, tn) = gate_pre;
    st.up.middleRows(tb, tn) = up;
    Mat<T> act(gate_pre.rows(), gate_pre.cols());
    for (Eigen::Index i = 0; i < act.size(); ++i)
      act.data()[i] = silu(gate_pre.data()[i]) * up.data()[i];
    x += act * blk.w_down.value.transpose();
  }
  for (int f = fb; f < fe; ++f)
    state_features_.row(f) = x.row(static_cast<Eigen::Index>(f - fb) * n_tok_ + state_row_);
}

template <typename T>
void TrainGraph<T>::decoder_forward_rows(int rb, int re) {
  const auto& cfg = model_.config();
  const int d = cfg.hidden_dim;
  const int heads = cfg.decoder_heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const int steps = batch_->steps;
  const EpisodicMask& mask = batch_->mask;
  const int fb = rb * steps;
  const int fn = (re - rb) * steps;

  Mat<T> x = state_features_.middleRows(fb, fn);
  std::vector<T> probs(static_cast<size_t>(steps));
  for (size_t l = 0; l < dec_stash_.size(); ++l) {
    auto& st = dec_stash_[l];
    const auto& blk = model_.dec_blocks[l];
    st.x_in.middleRows(fb, fn) = x;
    Mat<T> xn = norm_rows(x, blk.attn_norm_gain.value.row(0), st.inv1.middleRows(fb, fn));
    Mat<T> q = xn * blk.wq.value.transpose();
    Mat<T> k = xn * blk.wk.value.transpose();
    Mat<T> v = xn * blk.wv.value.transpose();
    for (int r = rb; r < re; ++r)
      for (int t = 0; t < steps; ++t) {
        const int local = (r - rb) * steps + t;
        rope_apply_row<T>(q.row(local), heads, model_.rope, mask.position(r, t));
        rope_apply_row<T>(k.row(local), heads, model_.rope, mask.position(r, t));
      }
    Mat<T> mixed(fn, d);
    for (int r = rb; r < re; ++r) {
      for (int i = 0; i < steps; ++i) {
        const int li = (r - rb) * steps + i;
        const int jb = mask.begin(r, i);
        const int cnt = i - jb + 1;
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = jb; j <= i; ++j)
            probs[static_cast<size_t>(j - jb)] =
                scale * k.row((r - rb) * steps + j)
                            .segment(off, hd)
                            .dot(q.row(li).segment(off, hd));
          softmax_inplace(probs.data(), cnt);
          RowVec<T> acc = RowVec<T>::Zero(hd);
          for (int j = jb; j <= i; ++j)
            acc += probs[static_cast<size_t>(j - jb)] *
                   v.row((r - rb) * steps + j).segment(off, hd);
          mixed.row(li).segment(off, hd) = acc;
        }
      }
    }
    st.q.middleRows(fb, fn) = q;
    st.k.middleRows(fb, fn) = k;
    st.v.middleRows(fb, fn) = v;
    st.mixed.middleRows(fb, fn) = mixed;
    x += mixed * blk.wo.value.transpose();
    st.x_mid.middleRows(fb, fn) = x;
    Mat<T> xm = norm_rows(x, blk.mlp_norm_gain.value.row(0), st.inv2.middleRows(fb, fn));
    Mat<T> gate_pre = xm * blk.w_gate.value.transpose();
    Mat<T> up = xm * blk.w_up.value.transpose();
    st.gate_pre.middleRows(fb, fn) = gate_pre;
    st.up.middleRows(fb, fn) = up;
    Mat<T> act(gate_pre.rows(), gate_pre.cols());
    for (Eigen::Index i = 0; i < act.size(); ++i)
      act.data()[i] = silu(gate_pre.data()[i]) * up.data()[i];
    x += act * blk.w_down.value.transpose();
  }
  dec_out_.middleRows(fb, fn) = x;
  beliefs_.middleRows(fb, fn) =
      norm_rows(x, model_.final_norm_gain.value.row(0), final_inv_.middleRows(fb, fn));
  const RowVec<T> ab = model_.actor_b.value.row(0);
  logits_.middleRows(fb, fn) =
      linear(Mat<T>(beliefs_.middleRows(fb, fn)), model_.actor_w.value, &ab);
  for (int f = fb; f < fb + fn; ++f)
    values_[f] = beliefs_.row(f).dot(model_.critic_w.value.row(0)) + model_.critic_b.value(0, 0);
}

template <typename T>
void TrainGraph<T>::backward(const Mat<T>& dlogits, const RowVec<T>& dvalues) {
  if (!batch_) throw ArgumentError("backward called before forward");
  const auto& params = model_.params().all();
  shard_grads_.assign(static_cast<size_t>(row_shards_), {});
  for (auto& sg : shard_grads_) {
    sg.reserve(params.size());
    for (const auto* p : params) sg.emplace_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
  }
  d_state_features_ = Mat<T>::Zero(batch_->frames(), model_.config().hidden_dim);

  run_sharded(batch_->rows, row_shards_, [&](int s, int rb, int re) {
    decoder_backward_rows(s, rb, re, dlogits, dvalues);
    encoder_backward_rows(s, rb, re);
  });

  for (size_t i = 0; i < params.size(); ++i)
    for (int s = 0; s < row_shards_; ++s) params[i]->grad += shard_grads_[static_cast<size_t>(s)][i];
  shard_grads_.clear();
}

template <typename T>
void TrainGraph<T>::decoder_backward_rows(int s, int rb, int re, const Mat<T>& dlogits,
                                          const RowVec<T>& dvalues) {
  const auto& cfg = model_.config();
  const int d = cfg.hidden_dim;
  const int heads = cfg.decoder_heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const int steps = batch_->steps;
  const EpisodicMask& mask = batch_->mask;
  const int fb = rb * steps;
  const int fn = (re - rb) * steps;

  const Mat<T> dlog = dlogits.middleRows(fb, fn);
  const Mat<T> beliefs = beliefs_.middleRows(fb, fn);

  // heads
  grad_of(s, model_.actor_w).noalias() += dlog.transpose() * beliefs;
  grad_of(s, model_.actor_b).row(0) += dlog.colwise().sum();
  Mat<T> dB = dlog * model_.actor_w.value;
  for (int f = 0; f < fn; ++f) {
    const T dv = dvalues[fb + f];
    grad_of(s, model_.critic_w).row(0) += dv * beliefs.row(f);
    grad_of(s, model_.critic_b)(0, 0) += dv;
    dB.row(f) += dv * model_.critic_w.value.row(0);
  }

  // final norm
  Mat<T> dX = Mat<T>::Zero(fn, d);
  norm_rows_backward(Mat<T>(dec_out_.middleRows(fb, fn)),
                     model_.final_norm_gain.value.row(0), final_inv_.middleRows(fb, fn), dB,
                     grad_of(s, model_.final_norm_gain), dX);

  std::vector<T> probs(static_cast<size_t>(steps));
  std::vector<T> dprobs(static_cast<size_t>(steps));
  for (int l = static_cast<int>(dec_stash_.size()) - 1; l >= 0; --l) {
    const auto& st = dec_stash_[static_cast<size_t>(l)];
    const auto& blk = model_.dec_blocks[static_cast<size_t>(l)];

    // MLP: x_out = x_mid + (silu(gate).*up) w_down^T
    const Mat<T> gate_pre = st.gate_pre.middleRows(fb, fn);
    const Mat<T> up = st.up.middleRows(fb, fn);
    Mat<T> act(fn, cfg.ffn());
    for (Eigen::Index i = 0; i < act.size(); ++i)
      act.data()[i] = silu(gate_pre.data()[i]) * up.data()[i];
    grad_of(s, blk.w_down).noalias() += dX.transpose() * act;
    Mat<T> dact = dX * blk.w_down.value;
    Mat<T> dgate(fn, cfg.ffn()), dup(fn, cfg.ffn());
    for (Eigen::Index i = 0; i < dact.size(); ++i) {
      const T g = gate_pre.data()[i];
      dgate.data()[i] = dact.data()[i] * up.data()[i] * silu_grad(g);
      dup.data()[i] = dact.data()[i] * silu(g);
    }
    const Mat<T> x_mid = st.x_mid.middleRows(fb, fn);
    Mat<T> xm = norm_rows_from_inv(x_mid, blk.mlp_norm_gain.value.row(0),
                                   st.inv2.middleRows(fb, fn));
    grad_of(s, blk.w_gate).noalias() += dgate.transpose() * xm;
    grad_of(s, blk.w_up).noalias() += dup.transpose() * xm;
    Mat<T> dxm = dgate * blk.w_gate.value + dup * blk.w_up.value;
    norm_rows_backward(x_mid, blk.mlp_norm_gain.value.row(0), st.inv2.middleRows(fb, fn),
                       dxm, grad_of(s, blk.mlp_norm_gain), dX);

    // attention: x_mid = x_in + mixed wo^T
    grad_of(s, blk.wo).noalias() += dX.transpose() * st.mixed.middleRows(fb, fn);
    Mat<T> dmixed = dX * blk.wo.value;
    const Mat<T> q = st.q.middleRows(fb, fn);
    const Mat<T> k = st.k.middleRows(fb, fn);
    const Mat<T> v = st.v.middleRows(fb, fn);
    Mat<T> dq = Mat<T>::Zero(fn, d), dk = Mat<T>::Zero(fn, d), dv = Mat<T>::Zero(fn, d);
    for (int r = rb; r < re; ++r) {
      for (int i = 0; i < steps; ++i) {
        const int li = (r - rb) * steps + i;
        const int jb = mask.begin(r, i);
        const int cnt = i - jb + 1;
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = jb; j <= i; ++j)
            probs[static_cast<size_t>(j - jb)] =
                scale *
                k.row((r - rb) * steps + j).segment(off, hd).dot(q.row(li).segment(off, hd));
          softmax_inplace(probs.data(), cnt);
          const auto dacc = dmixed.row(li).segment(off, hd);
          T pdsum = T(0);
          for (int j = 0; j < cnt; ++j) {
            dprobs[static_cast<size_t>(j)] =
                dacc.dot(v.row((r - rb) * steps + jb + j).segment(off, hd));
            pdsum += probs[static_cast<size_t>(j)] * dprobs[static_cast<size_t>(j)];
          }
          for (int j = 0; j < cnt; ++j) {
            const int lj = (r - rb) * steps + jb + j;
            const T p = probs[static_cast<size_t>(j)];
            dv.row(lj).segment(off, hd) += p * dacc;
            const T dscore = p * (dprobs[static_cast<size_t>(j)] - pdsum) * scale;
            dq.row(li).segment(off, hd) += dscore * k.row(lj).segment(off, hd);
            dk.row(lj).segment(off, hd) += dscore * q.row(li).segment(off, hd);
          }
        }
      }
    }
    for (int r = rb; r < re; ++r)
      for (int t = 0; t < steps; ++t) {
        const int local = (r - rb) * steps + t;
        rope_unapply_row<T>(dq.row(local), heads, model_.rope, mask.position(r, t));
        rope_unapply_row<T>(dk.row(local), heads, model_.rope, mask.position(r, t));
      }
    const Mat<T> x_in = st.x_in.middleRows(fb, fn);
    Mat<T> xn = norm_rows_from_inv(x_in, blk.attn_norm_gain.value.row(0),
                                   st.inv1.middleRows(fb, fn));
    grad_of(s, blk.wq).noalias() += dq.transpose() * xn;
    grad_of(s, blk.wk).noalias() += dk.transpose() * xn;
    grad_of(s, blk.wv).noalias() += dv.transpose() * xn;
    Mat<T> dxn = dq * blk.wq.value + dk * blk.wk.value + dv * blk.wv.value;
    norm_rows_backward(x_in, blk.attn_norm_gain.value.row(0), st.inv1.middleRows(fb, fn),
                       dxn, grad_of(s, blk.attn_norm_gain), dX);
  }
  d_state_features_.middleRows(fb, fn) = dX;
}

template <typename T>
void TrainGraph<T>::encoder_backward_rows(int s, int rb, int re) {
  const auto& cfg = model_.config();
  const int d = cfg.hidden_dim;
  const int heads = cfg.encoder_heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const int steps = batch_->steps;
  const int fb = rb * steps;
  const int fe = re * steps;
  const Eigen::Index tb = static_cast<Eigen::Index>(fb) * n_tok_;
  const Eigen::Index tn = static_cast<Eigen::Index>(fe - fb) * n_tok_;

  Mat<T> dX = Mat<T>::Zero(tn, d);
  for (int f = fb; f < fe; ++f)
    dX.row(static_cast<Eigen::Index>(f - fb) * n_tok_ + state_row_) =
        d_state_features_.row(f);

  std::vector<T> probs(static_cast<size_t>(n_tok_));
  std::vector<T> dprobs(static_cast<size_t>(n_tok_));
  for (int l = static_cast<int>(enc_stash_.size()) - 1; l >= 0; --l) {
    const auto& st = enc_stash_[static_cast<size_t>(l)];
    const auto& blk = model_.enc_blocks[static_cast<size_t>(l)];

    const Mat<T> gate_pre = st.gate_pre.middleRows(tb, tn);
    const Mat<T> up = st.up.middleRows(tb, tn);
    Mat<T> act(tn, cfg.ffn());
    for (Eigen::Index i = 0; i < act.size(); ++i)
      act.data()[i] = silu(gate_pre.data()[i]) * up.data()[i];
    grad_of(s, blk.w_down).noalias() += dX.transpose() * act;
    Mat<T> dact = dX * blk.w_down.value;
    Mat<T> dgate(tn, cfg.ffn()), dup(tn, cfg.ffn());
    for (Eigen::Index i = 0; i < dact.size(); ++i) {
      const T g = gate_pre.data()[i];
      dgate.data()[i] = dact.data()[i] * up.data()[i] * silu_grad(g);
      dup.data()[i] = dact.data()[i] * silu(g);
    }
    const Mat<T> x_mid = st.x_mid.middleRows(tb, tn);
    Mat<T> xm = norm_rows_from_inv(x_mid, blk.mlp_norm_gain.value.row(0),
                                   st.inv2.middleRows(tb, tn));
    grad_of(s, blk.w_gate).noalias() += dgate.transpose() * xm;
    grad_of(s, blk.w_up).noalias() += dup.transpose() * xm;
    Mat<T> dxm = dgate * blk.w_gate.value + dup * blk.w_up.value;
    norm_rows_backward(x_mid, blk.mlp_norm_gain.value.row(0), st.inv2.middleRows(tb, tn),
                       dxm, grad_of(s, blk.mlp_norm_gain), dX);

    grad_of(s, blk.wo).noalias() += dX.transpose() * st.mixed.middleRows(tb, tn);
    Mat<T> dmixed = dX * blk.wo.value;
    const Mat<T> q = st.q.middleRows(tb, tn);
    const Mat<T> k = st.k.middleRows(tb, tn);
    const Mat<T> v = st.v.middleRows(tb, tn);
    Mat<T> dq = Mat<T>::Zero(tn, d), dk = Mat<T>::Zero(tn, d), dv = Mat<T>::Zero(tn, d);
    for (int f = 0; f < fe - fb; ++f) {
      const Eigen::Index base = static_cast<Eigen::Index>(f) * n_tok_;
      for (int i = 0; i < n_tok_; ++i) {
        for (int h = 0; h < heads; ++h) {
          const int off = h * hd;
          for (int j = 0; j < n_tok_; ++j)
            probs[static_cast<size_t>(j)] =
                scale * k.row(base + j).segment(off, hd).dot(q.row(base + i).segment(off, hd));
          softmax_inplace(probs.data(), n_tok_);
          const auto dacc = dmixed.row(base + i).segment(off, hd);
          T pdsum = T(0);
          for (int j = 0; j < n_tok_; ++j) {
            dprobs[static_cast<size_t>(j)] = dacc.dot(v.row(base + j).segment(off, hd));
            pdsum += probs[static_cast<size_t>(j)] * dprobs[static_cast<size_t>(j)];
          }
          for (int j = 0; j < n_tok_; ++j) {
            const T p = probs[static_cast<size_t>(j)];
            dv.row(base + j).segment(off, hd) += p * dacc;
            const T dscore = p * (dprobs[static_cast<size_t>(j)] - pdsum) * scale;
            dq.row(base + i).segment(off, hd) += dscore * k.row(base + j).segment(off, hd);
            dk.row(base + j).segment(off, hd) += dscore * q.row(base + i).segment(off, hd);
          }
        }
      }
    }
    const Mat<T> x_in = st.x_in.middleRows(tb, tn);
    Mat<T> xn = norm_rows_from_inv(x_in, blk.attn_norm_gain.value.row(0),
                                   st.inv1.middleRows(tb, tn));
    grad_of(s, blk.wq).noalias() += dq.transpose() * xn;
    grad_of(s, blk.wk).noalias() += dk.transpose() * xn;
    grad_of(s, blk.wv).noalias() += dv.transpose() * xn;
    Mat<T> dxn = dq * blk.wq.value + dk * blk.wk.value + dv * blk.wv.value;
    norm_rows_backward(x_in, blk.attn_norm_gain.value.row(0), st.inv1.middleRows(tb, tn),
                       dxn, grad_of(s, blk.attn_norm_gain), dX);
  }

  // scatter input-token gradients
  const int frames_n = fe - fb;
  Mat<T> dv_tokens(static_cast<Eigen::Index>(frames_n) * ell_, d);
  for (int f = 0; f < frames_n; ++f) {
    const Eigen::Index base = static_cast<Eigen::Index>(f) * n_tok_;
    dv_tokens.middleRows(static_cast<Eigen::Index>(f) * ell_, ell_) =
        dX.middleRows(base, ell_);
    grad_of(s, model_.state_token).row(0) += dX.row(base + state_row_);
  }
  // visual projection (backbone grad is dropped: frozen by construction)
  grad_of(s, model_.proj_w).noalias() +=
      dv_tokens.transpose() *
      batch_->visual.middleRows(static_cast<Eigen::Index>(fb) * ell_,
                                static_cast<Eigen::Index>(frames_n) * ell_);
  grad_of(s, model_.proj_b).row(0) += dv_tokens.colwise().sum();

  if (cat_row_ >= 0) {
    Mat<T> dg(frames_n, d);
    for (int f = 0; f < frames_n; ++f)
      dg.row(f) = dX.row(static_cast<Eigen::Index>(f) * n_tok_ + cat_row_);
    grad_of(s, model_.goal_proj_w).noalias() +=
        dg.transpose() * goal_table_rows_.middleRows(fb, frames_n);
    grad_of(s, model_.goal_proj_b).row(0) += dg.colwise().sum();
    Mat<T> dtab = dg * model_.goal_proj_w.value;
    for (int f = 0; f < frames_n; ++f)
      grad_of(s, model_.goal_table)
          .row(batch_->goal_category[static_cast<size_t>(fb + f)]) += dtab.row(f);
  }

  if (box_row_ >= 0) {
    Mat<T> dgb = Mat<T>::Zero(static_cast<Eigen::Index>(frames_n) * 5, d);
    for (int f = 0; f < frames_n; ++f)
      dgb.middleRows(static_cast<Eigen::Index>(f) * 5, 5) =
          dX.middleRows(static_cast<Eigen::Index>(f) * n_tok_ + box_row_, 5);
    // sentinel frames feed the learned rows directly; detected frames go
    // through the MLP
    for (int f = 0; f < frames_n; ++f) {
      if (!batch_->goal_bbox[static_cast<size_t>(fb + f)].has_value()) {
        grad_of(s, model_.box_sentinel) += dgb.middleRows(static_cast<Eigen::Index>(f) * 5, 5);
        dgb.middleRows(static_cast<Eigen::Index>(f) * 5, 5).setZero();
      }
    }
    const Mat<T> hidden = box_hidden_.middleRows(static_cast<Eigen::Index>(fb) * 5,
                                                 static_cast<Eigen::Index>(frames_n) * 5);
    Mat<T> act(hidden.rows(), hidden.cols());
    for (Eigen::Index i = 0; i < act.size(); ++i) act.data()[i] = silu(hidden.data()[i]);
    grad_of(s, model_.box_mlp_w2).noalias() += dgb.transpose() * act;
    grad_of(s, model_.box_mlp_b2).row(0) += dgb.colwise().sum();
    Mat<T> dact = dgb * model_.box_mlp_w2.value;
    Mat<T> dhidden(dact.rows(), dact.cols());
    for (Eigen::Index i = 0; i < dact.size(); ++i)
      dhidden.data()[i] = dact.data()[i] * silu_grad(hidden.data()[i]);
    const Mat<T> enc = box_enc_.middleRows(static_cast<Eigen::Index>(fb) * 5,
                                           static_cast<Eigen::Index>(frames_n) * 5);
    grad_of(s, model_.box_mlp_w1).noalias() += dhidden.transpose() * enc;
    grad_of(s, model_.box_mlp_b1).row(0) += dhidden.colwise().sum();
    Mat<T> denc = dhidden * model_.box_mlp_w1.value;
    for (int f = 0; f < frames_n; ++f)
      if (batch_->goal_bbox[static_cast<size_t>(fb + f)].has_value())
        for (int i = 0; i < 5; ++i)
          grad_of(s, model_.box_type_emb).row(i) +=
              denc.row(static_cast<Eigen::Index>(f) * 5 + i);
  }
}

}  // namespace navrl
