#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "navrl/common.hpp"

namespace navrl {

// ---------------------------------------------------------------------------
// Parameters. Every trainable tensor lives in a registry so the optimizer,
// gradient clipping and checkpointing can walk them uniformly. The frozen
// visual backbone is deliberately NOT a Parameter: it never appears in the
// registry, so no training code can touch it.
// ---------------------------------------------------------------------------

template <typename T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  void init_zero(int rows, int cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
  }
  void init_normal(int rows, int cols, Rng& rng, double std_dev) {
    value.resize(rows, cols);
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j)
        value(i, j) = static_cast<T>(rng.normal() * std_dev);
    grad = Mat<T>::Zero(rows, cols);
  }
  void init_constant(int rows, int cols, T c) {
    value = Mat<T>::Constant(rows, cols, c);
    grad = Mat<T>::Zero(rows, cols);
  }
  int64_t size() const { return static_cast<int64_t>(value.rows()) * value.cols(); }
};

template <typename T>
class ParamRegistry {
 public:
  void add(Parameter<T>* p, const std::string& name) {
    p->name = name;
    params_.push_back(p);
  }
  const std::vector<Parameter<T>*>& all() const { return params_; }
  Parameter<T>* find(const std::string& name) const {
    for (auto* p : params_)
      if (p->name == name) return p;
    return nullptr;
  }
  void zero_grads() {
    for (auto* p : params_) p->grad.setZero();
  }
  int64_t total_size() const {
    int64_t n = 0;
    for (auto* p : params_) n += p->size();
    return n;
  }

 private:
  std::vector<Parameter<T>*> params_;
};

// ---------------------------------------------------------------------------
// Kernels. Forward functions are pure; backward functions consume the
// activations stashed by the caller and accumulate into parameter grads.
// ---------------------------------------------------------------------------

constexpr double kRmsEps = 1e-5;

template <typename T>
inline T silu(T x) {
  return x / (T(1) + std::exp(-x));
}
template <typename T>
inline T silu_grad(T x) {
  const T s = T(1) / (T(1) + std::exp(-x));
  return s * (T(1) + x * (T(1) - s));
}

// y = x W^T + b, rows are independent samples.
template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const RowVec<T>* b = nullptr) {
  Mat<T> y = x * w.transpose();
  if (b) y.rowwise() += *b;
  return y;
}

// dW += dy^T x, db += sum(dy), dx = dy W.
template <typename T>
void linear_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw,
                     RowVec<T>* db, Mat<T>& dx_out, bool accumulate_dx = false) {
  dw.noalias() += dy.transpose() * x;
  if (db) *db += dy.colwise().sum();
  if (accumulate_dx)
    dx_out.noalias() += dy * w;
  else
    dx_out.noalias() = dy * w;
}

// Row-wise RMS norm with learned gain: y_i = g .* x_i / rms(x_i).
template <typename T, typename G>
Mat<T> rms_norm(const Mat<T>& x, const Eigen::MatrixBase<G>& gain,
                std::vector<T>* inv_rms_out = nullptr) {
  Mat<T> y(x.rows(), x.cols());
  if (inv_rms_out) inv_rms_out->resize(static_cast<size_t>(x.rows()));
  const RowVec<T> g = gain;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T ms = x.row(i).squaredNorm() / static_cast<T>(x.cols());
    const T inv = T(1) / std::sqrt(ms + static_cast<T>(kRmsEps));
    if (inv_rms_out) (*inv_rms_out)[static_cast<size_t>(i)] = inv;
    y.row(i) = x.row(i).cwiseProduct(g) * inv;
  }
  return y;
}

template <typename T>
void rms_norm_backward(const Mat<T>& x, const RowVec<T>& gain, const std::vector<T>& inv_rms,
                       const Mat<T>& dy, RowVec<T>& dgain, Mat<T>& dx, bool accumulate_dx = false) {
  const T n = static_cast<T>(x.cols());
  if (!accumulate_dx) dx.setZero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T inv = inv_rms[static_cast<size_t>(i)];
    // y = g.*x*inv; d(inv)/dx = -inv^3 * x / n
    dgain += dy.row(i).cwiseProduct(x.row(i)) * inv;
    const RowVec<T> dyg = dy.row(i).cwiseProduct(gain);
    const T dot = dyg.cwiseProduct(x.row(i)).sum();
    dx.row(i) += dyg * inv - x.row(i) * (dot * inv * inv * inv / n);
  }
}

// Rotary position table: cos/sin per (position, pair index) with the usual
// frequency ladder base^(-2i/head_dim). Precomputed once so the incremental
// and batched decode paths rotate with bit-identical factors.
template <typename T>
struct RopeTable {
  Mat<T> cos_t;  // max_pos x head_dim/2
  Mat<T> sin_t;
  int head_dim = 0;

  void build(int max_pos, int hd, double base = 10000.0) {
    head_dim = hd;
    const int pairs = hd / 2;
    cos_t.resize(max_pos, pairs);
    sin_t.resize(max_pos, pairs);
    for (int p = 0; p < max_pos; ++p) {
      for (int i = 0; i < pairs; ++i) {
        const double angle = p * std::pow(base, -2.0 * i / hd);
        cos_t(p, i) = static_cast<T>(std::cos(angle));
        sin_t(p, i) = static_cast<T>(std::sin(angle));
      }
    }
  }
};

// Applies the rotation in place to one token row laid out as consecutive
// head slices; pairs (2i, 2i+1) within each head rotate together.
template <typename T>
void rope_apply_row(Eigen::Ref<RowVec<T>> row, int heads, const RopeTable<T>& rope, int pos) {
  const int hd = rope.head_dim;
  for (int h = 0; h < heads; ++h) {
    const int off = h * hd;
    for (int i = 0; i * 2 + 1 < hd; ++i) {
      const T c = rope.cos_t(pos, i);
      const T s = rope.sin_t(pos, i);
      const T a = row[off + 2 * i];
      const T b = row[off + 2 * i + 1];
      row[off + 2 * i] = a * c - b * s;
      row[off + 2 * i + 1] = a * s + b * c;
    }
  }
}

// Transpose rotation: pushes gradients back through RoPE.
template <typename T>
void rope_unapply_row(Eigen::Ref<RowVec<T>> row, int heads, const RopeTable<T>& rope, int pos) {
  const int hd = rope.head_dim;
  for (int h = 0; h < heads; ++h) {
    const int off = h * hd;
    for (int i = 0; i * 2 + 1 < hd; ++i) {
      const T c = rope.cos_t(pos, i);
      const T s = rope.sin_t(pos, i);
      const T a = row[off + 2 * i];
      const T b = row[off + 2 * i + 1];
      row[off + 2 * i] = a * c + b * s;
      row[off + 2 * i + 1] = -a * s + b * c;
    }
  }
}

// Numerically stable row softmax over the first `n` entries of a scratch row.
template <typename T>
void softmax_inplace(T* v, int n) {
  T mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  T sum = T(0);
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  const T inv = T(1) / sum;
  for (int i = 0; i < n; ++i) v[i] *= inv;
}

// ---------------------------------------------------------------------------
// Transformer block parameters (pre-norm, RMS norm, gated MLP). Shared by the
// state encoder (bidirectional, no RoPE) and the causal decoder (RoPE on the
// within-episode step index).
// ---------------------------------------------------------------------------

template <typename T>
struct BlockParams {
  Parameter<T> attn_norm_gain;
  Parameter<T> wq, wk, wv, wo;  // each dim x dim, no bias
  Parameter<T> mlp_norm_gain;
  Parameter<T> w_gate, w_up, w_down;  // gated MLP

  void init(int dim, int ffn, Rng& rng, double std_dev) {
    attn_norm_gain.init_constant(1, dim, T(1));
    wq.init_normal(dim, dim, rng, std_dev);
    wk.init_normal(dim, dim, rng, std_dev);
    wv.init_normal(dim, dim, rng, std_dev);
    wo.init_normal(dim, dim, rng, std_dev);
    mlp_norm_gain.init_constant(1, dim, T(1));
    w_gate.init_normal(ffn, dim, rng, std_dev);
    w_up.init_normal(ffn, dim, rng, std_dev);
    w_down.init_normal(dim, ffn, rng, std_dev);
  }

  void register_into(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(&attn_norm_gain, prefix + ".attn_norm");
    reg.add(&wq, prefix + ".wq");
    reg.add(&wk, prefix + ".wk");
    reg.add(&wv, prefix + ".wv");
    reg.add(&wo, prefix + ".wo");
    reg.add(&mlp_norm_gain, prefix + ".mlp_norm");
    reg.add(&w_gate, prefix + ".w_gate");
    reg.add(&w_up, prefix + ".w_up");
    reg.add(&w_down, prefix + ".w_down");
  }
};

// Gated MLP forward: down( silu(gate(x)) .* up(x) ).
template <typename T>
Mat<T> gated_mlp(const Mat<T>& x, const BlockParams<T>& p, Mat<T>* gate_pre_out = nullptr,
                 Mat<T>* up_out = nullptr) {
  Mat<T> gate_pre = x * p.w_gate.value.transpose();
  Mat<T> up = x * p.w_up.value.transpose();
  Mat<T> act(gate_pre.rows(), gate_pre.cols());
  for (Eigen::Index i = 0; i < act.size(); ++i)
    act.data()[i] = silu(gate_pre.data()[i]) * up.data()[i];
  if (gate_pre_out) *gate_pre_out = std::move(gate_pre);
  if (up_out) *up_out = std::move(up);
  return act * p.w_down.value.transpose();
}

}  // namespace navrl
