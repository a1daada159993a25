#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "navrl/nn.hpp"

namespace navrl {

struct LossReport {
  double policy = 0.0;
  double value_mse = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

struct PpoWeights {
  double clip = 0.1;
  double value_loss_weight = 0.5;
  double entropy_weight = 0.01;
};

// Clipped-surrogate PPO loss over a flat batch of frames. Fills the analytic
// gradient of the total loss w.r.t. logits and values when requested:
//   total = policy + w_v * value_mse - w_e * entropy.
template <typename T>
LossReport ppo_loss(const Mat<T>& logits, const std::vector<int>& actions,
                    const std::vector<double>& old_logprobs,
                    const std::vector<double>& advantages, const RowVec<T>& values,
                    const std::vector<double>& returns, const PpoWeights& w,
                    Mat<T>* dlogits = nullptr, RowVec<T>* dvalues = nullptr) {
  const int n = static_cast<int>(logits.rows());
  const int acts = static_cast<int>(logits.cols());
  if (static_cast<int>(actions.size()) != n || static_cast<int>(old_logprobs.size()) != n ||
      static_cast<int>(advantages.size()) != n || static_cast<int>(values.size()) != n ||
      static_cast<int>(returns.size()) != n)
    throw ArgumentError("ppo_loss: batch arrays must all have logits.rows() entries");

  if (dlogits) dlogits->setZero(n, acts);
  if (dvalues) dvalues->setZero(n);

  LossReport rep;
  const double inv_n = 1.0 / n;
  std::vector<double> probs(static_cast<size_t>(acts));
  std::vector<double> logp(static_cast<size_t>(acts));
  for (int i = 0; i < n; ++i) {
    // stable log-softmax
    double mx = static_cast<double>(logits(i, 0));
    for (int a = 1; a < acts; ++a) mx = std::max(mx, static_cast<double>(logits(i, a)));
    double sum = 0.0;
    for (int a = 0; a < acts; ++a) sum += std::exp(static_cast<double>(logits(i, a)) - mx);
    const double lse = mx + std::log(sum);
    double entropy = 0.0;
    for (int a = 0; a < acts; ++a) {
      logp[static_cast<size_t>(a)] = static_cast<double>(logits(i, a)) - lse;
      probs[static_cast<size_t>(a)] = std::exp(logp[static_cast<size_t>(a)]);
      entropy -= probs[static_cast<size_t>(a)] * logp[static_cast<size_t>(a)];
    }
    rep.entropy += entropy * inv_n;

    const int act = actions[static_cast<size_t>(i)];
    if (act < 0 || act >= acts) throw ArgumentError("ppo_loss: action id out of range");
    const double adv = advantages[static_cast<size_t>(i)];
    const double ratio = std::exp(logp[static_cast<size_t>(act)] - old_logprobs[static_cast<size_t>(i)]);
    const double clipped = std::min(std::max(ratio, 1.0 - w.clip), 1.0 + w.clip);
    const double surr1 = ratio * adv;
    const double surr2 = clipped * adv;
    rep.policy -= std::min(surr1, surr2) * inv_n;

    const double verr = static_cast<double>(values[i]) - returns[static_cast<size_t>(i)];
    rep.value_mse += verr * verr * inv_n;

    if (dlogits) {
      // d(-min(surr1,surr2))/dlogp_act = -ratio*adv on the unclipped branch
      const double dlp = (surr1 <= surr2) ? -ratio * adv * inv_n : 0.0;
      for (int a = 0; a < acts; ++a) {
        const double onehot = (a == act) ? 1.0 : 0.0;
        double g = dlp * (onehot - probs[static_cast<size_t>(a)]);
        // d(-w_e * H)/dlogits = w_e * p .* (logp + H)
        g += w.entropy_weight * probs[static_cast<size_t>(a)] *
             (logp[static_cast<size_t>(a)] + entropy) * inv_n;
        (*dlogits)(i, a) = static_cast<T>(g);
      }
    }
    if (dvalues) (*dvalues)[i] = static_cast<T>(w.value_loss_weight * 2.0 * verr * inv_n);
  }
  rep.total = rep.policy + w.value_loss_weight * rep.value_mse - w.entropy_weight * rep.entropy;
  if (!std::isfinite(rep.total)) throw NumericError("ppo_loss produced a non-finite total");
  return rep;
}

// ---------------------------------------------------------------------------
// Adam with a constant learning rate. Moments are addressed by registry
// order; they serialize into checkpoints next to the parameters.
// ---------------------------------------------------------------------------

template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(ParamRegistry<T>& registry, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : registry_(registry), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : registry_.all()) {
      m_.emplace_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.emplace_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const auto& params = registry_.all();
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      Mat<T>& m = m_[i];
      Mat<T>& v = v_[i];
      for (Eigen::Index k = 0; k < p.value.size(); ++k) {
        const double g = static_cast<double>(p.grad.data()[k]);
        const double mn = beta1_ * static_cast<double>(m.data()[k]) + (1.0 - beta1_) * g;
        const double vn = beta2_ * static_cast<double>(v.data()[k]) + (1.0 - beta2_) * g * g;
        m.data()[k] = static_cast<T>(mn);
        v.data()[k] = static_cast<T>(vn);
        p.value.data()[k] -=
            static_cast<T>(lr_ * (mn / bc1) / (std::sqrt(vn / bc2) + eps_));
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  std::vector<Mat<T>>& moments_m() { return m_; }
  std::vector<Mat<T>>& moments_v() { return v_; }

 private:
  ParamRegistry<T>& registry_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

// Scales gradients so the global L2 norm does not exceed max_norm; returns
// the pre-clip norm.
template <typename T>
double clip_grad_norm(ParamRegistry<T>& registry, double max_norm) {
  double sq = 0.0;
  for (auto* p : registry.all()) sq += static_cast<double>(p->grad.template cast<double>().squaredNorm());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto* p : registry.all()) p->grad *= scale;
  }
  return norm;
}

// Rollout-length staircase: T rises 32 -> 64 -> 128 at the configured step
// thresholds and stays at the final value.
inline int schedule_rollout_length(int64_t global_step, int steps_stage1, int steps_stage2,
                                   int steps_stage3, int64_t threshold1, int64_t threshold2) {
  if (global_step >= threshold2) return steps_stage3;
  if (global_step >= threshold1) return steps_stage2;
  return steps_stage1;
}

}  // namespace navrl
