#include "doctest.h"

#include "navrl/policy.hpp"

using namespace navrl;

namespace {

ModelConfig small_config() {
  ModelConfig m;
  m.hidden_dim = 32;
  m.encoder_layers = 2;
  m.encoder_heads = 4;
  m.decoder_layers = 2;
  m.decoder_heads = 4;
  m.backbone_dim = 24;
  m.obs_height = 28;
  m.obs_width = 28;
  m.patch_size = 14;
  m.object_classes = 5;
  m.bbox_enc_dim = 16;
  m.cache_capacity = 64;
  m.goal_mode = GoalMode::kBoth;
  return m;
}

Observation random_obs(const ModelConfig& m, Rng& rng) {
  Observation o = Observation::zeros(m.obs_height, m.obs_width, m.obs_channels());
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) {
      const int c = static_cast<int>(rng.below(static_cast<uint64_t>(o.channels + 1)));
      if (c < o.channels) o.at(y, x, c) = 1.0f;
    }
  return o;
}

}  // namespace

TEST_CASE("patchify: zero observation maps every token to the bias row") {
  auto cfg = small_config();
  PolicyModelF model(cfg);
  Observation zero = Observation::zeros(cfg.obs_height, cfg.obs_width, cfg.obs_channels());
  MatF r = model.patchify_encode(zero);
  CHECK(r.rows() == cfg.patches());
  CHECK(r.cols() == cfg.backbone_dim);
  for (int i = 0; i < r.rows(); ++i)
    CHECK((r.row(i) - model.patch_b).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("patchify: deterministic and 56x56/14 yields 16 tokens") {
  ModelConfig cfg = small_config();
  cfg.obs_height = 56;
  cfg.obs_width = 56;
  PolicyModelF model(cfg);
  CHECK(cfg.patches() == 16);
  Rng rng(5);
  Observation obs = random_obs(cfg, rng);
  MatF a = model.patchify_encode(obs);
  MatF b = model.patchify_encode(obs);
  CHECK(a.rows() == 16);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);

  // same seed, fresh model: identical frozen map
  PolicyModelF model2(cfg);
  CHECK((model.patchify_encode(obs) - model2.patchify_encode(obs)).cwiseAbs().maxCoeff() ==
        0.0f);
}

TEST_CASE("project_visual: identity weights pass through, zero weights vanish") {
  ModelConfig cfg = small_config();
  cfg.backbone_dim = cfg.hidden_dim;  // h == d so identity is well-formed
  PolicyModelF model(cfg);
  model.proj_w.value = MatF::Identity(cfg.hidden_dim, cfg.hidden_dim);
  model.proj_b.value.setZero();
  Rng rng(3);
  MatF r(cfg.patches(), cfg.hidden_dim);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = static_cast<float>(rng.normal());
  CHECK((model.project_visual(r) - r).cwiseAbs().maxCoeff() == 0.0f);

  model.proj_w.value.setZero();
  CHECK(model.project_visual(r).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("goal category encoder") {
  ModelConfig cfg = small_config();
  cfg.object_classes = 20;
  PolicyModelF model(cfg);

  MatF a = model.encode_goal_category(0);
  MatF b = model.encode_goal_category(1);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == cfg.hidden_dim);
  CHECK((a - b).cwiseAbs().maxCoeff() > 0.0f);          // distinct ids -> distinct rows
  MatF a2 = model.encode_goal_category(0);
  CHECK((a - a2).cwiseAbs().maxCoeff() == 0.0f);        // same id -> identical
  CHECK_NOTHROW(model.encode_goal_category(19));        // boundary id
  CHECK_THROWS_AS(model.encode_goal_category(20), ArgumentError);
  CHECK_THROWS_AS(model.encode_goal_category(-1), ArgumentError);
}

TEST_CASE("bbox encoder: sinusoid pattern, sentinel, injectivity, validation") {
  auto cfg = small_config();
  PolicyModelF model(cfg);

  // sinusoidal encoding of 0 alternates (sin 0, cos 0) = (0, 1, ...)
  RowVec<float> enc0 = PolicyModelF::sinusoid_encode(0.0f, cfg.bbox_enc_dim);
  for (int i = 0; i * 2 + 1 < cfg.bbox_enc_dim; ++i) {
    CHECK(enc0[2 * i] == 0.0f);
    CHECK(enc0[2 * i + 1] == 1.0f);
  }

  BBox full{0, 0, 1, 1, 1};
  BBox half{0, 0, 0.5f, 0.5f, 0.25f};
  MatF g1 = model.encode_goal_bbox(full);
  MatF g2 = model.encode_goal_bbox(half);
  CHECK(g1.rows() == 5);
  CHECK(g1.cols() == cfg.hidden_dim);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() > 0.0f);

  MatF s1 = model.encode_goal_bbox(std::nullopt);
  MatF s2 = model.encode_goal_bbox(std::nullopt);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((s1 - model.box_sentinel.value).cwiseAbs().maxCoeff() == 0.0f);

  BBox bad{0.5f, 0, 0.2f, 1, 0.1f};  // x1 > x2
  CHECK_THROWS_AS(model.encode_goal_bbox(bad), ArgumentError);
  BBox bad2{-0.1f, 0, 0.2f, 1, 0.1f};
  CHECK_THROWS_AS(model.encode_goal_bbox(bad2), ArgumentError);
}

TEST_CASE("state encoder: permutation of visual tokens leaves STATE output unchanged") {
  auto cfg = small_config();
  PolicyModel<double> model(cfg);
  Rng rng(11);
  Mat<double> v(cfg.patches(), cfg.hidden_dim);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  Mat<double> g = model.encode_goal_category(2);
  Mat<double> gb = model.encode_goal_bbox(BBox{0.1f, 0.2f, 0.6f, 0.9f, 0.35f});

  RowVec<double> s1 = model.state_encode(v, &g, &gb);
  Mat<double> vp(v.rows(), v.cols());
  // reverse the token order
  for (int i = 0; i < v.rows(); ++i) vp.row(i) = v.row(v.rows() - 1 - i);
  RowVec<double> s2 = model.state_encode(vp, &g, &gb);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("state encoder: zero-weight blocks reduce to the STATE embedding") {
  auto cfg = small_config();
  PolicyModelF model(cfg);
  for (auto& blk : model.enc_blocks) {
    blk.wq.value.setZero();
    blk.wk.value.setZero();
    blk.wv.value.setZero();
    blk.wo.value.setZero();
    blk.w_gate.value.setZero();
    blk.w_up.value.setZero();
    blk.w_down.value.setZero();
  }
  Rng rng(4);
  MatF v(cfg.patches(), cfg.hidden_dim);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = static_cast<float>(rng.normal());
  MatF g = model.encode_goal_category(0);
  MatF gb = model.encode_goal_bbox(std::nullopt);
  RowVec<float> s = model.state_encode(v, &g, &gb);
  CHECK((s - model.state_token.value.row(0)).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("state encoder: default config emits width-512 features") {
  ModelConfig cfg;  // paper defaults
  cfg.obs_height = 28;
  cfg.obs_width = 28;  // keep the test light; d stays 512
  PolicyModelF model(cfg);
  Rng rng(9);
  MatF v(cfg.patches(), cfg.hidden_dim);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = static_cast<float>(rng.normal());
  MatF g = model.encode_goal_category(1);
  RowVec<float> s = model.state_encode(v, &g, nullptr);
  CHECK(s.size() == 512);
  CHECK(s.allFinite());
}

TEST_CASE("state encoder: missing required goal raises a configuration error") {
  auto cfg = small_config();
  PolicyModelF model(cfg);
  MatF v = MatF::Zero(cfg.patches(), cfg.hidden_dim);
  CHECK_THROWS_AS(model.state_encode(v, nullptr, nullptr), ConfigError);
}

TEST_CASE("actor/critic heads: zero belief yields the biases, profile sizes hold") {
  auto cfg = small_config();
  cfg.goal_mode = GoalMode::kCategory;
  cfg.embodiment = Embodiment::kLoCoBot;
  PolicyModelF model(cfg);
  model.actor_b.value.setConstant(0.25f);
  RowVec<float> zero = RowVec<float>::Zero(cfg.hidden_dim);
  auto out = model.actor_critic(zero);
  CHECK(out.logits.size() == 6);
  for (int i = 0; i < out.logits.size(); ++i) CHECK(out.logits[i] == 0.25f);
  CHECK(out.value == model.critic_b.value(0, 0));

  cfg.embodiment = Embodiment::kStretch;
  PolicyModelF stretch(cfg);
  RowVec<float> z2 = RowVec<float>::Zero(cfg.hidden_dim);
  CHECK(stretch.actor_critic(z2).logits.size() == 7);
}

TEST_CASE("heads divide hidden dim is enforced") {
  auto cfg = small_config();
  cfg.encoder_heads = 5;
  CHECK_THROWS_AS(PolicyModelF{cfg}, ConfigError);
}
