#include "doctest.h"

#include "navrl/sim/world.hpp"
#include "sim_fixtures.hpp"

using namespace navrl;
using navrl::testfix::add_wall_block;
using navrl::testfix::empty_house;

namespace {

RasterSpec raster(int classes = 5) {
  RasterSpec r;
  r.height = 28;
  r.width = 28;
  r.classes = classes;
  return r;
}

AgentPose pose_at(float x, float y, float yaw = 0.0f) {
  AgentPose p;
  p.x = x;
  p.y = y;
  p.yaw_deg = yaw;
  return p;
}

}  // namespace

TEST_CASE("action spaces match the embodiment profiles") {
  CHECK(action_set(Embodiment::kLoCoBot).size() == 6);
  CHECK(action_set(Embodiment::kStretch).size() == 7);
  for (Action a : {Action::kLookUp, Action::kLookDown})
    CHECK(std::find(action_set(Embodiment::kStretch).begin(),
                    action_set(Embodiment::kStretch).end(),
                    a) == action_set(Embodiment::kStretch).end());
}

TEST_CASE("MoveAhead in open space translates 0.2 m along +y at yaw 0") {
  House h = empty_house(4, 4);
  const auto profile = episode_profile(Embodiment::kLoCoBot);
  auto out = apply_action(pose_at(1.0f, 1.0f, 0.0f), Action::kMoveAhead, h, profile);
  CHECK_FALSE(out.collided);
  CHECK(out.pose.x == doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(out.pose.y == doctest::Approx(1.2f).epsilon(1e-6));

  // yaw 90 faces +x
  out = apply_action(pose_at(1.0f, 1.0f, 90.0f), Action::kMoveAhead, h, profile);
  CHECK(out.pose.x == doctest::Approx(1.2f).epsilon(1e-5));
  CHECK(out.pose.y == doctest::Approx(1.0f).epsilon(1e-5));

  // MoveBack under the Stretch profile
  const auto sp = episode_profile(Embodiment::kStretch);
  out = apply_action(pose_at(1.0f, 1.0f, 0.0f), Action::kMoveBack, h, sp);
  CHECK(out.pose.y == doctest::Approx(0.8f).epsilon(1e-6));
}

TEST_CASE("MoveAhead into a nearby wall stops at contact") {
  House h = empty_house(4, 4);
  // wall face 0.05 m ahead of the body front: body at y=1 with radius 0.18
  add_wall_block(h, 0.0f, 1.25f, 4.0f, 1.35f);
  const auto profile = episode_profile(Embodiment::kLoCoBot);
  AgentPose p = pose_at(1.0f, 1.0f, 0.0f);
  auto out = apply_action(p, Action::kMoveAhead, h, profile);
  CHECK(out.collided);
  const float moved = out.pose.y - p.y;
  CHECK(moved < 0.2f);
  CHECK(moved >= 0.0f);
  // the stop position never overlaps the wall
  CHECK_FALSE(pose_collides(h, out.pose.x, out.pose.y, p.body_radius_m));
}

TEST_CASE("sixty small right rotations wrap back to the start yaw") {
  House h = empty_house(3, 3);
  const auto profile = episode_profile(Embodiment::kStretch);
  AgentPose p = pose_at(1.5f, 1.5f, 12.0f);
  for (int i = 0; i < 60; ++i)
    p = apply_action(p, Action::kRotateRightSmall, h, profile).pose;
  CHECK(p.yaw_deg == doctest::Approx(12.0f).epsilon(1e-5));
  for (int i = 0; i < 12; ++i)
    p = apply_action(p, Action::kRotateLeft, h, profile).pose;
  CHECK(p.yaw_deg == doctest::Approx(12.0f).epsilon(1e-5));
}

TEST_CASE("LookUp/LookDown clamp the pitch to the profile limits") {
  House h = empty_house(3, 3);
  const auto profile = episode_profile(Embodiment::kLoCoBot);
  AgentPose p = pose_at(1.5f, 1.5f);
  p = apply_action(p, Action::kLookUp, h, profile).pose;
  CHECK(p.pitch_deg == doctest::Approx(30.0f));
  p = apply_action(p, Action::kLookUp, h, profile).pose;
  CHECK(p.pitch_deg == doctest::Approx(30.0f));  // clamped
  for (int i = 0; i < 3; ++i) p = apply_action(p, Action::kLookDown, h, profile).pose;
  CHECK(p.pitch_deg == doctest::Approx(-30.0f));
}

TEST_CASE("rendering: a close wall dominates the near rows") {
  House h = empty_house(6, 6);
  add_wall_block(h, 0.0f, 3.48f, 6.0f, 3.6f);
  auto spec = raster();
  // wall face 0.3 m from the agent center
  AgentPose p = pose_at(3.0f, 3.0f, 0.0f);
  Observation obs = render_observation(p, h, spec);
  // near rows (bottom half) of the central column: wall channel everywhere
  const int col = spec.width / 2;
  int wall_rows = 0;
  for (int y = spec.height / 2; y < spec.height; ++y)
    if (obs.at(y, col, 1) == 1.0f) ++wall_rows;
  CHECK(wall_rows >= spec.height / 2 - 2);
}

TEST_CASE("rendering: observation is one-hot and deterministic under replay") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{2, 4.0f, 4.0f, 0.25f});
  h.objects.push_back(ObjectInstance{0, 2.0f, 4.5f, 0.2f});
  auto spec = raster();
  AgentPose p = pose_at(3.0f, 3.0f, 17.0f);
  Observation a = render_observation(p, h, spec);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      float sum = 0;
      for (int c = 0; c < a.channels; ++c) {
        sum += a.at(y, x, c);
        CHECK(a.at(y, x, c) >= 0.0f);
        CHECK(a.at(y, x, c) <= 1.0f);
      }
      CHECK(sum <= 1.0f);
    }

  // twelve 30-degree rotations bring the pose and thus the view back
  const auto profile = episode_profile(Embodiment::kLoCoBot);
  AgentPose q = p;
  for (int i = 0; i < 12; ++i) q = apply_action(q, Action::kRotateRight, h, profile).pose;
  CHECK(q.yaw_deg == doctest::Approx(p.yaw_deg).epsilon(1e-6));
  Observation b = render_observation(q, h, spec);
  CHECK(a.data == b.data);
}

TEST_CASE("bbox: occluded target yields no detection") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{1, 3.0f, 4.5f, 0.3f});
  add_wall_block(h, 2.0f, 3.8f, 4.0f, 4.0f);  // wall between agent and target
  auto spec = raster();
  AgentPose p = pose_at(3.0f, 3.0f, 0.0f);
  CHECK_FALSE(project_bbox(p, h, spec, 1).has_value());
  // visible again from the other side
  AgentPose q = pose_at(3.0f, 5.5f, 180.0f);
  CHECK(project_bbox(q, h, spec, 1).has_value());
}

TEST_CASE("bbox: a target enveloping the view covers the whole frame") {
  House h = empty_house(10, 10);
  h.objects.push_back(ObjectInstance{3, 5.0f, 5.2f, 3.0f});  // class height 1.25
  auto spec = raster();
  AgentPose p = pose_at(5.0f, 5.0f, 0.0f);  // inside the disc footprint
  auto box = project_bbox(p, h, spec, 3);
  REQUIRE(box.has_value());
  CHECK(box->x1 == doctest::Approx(0.0f));
  CHECK(box->y1 == doctest::Approx(0.0f));
  CHECK(box->x2 == doctest::Approx(1.0f));
  CHECK(box->y2 == doctest::Approx(1.0f));
  CHECK(box->area == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("bbox: coordinates are ordered, normalized and area-consistent") {
  SimConfig sim;
  sim.object_classes = 5;
  House h = generate_house(sim, 77);
  auto spec = raster();
  Rng rng(5);
  int detections = 0;
  for (int i = 0; i < 400; ++i) {
    AgentPose p;
    p.x = static_cast<float>(rng.range(0.2, h.width_m() - 0.2));
    p.y = static_cast<float>(rng.range(0.2, h.height_m() - 0.2));
    p.yaw_deg = static_cast<float>(rng.range(0.0, 360.0));
    if (h.wall_at(h.cell_of(p.x), h.cell_of(p.y))) continue;
    const int cls = static_cast<int>(rng.below(5));
    auto box = project_bbox(p, h, spec, cls);
    if (!box) continue;
    ++detections;
    CHECK(box->x1 >= 0.0f);
    CHECK(box->y1 >= 0.0f);
    CHECK(box->x2 <= 1.0f);
    CHECK(box->y2 <= 1.0f);
    CHECK(box->x1 <= box->x2);
    CHECK(box->y1 <= box->y2);
    CHECK(std::abs(box->area - (box->x2 - box->x1) * (box->y2 - box->y1)) <= 1e-6f);
  }
  CHECK(detections > 20);
}

TEST_CASE("bbox pixels overlap the target class channel in the rendering") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{2, 3.0f, 4.2f, 0.3f});
  auto spec = raster();
  AgentPose p = pose_at(3.0f, 3.0f, 0.0f);
  auto box = project_bbox(p, h, spec, 2);
  REQUIRE(box.has_value());
  Observation obs = render_observation(p, h, spec);
  int overlap = 0;
  for (int y = static_cast<int>(box->y1 * spec.height); y < box->y2 * spec.height; ++y)
    for (int x = static_cast<int>(box->x1 * spec.width); x < box->x2 * spec.width; ++x)
      if (obs.at(y, x, 2 + 2) == 1.0f) ++overlap;
  CHECK(overlap > 0);
}

TEST_CASE("judge_done follows the distance-and-visibility clauses") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{0, 3.0f, 3.5f, 0.2f});
  auto spec = raster();

  TaskSpec lo;
  lo.target_class = 0;
  lo.success_distance_m = 1.0f;
  // 0.5 m away, facing it, visible
  CHECK(judge_done(pose_at(3.0f, 3.0f, 0.0f), h, spec, lo));
  // facing away: outside the FOV
  CHECK_FALSE(judge_done(pose_at(3.0f, 3.0f, 180.0f), h, spec, lo));

  // occluded by a wall: failure even within distance
  House h2 = empty_house(6, 6);
  h2.objects.push_back(ObjectInstance{0, 3.0f, 3.5f, 0.2f});
  add_wall_block(h2, 2.5f, 3.2f, 3.5f, 3.3f);
  CHECK_FALSE(judge_done(pose_at(3.0f, 3.0f, 0.0f), h2, spec, lo));

  // Stretch: 1.5 m away succeeds at d=2
  TaskSpec st;
  st.target_class = 0;
  st.success_distance_m = 2.0f;
  CHECK(judge_done(pose_at(3.0f, 2.0f, 0.0f), h, spec, st));
}

TEST_CASE("task sampler rejects degenerate starts and guarantees solvability") {
  SimConfig sim;
  sim.object_classes = 5;
  House h = generate_house(sim, 5);
  auto spec = raster();
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    TaskSpec t = sample_task(h, sim, spec, Embodiment::kLoCoBot, rng);
    CHECK_FALSE(judge_done(t.start, h, spec, t));
    CHECK(t.max_steps == 500);
    CHECK(t.success_distance_m == doctest::Approx(1.0f));
  }
  // deterministic given the rng state
  Rng r1(9), r2(9);
  TaskSpec a = sample_task(h, sim, spec, Embodiment::kLoCoBot, r1);
  TaskSpec b = sample_task(h, sim, spec, Embodiment::kLoCoBot, r2);
  CHECK(a.target_class == b.target_class);
  CHECK(a.start.x == b.start.x);
  CHECK(a.start.yaw_deg == b.start.yaw_deg);
}

TEST_CASE("environment: episode flow, reward accounting, action validation") {
  SimConfig sim;
  sim.object_classes = 5;
  auto house = std::make_shared<House>(generate_house(sim, 21));
  auto spec = raster();
  Rng rng(3);
  TaskSpec task = sample_task(*house, sim, spec, Embodiment::kLoCoBot, rng);

  NavEnv env(sim, spec, Embodiment::kLoCoBot);
  env.reset(house, task);
  CHECK(env.episode_active());
  CHECK_THROWS_AS(env.step(Action::kMoveBack), ArgumentError);  // not in LoCoBot space

  auto obs = env.observe();
  CHECK(obs.height == spec.height);
  auto g = env.goal(GoalMode::kCategory);
  CHECK(g.category == task.target_class);
  CHECK_FALSE(g.bbox.has_value());

  auto r1 = env.step(Action::kRotateRight);
  CHECK(r1.reward >= kStepPenalty - 1e-9);  // rotation cannot lose distance
  CHECK_FALSE(r1.done);

  // issuing Done ends the episode
  auto r2 = env.step(Action::kDone);
  CHECK(r2.done);
  CHECK_FALSE(env.episode_active());
}
