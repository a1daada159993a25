#include "navrl/sim/world.hpp"

#include <algorithm>
#include <cmath>

#include "navrl/sim/planner.hpp"

namespace navrl {

namespace {

constexpr float kDeg2Rad = 3.14159265358979323846f / 180.0f;
constexpr float kRad2Deg = 180.0f / 3.14159265358979323846f;

float normalize_yaw(float yaw) {
  while (yaw >= 360.0f) yaw -= 360.0f;
  while (yaw < 0.0f) yaw += 360.0f;
  return yaw;
}

// Signed smallest angular difference a-b in degrees.
float angle_diff(float a, float b) {
  float d = std::fmod(a - b + 540.0f, 360.0f) - 180.0f;
  return d;
}

// Distance to the first wall along the ray, capped at max_range (DDA).
float raycast_walls(const House& house, float ox, float oy, float dx, float dy,
                    float max_range) {
  const float cell = house.cell_m;
  int cx = house.cell_of(ox);
  int cy = house.cell_of(oy);
  if (house.wall_at(cx, cy)) return 0.0f;
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  const float inv_dx = dx != 0.0f ? 1.0f / dx : std::numeric_limits<float>::infinity();
  const float inv_dy = dy != 0.0f ? 1.0f / dy : std::numeric_limits<float>::infinity();
  float t_max_x = dx != 0.0f
                      ? ((dx > 0 ? (cx + 1) * cell : cx * cell) - ox) * inv_dx
                      : std::numeric_limits<float>::infinity();
  float t_max_y = dy != 0.0f
                      ? ((dy > 0 ? (cy + 1) * cell : cy * cell) - oy) * inv_dy
                      : std::numeric_limits<float>::infinity();
  const float t_delta_x = dx != 0.0f ? cell * std::abs(inv_dx)
                                     : std::numeric_limits<float>::infinity();
  const float t_delta_y = dy != 0.0f ? cell * std::abs(inv_dy)
                                     : std::numeric_limits<float>::infinity();
  float t = 0.0f;
  while (t <= max_range) {
    if (t_max_x < t_max_y) {
      cx += step_x;
      t = t_max_x;
      t_max_x += t_delta_x;
    } else {
      cy += step_y;
      t = t_max_y;
      t_max_y += t_delta_y;
    }
    if (t > max_range) break;
    if (house.wall_at(cx, cy)) return t;
  }
  return max_range;
}

struct RayHit {
  float t = 0.0f;
  int instance = -1;  // -1 = wall
  float height = 0.0f;
};

// First intersection of the ray with an object disc, if any.
bool ray_disc(float ox, float oy, float dx, float dy, const ObjectInstance& o, float* t_out) {
  const float mx = o.x - ox;
  const float my = o.y - oy;
  const float b = mx * dx + my * dy;
  const float c = mx * mx + my * my - o.radius * o.radius;
  if (c <= 0.0f) {  // origin inside the disc
    *t_out = 0.02f;
    return true;
  }
  if (b <= 0.0f) return false;
  const float disc = b * b - c;
  if (disc < 0.0f) return false;
  const float t = b - std::sqrt(disc);
  if (t <= 0.0f) return false;
  *t_out = t;
  return true;
}

}  // namespace

float object_height(int class_id) {
  static const float kHeights[4] = {0.5f, 0.75f, 1.0f, 1.25f};
  return kHeights[class_id % 4];
}

std::string to_string(Action a) {
  switch (a) {
    case Action::kMoveAhead: return "MoveAhead";
    case Action::kMoveBack: return "MoveBack";
    case Action::kRotateRight: return "RotateRight";
    case Action::kRotateLeft: return "RotateLeft";
    case Action::kRotateRightSmall: return "RotateRightSmall";
    case Action::kRotateLeftSmall: return "RotateLeftSmall";
    case Action::kLookUp: return "LookUp";
    case Action::kLookDown: return "LookDown";
    case Action::kDone: return "Done";
  }
  return "?";
}

Action action_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Action::kDone); ++i)
    if (to_string(static_cast<Action>(i)) == s) return static_cast<Action>(i);
  throw ArgumentError("unknown action '" + s + "'");
}

const std::vector<Action>& action_set(Embodiment e) {
  static const std::vector<Action> locobot = {Action::kMoveAhead,  Action::kRotateRight,
                                              Action::kRotateLeft, Action::kLookUp,
                                              Action::kLookDown,   Action::kDone};
  static const std::vector<Action> stretch = {
      Action::kMoveAhead,        Action::kMoveBack,        Action::kRotateRight,
      Action::kRotateLeft,       Action::kRotateRightSmall, Action::kRotateLeftSmall,
      Action::kDone};
  return e == Embodiment::kLoCoBot ? locobot : stretch;
}

bool pose_collides(const House& house, float x, float y, float radius) {
  const float cell = house.cell_m;
  const int x0 = house.cell_of(x - radius);
  const int x1 = house.cell_of(x + radius);
  const int y0 = house.cell_of(y - radius);
  const int y1 = house.cell_of(y + radius);
  for (int cy = y0; cy <= y1; ++cy)
    for (int cx = x0; cx <= x1; ++cx) {
      if (!house.wall_at(cx, cy)) continue;
      // disc vs filled cell square
      const float qx = std::clamp(x, cx * cell, (cx + 1) * cell);
      const float qy = std::clamp(y, cy * cell, (cy + 1) * cell);
      const float dx = x - qx, dy = y - qy;
      if (dx * dx + dy * dy <= radius * radius) return true;
    }
  for (const auto& o : house.objects) {
    const float dx = x - o.x, dy = y - o.y;
    const float rr = radius + o.radius;
    if (dx * dx + dy * dy <= rr * rr) return true;
  }
  return false;
}

StepOutcome apply_action(const AgentPose& pose, Action action, const House& house,
                         const EpisodeProfile& profile) {
  StepOutcome out;
  out.pose = pose;
  switch (action) {
    case Action::kMoveAhead:
    case Action::kMoveBack: {
      const float sign = action == Action::kMoveAhead ? 1.0f : -1.0f;
      const float yaw = pose.yaw_deg * kDeg2Rad;
      const float dx = sign * std::sin(yaw);
      const float dy = sign * std::cos(yaw);
      const float dist = profile.move_magnitude_m;
      // swept-disc cast: march fine samples, keep the last clear position
      const float sample = house.cell_m * 0.5f;
      const int n = std::max(1, static_cast<int>(std::ceil(dist / sample)));
      float cleared = 0.0f;
      bool hit = false;
      for (int i = 1; i <= n; ++i) {
        const float t = dist * static_cast<float>(i) / n;
        if (pose_collides(house, pose.x + dx * t, pose.y + dy * t, pose.body_radius_m)) {
          hit = true;
          break;
        }
        cleared = t;
      }
      out.pose.x = pose.x + dx * cleared;
      out.pose.y = pose.y + dy * cleared;
      out.collided = hit;
      break;
    }
    case Action::kRotateRight:
    case Action::kRotateLeft:
    case Action::kRotateRightSmall:
    case Action::kRotateLeftSmall: {
      const bool small = action == Action::kRotateRightSmall || action == Action::kRotateLeftSmall;
      const float mag = small ? profile.rotate_small_deg : profile.rotate_deg;
      const float sign =
          (action == Action::kRotateRight || action == Action::kRotateRightSmall) ? 1.0f : -1.0f;
      const float target = normalize_yaw(pose.yaw_deg + sign * mag);
      // footprint check at the target orientation; a disc cannot overlap
      // anything new, so this only reverts if the pose was already bad
      if (pose_collides(house, pose.x, pose.y, pose.body_radius_m)) {
        out.collided = true;
      } else {
        out.pose.yaw_deg = target;
      }
      break;
    }
    case Action::kLookUp:
    case Action::kLookDown: {
      const float sign = action == Action::kLookUp ? 1.0f : -1.0f;
      const float target = pose.pitch_deg + sign * profile.pitch_deg;
      if (target >= -profile.pitch_deg - 0.001f && target <= profile.pitch_deg + 0.001f)
        out.pose.pitch_deg = target;
      break;
    }
    case Action::kDone:
      break;
  }
  return out;
}

Observation render_observation(const AgentPose& pose, const House& house,
                               const RasterSpec& spec, std::vector<int>* ids_out) {
  Observation obs = Observation::zeros(spec.height, spec.width, spec.channels());
  if (ids_out) ids_out->assign(static_cast<size_t>(spec.height) * spec.width, -1);

  const float top_e = pose.pitch_deg + spec.vfov_deg * 0.5f;
  const float row_step = spec.vfov_deg / spec.height;
  const float cam = spec.camera_height_m;

  auto paint = [&](int col, float e_lo, float e_hi, int channel, int instance) {
    if (e_hi < e_lo) return;
    int y0 = static_cast<int>(std::ceil((top_e - e_hi) / row_step - 0.5f));
    int y1 = static_cast<int>(std::floor((top_e - e_lo) / row_step - 0.5f));
    y0 = std::max(y0, 0);
    y1 = std::min(y1, spec.height - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int c = 0; c < obs.channels; ++c) obs.at(y, col, c) = 0.0f;
      if (channel >= 0) obs.at(y, col, channel) = 1.0f;
      if (ids_out) (*ids_out)[static_cast<size_t>(y) * spec.width + col] = instance;
    }
  };

  auto elev = [&](float h, float t) { return std::atan2(h - cam, std::max(t, 1e-4f)) * kRad2Deg; };

  for (int col = 0; col < spec.width; ++col) {
    const float az =
        pose.yaw_deg - spec.fov_deg * 0.5f + spec.fov_deg * (col + 0.5f) / spec.width;
    const float dx = std::sin(az * kDeg2Rad);
    const float dy = std::cos(az * kDeg2Rad);
    const float t_wall = raycast_walls(house, pose.x, pose.y, dx, dy, spec.max_range_m);
    const bool wall_hit = t_wall < spec.max_range_m;

    std::vector<RayHit> hits;
    for (size_t i = 0; i < house.objects.size(); ++i) {
      float t;
      if (ray_disc(pose.x, pose.y, dx, dy, house.objects[i], &t) && t < t_wall &&
          t <= spec.max_range_m)
        hits.push_back(RayHit{t, static_cast<int>(i), object_height(house.objects[i].class_id)});
    }
    std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
      return a.t > b.t;  // far to near
    });

    float prev_t = wall_hit ? t_wall : spec.max_range_m;
    if (wall_hit)
      paint(col, elev(0.0f, t_wall), elev(spec.wall_height_m, t_wall), 1, -1);
    else
      paint(col, elev(0.0f, spec.max_range_m), elev(0.0f, spec.max_range_m), 0, -1);
    for (const auto& hit : hits) {
      // floor strip between this hit and the previous (farther) one
      paint(col, elev(0.0f, hit.t), elev(0.0f, prev_t), 0, -1);
      const int channel = 2 + house.objects[static_cast<size_t>(hit.instance)].class_id;
      paint(col, elev(0.0f, hit.t), elev(hit.height, hit.t), channel, hit.instance);
      prev_t = hit.t;
    }
    // floor from the agent to the nearest hit
    paint(col, -90.0f, elev(0.0f, prev_t), 0, -1);
  }
  return obs;
}

std::optional<BBox> project_bbox(const AgentPose& pose, const House& house,
                                 const RasterSpec& spec, int class_id) {
  std::vector<int> ids;
  render_observation(pose, house, spec, &ids);

  // nearest instance of the class with at least one visible pixel
  int best = -1;
  float best_d2 = std::numeric_limits<float>::max();
  std::vector<uint8_t> seen(house.objects.size(), 0);
  for (int idx : ids)
    if (idx >= 0) seen[static_cast<size_t>(idx)] = 1;
  for (size_t i = 0; i < house.objects.size(); ++i) {
    if (!seen[i] || house.objects[i].class_id != class_id) continue;
    const float dx = house.objects[i].x - pose.x;
    const float dy = house.objects[i].y - pose.y;
    const float d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) return std::nullopt;

  int min_x = spec.width, max_x = -1, min_y = spec.height, max_y = -1;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (ids[static_cast<size_t>(y) * spec.width + x] == best) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  BBox box;
  box.x1 = static_cast<float>(min_x) / spec.width;
  box.x2 = static_cast<float>(max_x + 1) / spec.width;
  box.y1 = static_cast<float>(min_y) / spec.height;
  box.y2 = static_cast<float>(max_y + 1) / spec.height;
  box.area = (box.x2 - box.x1) * (box.y2 - box.y1);
  return box;
}

bool instance_visible(const AgentPose& pose, const House& house, const RasterSpec& spec,
                      int instance_index) {
  const auto& o = house.objects[static_cast<size_t>(instance_index)];
  const float dx = o.x - pose.x;
  const float dy = o.y - pose.y;
  const float dist = std::sqrt(dx * dx + dy * dy);
  if (dist < 1e-4f) return true;
  const float az = std::atan2(dx, dy) * kRad2Deg;
  if (std::abs(angle_diff(az, pose.yaw_deg)) > spec.fov_deg * 0.5f) return false;
  const float ux = dx / dist, uy = dy / dist;
  if (raycast_walls(house, pose.x, pose.y, ux, uy, dist) < dist - 1e-4f) return false;
  for (size_t i = 0; i < house.objects.size(); ++i) {
    if (static_cast<int>(i) == instance_index) continue;
    float t;
    if (ray_disc(pose.x, pose.y, ux, uy, house.objects[i], &t) && t < dist - 1e-4f)
      return false;
  }
  return true;
}

float l2_target_distance(const AgentPose& pose, const House& house, int class_id) {
  float best = std::numeric_limits<float>::max();
  for (const auto& o : house.objects) {
    if (o.class_id != class_id) continue;
    const float dx = o.x - pose.x, dy = o.y - pose.y;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

bool judge_done(const AgentPose& pose, const House& house, const RasterSpec& spec,
                const TaskSpec& task) {
  for (size_t i = 0; i < house.objects.size(); ++i) {
    const auto& o = house.objects[i];
    if (o.class_id != task.target_class) continue;
    const float dx = o.x - pose.x, dy = o.y - pose.y;
    if (std::sqrt(dx * dx + dy * dy) > task.success_distance_m) continue;
    if (instance_visible(pose, house, spec, static_cast<int>(i))) return true;
  }
  return false;
}

TaskSpec sample_task(const House& house, const SimConfig& sim, const RasterSpec& spec,
                     Embodiment embodiment, Rng& rng) {
  const EpisodeProfile profile = episode_profile(embodiment);
  const auto traversable = traversable_map(house, sim.body_radius_m);
  std::vector<std::pair<int, int>> open;
  for (int y = 0; y < house.height; ++y)
    for (int x = 0; x < house.width; ++x)
      if (traversable[static_cast<size_t>(y) * house.width + x]) open.emplace_back(x, y);
  if (open.empty()) throw GenerationError("house has no traversable cell");

  for (int tries = 0; tries < 400; ++tries) {
    TaskSpec task;
    task.house_seed = house.seed;
    task.embodiment = embodiment;
    task.max_steps = profile.max_steps;
    task.success_distance_m = profile.success_distance_m;
    task.target_class = static_cast<int>(rng.below(static_cast<uint64_t>(sim.object_classes)));
    const auto [cx, cy] = open[rng.below(open.size())];
    task.start.x = house.center_of(cx);
    task.start.y = house.center_of(cy);
    task.start.yaw_deg = 30.0f * static_cast<float>(rng.below(12));
    task.start.pitch_deg = 0.0f;
    task.start.body_radius_m = sim.body_radius_m;
    if (judge_done(task.start, house, spec, task)) continue;  // degenerate start
    const double l = geodesic_to_success(house, sim, spec, task);
    if (!std::isfinite(l)) continue;
    return task;
  }
  throw GenerationError("no valid task found in house " + std::to_string(house.seed));
}

void NavEnv::reset(std::shared_ptr<const House> house, const TaskSpec& task) {
  house_ = std::move(house);
  task_ = task;
  pose_ = task.start;
  steps_ = 0;
  path_len_ = 0.0;
  active_ = true;
  view_fresh_ = false;
  reward_state_ =
      RewardState::at_start(l2_target_distance(pose_, *house_, task_.target_class));
}

void NavEnv::refresh_view() {
  if (view_fresh_) return;
  view_ = render_observation(pose_, *house_, spec_, &view_ids_);
  view_fresh_ = true;
}

const Observation& NavEnv::observe() {
  refresh_view();
  return view_;
}

GoalSpec NavEnv::goal(GoalMode mode) {
  GoalSpec g;
  if (mode != GoalMode::kBBox) g.category = task_.target_class;
  if (mode != GoalMode::kCategory) {
    refresh_view();
    // reuse the id raster of the current view
    int best = -1;
    float best_d2 = std::numeric_limits<float>::max();
    std::vector<uint8_t> seen(house_->objects.size(), 0);
    for (int idx : view_ids_)
      if (idx >= 0) seen[static_cast<size_t>(idx)] = 1;
    for (size_t i = 0; i < house_->objects.size(); ++i) {
      if (!seen[i] || house_->objects[i].class_id != task_.target_class) continue;
      const float dx = house_->objects[i].x - pose_.x;
      const float dy = house_->objects[i].y - pose_.y;
      if (dx * dx + dy * dy < best_d2) {
        best_d2 = dx * dx + dy * dy;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      int min_x = spec_.width, max_x = -1, min_y = spec_.height, max_y = -1;
      for (int y = 0; y < spec_.height; ++y)
        for (int x = 0; x < spec_.width; ++x)
          if (view_ids_[static_cast<size_t>(y) * spec_.width + x] == best) {
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
          }
      BBox box;
      box.x1 = static_cast<float>(min_x) / spec_.width;
      box.x2 = static_cast<float>(max_x + 1) / spec_.width;
      box.y1 = static_cast<float>(min_y) / spec_.height;
      box.y2 = static_cast<float>(max_y + 1) / spec_.height;
      box.area = (box.x2 - box.x1) * (box.y2 - box.y1);
      g.bbox = box;
    }
  }
  return g;
}

NavEnv::StepResult NavEnv::step(Action a) {
  if (!active_) throw ArgumentError("step on an inactive episode");
  const auto& acts = action_set(embodiment_);
  if (std::find(acts.begin(), acts.end(), a) == acts.end())
    throw ArgumentError("action " + navrl::to_string(a) + " not in the " +
                        navrl::to_string(embodiment_) + " action space");

  StepResult res;
  const AgentPose before = pose_;
  const StepOutcome outcome = apply_action(pose_, a, *house_, profile_);
  pose_ = outcome.pose;
  res.collided = outcome.collided;
  const float dx = pose_.x - before.x, dy = pose_.y - before.y;
  path_len_ += std::sqrt(dx * dx + dy * dy);
  ++steps_;
  view_fresh_ = false;

  if (a == Action::kDone) {
    res.success = judge_done(pose_, *house_, spec_, task_);
    res.done = true;
  } else if (steps_ >= task_.max_steps) {
    res.done = true;
  }
  const double dist = l2_target_distance(pose_, *house_, task_.target_class);
  const auto shaped = shape_reward(reward_state_, dist, res.success);
  reward_state_ = shaped.next;
  res.reward = shaped.reward;
  if (res.done) active_ = false;
  return res;
}

}  // namespace navrl
