#pragma once

#include <memory>
#include <string>
#include <vector>

#include "navrl/config.hpp"
#include "navrl/reward.hpp"
#include "navrl/sim/house.hpp"
#include "navrl/types.hpp"

namespace navrl {

// ---------------------------------------------------------------------------
// Actions and poses. Yaw 0 faces +y and grows clockwise, so MoveAhead from
// yaw 0 increases y. Pitch only swivels the camera.
// ---------------------------------------------------------------------------

enum class Action : uint8_t {
  kMoveAhead = 0,
  kMoveBack,
  kRotateRight,
  kRotateLeft,
  kRotateRightSmall,
  kRotateLeftSmall,
  kLookUp,
  kLookDown,
  kDone
};

std::string to_string(Action a);
Action action_from_string(const std::string& s);

// Discrete action spaces per embodiment (6 for LoCoBot, 7 for Stretch).
const std::vector<Action>& action_set(Embodiment e);

struct AgentPose {
  float x = 0.0f, y = 0.0f;     // meters
  float yaw_deg = 0.0f;         // [0, 360)
  float pitch_deg = 0.0f;       // {-30, 0, 30} for LoCoBot, 0 for Stretch
  float body_radius_m = 0.18f;
};

struct StepOutcome {
  AgentPose pose;
  bool collided = false;
};

// Disc overlap against wall cells (treated as filled squares) and object
// discs.
bool pose_collides(const House& house, float x, float y, float radius);

// Teleport with collision check: sweep the body disc along the motion
// segment; stop at the last clear sample on contact. Rotations test the
// target orientation's footprint and revert on overlap (a disc footprint
// cannot actually collide by rotating, but the check stays in the path).
StepOutcome apply_action(const AgentPose& pose, Action action, const House& house,
                         const EpisodeProfile& profile);

// ---------------------------------------------------------------------------
// First-person rendering: W columns of rays across the horizontal FOV,
// rows mapped to elevation bands around the camera pitch. Painter order is
// far-to-near, so closer hits occlude. ids carries the object instance per
// pixel (-1 none) for ground-truth boxes.
// ---------------------------------------------------------------------------

struct RasterSpec {
  int height = 56;
  int width = 56;
  int classes = 8;  // channels = classes + 2
  float fov_deg = 90.0f;
  float vfov_deg = 90.0f;
  float camera_height_m = 0.8f;
  float wall_height_m = 2.0f;
  float max_range_m = 8.0f;

  int channels() const { return classes + 2; }
  static RasterSpec from(const ModelConfig& m, const SimConfig& s) {
    RasterSpec r;
    r.height = m.obs_height;
    r.width = m.obs_width;
    r.classes = m.object_classes;
    r.fov_deg = s.fov_deg;
    r.vfov_deg = s.vfov_deg;
    r.camera_height_m = s.camera_height_m;
    r.wall_height_m = s.wall_height_m;
    r.max_range_m = s.max_range_m;
    return r;
  }
};

// Per-class physical height used by the renderer and box projection.
float object_height(int class_id);

Observation render_observation(const AgentPose& pose, const House& house,
                               const RasterSpec& spec, std::vector<int>* ids_out = nullptr);

// Ground-truth box of the nearest visible instance of class_id in the
// current view; absent when unseen or fully occluded. Consistent with
// render_observation by construction (built from the same id raster).
std::optional<BBox> project_bbox(const AgentPose& pose, const House& house,
                                 const RasterSpec& spec, int class_id);

// Unoccluded center ray within the horizontal FOV.
bool instance_visible(const AgentPose& pose, const House& house, const RasterSpec& spec,
                      int instance_index);

// ---------------------------------------------------------------------------
// Tasks and episodes.
// ---------------------------------------------------------------------------

struct TaskSpec {
  uint64_t house_seed = 0;
  int target_class = 0;
  AgentPose start;
  int max_steps = 500;
  float success_distance_m = 1.0f;
  Embodiment embodiment = Embodiment::kLoCoBot;
};

// Straight-line distance to the nearest instance of the class.
float l2_target_distance(const AgentPose& pose, const House& house, int class_id);

// Done issued: success iff within d of a target instance that is also
// visible. Pure in (pose, house, task).
bool judge_done(const AgentPose& pose, const House& house, const RasterSpec& spec,
                const TaskSpec& task);

// Rejects starts that already satisfy success and starts with no collision-
// free route to a success region. Throws GenerationError when the house
// admits no valid task after bounded tries.
TaskSpec sample_task(const House& house, const SimConfig& sim, const RasterSpec& spec,
                     Embodiment embodiment, Rng& rng);

// Single-worker episode environment; owns pose, step budget and reward state.
class NavEnv {
 public:
  NavEnv(const SimConfig& sim, const RasterSpec& spec, Embodiment embodiment)
      : sim_(sim), spec_(spec), profile_(episode_profile(embodiment)),
        embodiment_(embodiment) {}

  void reset(std::shared_ptr<const House> house, const TaskSpec& task);

  const Observation& observe();
  GoalSpec goal(GoalMode mode);

  struct StepResult {
    double reward = 0.0;
    bool done = false;
    bool success = false;
    bool collided = false;
  };
  StepResult step(Action a);

  const AgentPose& pose() const { return pose_; }
  const TaskSpec& task() const { return task_; }
  const House& house() const { return *house_; }
  int steps() const { return steps_; }
  double path_length_m() const { return path_len_; }
  bool episode_active() const { return active_; }
  const EpisodeProfile& profile() const { return profile_; }
  Embodiment embodiment() const { return embodiment_; }

 private:
  void refresh_view();

  SimConfig sim_;
  RasterSpec spec_;
  EpisodeProfile profile_;
  Embodiment embodiment_;
  std::shared_ptr<const House> house_;
  TaskSpec task_;
  AgentPose pose_;
  RewardState reward_state_;
  int steps_ = 0;
  double path_len_ = 0.0;
  bool active_ = false;
  Observation view_;
  std::vector<int> view_ids_;
  bool view_fresh_ = false;
};

}  // namespace navrl
