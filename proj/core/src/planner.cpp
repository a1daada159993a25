#include "navrl/sim/planner.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <queue>

#include "navrl/sim/world.hpp"

namespace navrl {

std::vector<uint8_t> traversable_map(const House& house, float body_radius_m) {
  std::vector<uint8_t> out(static_cast<size_t>(house.width) * house.height, 0);
  for (int y = 0; y < house.height; ++y)
    for (int x = 0; x < house.width; ++x)
      if (!pose_collides(house, house.center_of(x), house.center_of(y), body_radius_m))
        out[static_cast<size_t>(y) * house.width + x] = 1;
  return out;
}

namespace {

struct DijkstraNode {
  double dist;
  int cell;
  bool operator>(const DijkstraNode& o) const { return dist > o.dist; }
};

// Single-source metric distances until `stop` returns true for a settled
// cell; returns that cell's distance, or infinity.
double dijkstra_until(const House& house, const std::vector<uint8_t>& open, int start_cell,
                      const std::function<bool(int)>& stop) {
  const int w = house.width, h = house.height;
  const double straight = house.cell_m;
  const double diagonal = house.cell_m * std::sqrt(2.0);
  std::vector<double> dist(static_cast<size_t>(w) * h, kUnreachable);
  std::priority_queue<DijkstraNode, std::vector<DijkstraNode>, std::greater<>> pq;
  if (!open[static_cast<size_t>(start_cell)]) return kUnreachable;
  dist[static_cast<size_t>(start_cell)] = 0.0;
  pq.push({0.0, start_cell});
  while (!pq.empty()) {
    const auto top = pq.top();
    pq.pop();
    if (top.dist > dist[static_cast<size_t>(top.cell)]) continue;
    if (stop(top.cell)) return top.dist;
    const int cx = top.cell % w;
    const int cy = top.cell / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int nc = ny * w + nx;
        if (!open[static_cast<size_t>(nc)]) continue;
        // no corner cutting through blocked cells
        if (dx != 0 && dy != 0) {
          if (!open[static_cast<size_t>(cy) * w + nx] ||
              !open[static_cast<size_t>(ny) * w + cx])
            continue;
        }
        const double nd = top.dist + ((dx != 0 && dy != 0) ? diagonal : straight);
        if (nd < dist[static_cast<size_t>(nc)]) {
          dist[static_cast<size_t>(nc)] = nd;
          pq.push({nd, nc});
        }
      }
  }
  return kUnreachable;
}

}  // namespace

double shortest_path(const House& house, float from_x, float from_y, float to_x, float to_y,
                     float body_radius_m) {
  const auto open = traversable_map(house, body_radius_m);
  const int start = house.cell_of(from_y) * house.width + house.cell_of(from_x);
  const int goal = house.cell_of(to_y) * house.width + house.cell_of(to_x);
  if (start < 0 || goal < 0 || start >= static_cast<int>(open.size()) ||
      goal >= static_cast<int>(open.size()))
    return kUnreachable;
  if (start == goal) return 0.0;
  return dijkstra_until(house, open, start, [goal](int c) { return c == goal; });
}

std::vector<uint8_t> success_cells(const House& house, const SimConfig& sim,
                                   const RasterSpec& spec, const TaskSpec& task) {
  const auto open = traversable_map(house, sim.body_radius_m);
  std::vector<uint8_t> out(open.size(), 0);
  const float d = task.success_distance_m;
  for (size_t i = 0; i < house.objects.size(); ++i) {
    const auto& o = house.objects[i];
    if (o.class_id != task.target_class) continue;
    const int x0 = std::max(0, house.cell_of(o.x - d));
    const int x1 = std::min(house.width - 1, house.cell_of(o.x + d));
    const int y0 = std::max(0, house.cell_of(o.y - d));
    const int y1 = std::min(house.height - 1, house.cell_of(o.y + d));
    for (int cy = y0; cy <= y1; ++cy)
      for (int cx = x0; cx <= x1; ++cx) {
        const size_t idx = static_cast<size_t>(cy) * house.width + cx;
        if (!open[idx] || out[idx]) continue;
        AgentPose p;
        p.x = house.center_of(cx);
        p.y = house.center_of(cy);
        p.body_radius_m = sim.body_radius_m;
        const float dx = o.x - p.x, dy = o.y - p.y;
        if (std::sqrt(dx * dx + dy * dy) > d) continue;
        // yaw is free for the distance metric: only the ray must be clear
        p.yaw_deg = std::atan2(dx, dy) * 180.0f / 3.14159265358979323846f;
        if (p.yaw_deg < 0) p.yaw_deg += 360.0f;
        if (instance_visible(p, house, spec, static_cast<int>(i))) out[idx] = 1;
      }
  }
  return out;
}

double geodesic_to_success(const House& house, const SimConfig& sim, const RasterSpec& spec,
                           const TaskSpec& task) {
  const auto open = traversable_map(house, sim.body_radius_m);
  const auto success = success_cells(house, sim, spec, task);
  const int start =
      house.cell_of(task.start.y) * house.width + house.cell_of(task.start.x);
  if (start < 0 || start >= static_cast<int>(open.size())) return kUnreachable;
  if (success[static_cast<size_t>(start)]) return 0.0;
  return dijkstra_until(house, open, start,
                        [&success](int c) { return success[static_cast<size_t>(c)] != 0; });
}

int expert_steps(const House& house, const SimConfig& sim, const RasterSpec& spec,
                 const TaskSpec& task) {
  const EpisodeProfile profile = episode_profile(task.embodiment);
  const auto& actions = action_set(task.embodiment);
  // yaw buckets at the finest rotation granularity
  const float bucket_deg =
      task.embodiment == Embodiment::kStretch ? profile.rotate_small_deg : profile.rotate_deg;
  const int buckets = static_cast<int>(std::lround(360.0f / bucket_deg));
  const int w = house.width, h = house.height;
  const size_t states = static_cast<size_t>(w) * h * buckets;

  auto state_of = [&](const AgentPose& p) -> int64_t {
    const int cx = house.cell_of(p.x);
    const int cy = house.cell_of(p.y);
    if (cx < 0 || cy < 0 || cx >= w || cy >= h) return -1;
    int b = static_cast<int>(std::lround(p.yaw_deg / bucket_deg)) % buckets;
    if (b < 0) b += buckets;
    return (static_cast<int64_t>(cy) * w + cx) * buckets + b;
  };
  auto pose_of = [&](int64_t s) {
    AgentPose p;
    const int b = static_cast<int>(s % buckets);
    const int cell = static_cast<int>(s / buckets);
    p.x = house.center_of(cell % w);
    p.y = house.center_of(cell / w);
    p.yaw_deg = b * bucket_deg;
    p.body_radius_m = sim.body_radius_m;
    return p;
  };

  std::vector<int32_t> depth(states, -1);
  std::deque<int64_t> queue;

  // The continuous start pose seeds the search with its exact judge result.
  if (judge_done(task.start, house, spec, task)) return 1;  // Done only
  const int64_t s0 = state_of(task.start);
  if (s0 < 0) return -1;
  depth[static_cast<size_t>(s0)] = 0;
  queue.push_back(s0);

  while (!queue.empty()) {
    const int64_t s = queue.front();
    queue.pop_front();
    const int32_t g = depth[static_cast<size_t>(s)];
    if (g >= task.max_steps) continue;
    const AgentPose pose = pose_of(s);
    for (Action a : actions) {
      if (a == Action::kDone || a == Action::kLookUp || a == Action::kLookDown) continue;
      const StepOutcome out = apply_action(pose, a, house, profile);
      const int64_t ns = state_of(out.pose);
      if (ns < 0 || depth[static_cast<size_t>(ns)] >= 0) continue;
      depth[static_cast<size_t>(ns)] = g + 1;
      if (judge_done(out.pose, house, spec, task)) return g + 2;  // moves + Done
      queue.push_back(ns);
    }
  }
  return -1;
}

}  // namespace navrl
