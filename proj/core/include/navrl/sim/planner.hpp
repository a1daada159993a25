#pragma once

#include <limits>
#include <vector>

#include "navrl/sim/house.hpp"

namespace navrl {

struct RasterSpec;
struct TaskSpec;

// Cell is traversable when the body disc centered at the cell center clears
// all walls and objects.
std::vector<uint8_t> traversable_map(const House& house, float body_radius_m);

// Metric shortest path between two points over the traversable grid
// (8-connected, diagonal = cell * sqrt(2)). Infinity when unreachable.
double shortest_path(const House& house, float from_x, float from_y, float to_x, float to_y,
                     float body_radius_m);

// Cells from which issuing Done would succeed (within distance, target ray
// unoccluded; yaw is free since rotating in place costs no distance).
std::vector<uint8_t> success_cells(const House& house, const SimConfig& sim,
                                   const RasterSpec& spec, const TaskSpec& task);

// Geodesic distance from the task start to the nearest success cell.
double geodesic_to_success(const House& house, const SimConfig& sim, const RasterSpec& spec,
                           const TaskSpec& task);

// Minimum action count to a success-judged state, including the final Done.
// Breadth-first search over (cell, yaw bucket) with the embodiment's moves;
// camera pitch is ignored (it never affects the judge). Returns -1 when no
// plan exists within the step limit.
int expert_steps(const House& house, const SimConfig& sim, const RasterSpec& spec,
                 const TaskSpec& task);

constexpr double kUnreachable = std::numeric_limits<double>::infinity();

}  // namespace navrl
