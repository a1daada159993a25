#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navrl/common.hpp"
#include "navrl/config.hpp"

namespace navrl {

// Cell-indexed axis-aligned rectangle, half-open [x0, x1) x [y0, y1).
struct CellRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

enum class RoomKind : uint8_t { kLiving = 0, kKitchen, kBedroom, kBathroom, kOffice };

struct Room {
  CellRect rect;  // interior (floor) cells
  RoomKind kind = RoomKind::kLiving;
};

struct ObjectInstance {
  int class_id = 0;
  float x = 0.0f, y = 0.0f;  // meters
  float radius = 0.0f;       // footprint, meters
};

// Procedural multi-room world: occupancy grid for walls, room rectangles,
// object discs. Immutable after generation; shareable read-only.
struct House {
  uint64_t seed = 0;
  float cell_m = 0.05f;
  int width = 0, height = 0;  // cells
  std::vector<uint8_t> walls;  // width*height, 1 = wall
  std::vector<Room> rooms;
  std::vector<ObjectInstance> objects;

  bool in_bounds(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < width && cy < height;
  }
  bool wall_at(int cx, int cy) const {
    if (!in_bounds(cx, cy)) return true;
    return walls[static_cast<size_t>(cy) * width + cx] != 0;
  }
  float width_m() const { return width * cell_m; }
  float height_m() const { return height * cell_m; }
  int cell_of(float m) const { return static_cast<int>(std::floor(m / cell_m)); }
  float center_of(int c) const { return (c + 0.5f) * cell_m; }

  // Object covering a point (distance from disc center <= radius).
  bool object_at(float x, float y, int skip_instance = -1) const {
    for (size_t i = 0; i < objects.size(); ++i) {
      if (static_cast<int>(i) == skip_instance) continue;
      const auto& o = objects[i];
      const float dx = x - o.x, dy = y - o.y;
      if (dx * dx + dy * dy <= o.radius * o.radius) return true;
    }
    return false;
  }
};

// Deterministic in (cfg, seed, room_count_range). Guarantees: connected free
// space (flood-fill verified), at least one instance of every object class,
// objects clear of walls and of each other.
House generate_house(const SimConfig& cfg, uint64_t seed, int room_count_min,
                     int room_count_max);

inline House generate_house(const SimConfig& cfg, uint64_t seed) {
  return generate_house(cfg, seed, cfg.room_count_min, cfg.room_count_max);
}

// Free = not wall, not covered by an object. Every free cell reachable from
// every other (4-connectivity).
bool house_connected(const House& house);

// Versioned binary container; identical houses serialize byte-identically.
void save_house(const House& house, const std::string& path);
House load_house(const std::string& path);
std::vector<uint8_t> house_to_bytes(const House& house);
House house_from_bytes(const std::vector<uint8_t>& bytes);

bool houses_equal(const House& a, const House& b);

}  // namespace navrl
