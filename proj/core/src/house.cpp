#include "navrl/sim/house.hpp"

#include <cstring>
#include <deque>
#include <fstream>

namespace navrl {

namespace {

constexpr int kWallThickness = 2;  // cells
constexpr uint32_t kHouseMagic = 0x4e485631;  // "NHV1"
constexpr uint32_t kHouseVersion = 1;

struct SplitLeaf {
  CellRect rect;  // floor cells, exclusive of walls
};

int cells_of(const SimConfig& cfg, float meters) {
  return std::max(1, static_cast<int>(std::lround(meters / cfg.cell_m)));
}

void fill_rect(House& h, const CellRect& r, uint8_t value) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      h.walls[static_cast<size_t>(y) * h.width + x] = value;
}

// Attempts one full layout; returns false when constraints could not be met.
bool try_generate(const SimConfig& cfg, uint64_t seed, int room_min, int room_max,
                  uint64_t attempt, House& out) {
  Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (attempt + 1)));
  const int min_cells = cells_of(cfg, cfg.room_min_m);
  const int max_cells = cells_of(cfg, cfg.room_max_m);
  const int door_cells = cells_of(cfg, cfg.door_width_m);
  const int rooms_target =
      room_min + static_cast<int>(rng.below(static_cast<uint64_t>(room_max - room_min + 1)));

  // Interior sized for the target room count; splits insert 2-cell walls.
  const double avg_side = 0.5 * (min_cells + max_cells);
  const double target_area = rooms_target * avg_side * avg_side * rng.range(1.0, 1.25);
  const double aspect = rng.range(0.7, 1.4);
  int iw = static_cast<int>(std::sqrt(target_area * aspect));
  int ih = static_cast<int>(target_area / std::max(1, iw));
  iw = std::max(iw, min_cells);
  ih = std::max(ih, min_cells);

  House h;
  h.seed = seed;
  h.cell_m = cfg.cell_m;
  h.width = iw + 2 * kWallThickness;
  h.height = ih + 2 * kWallThickness;
  h.walls.assign(static_cast<size_t>(h.width) * h.height, 1);
  fill_rect(h, CellRect{kWallThickness, kWallThickness, kWallThickness + iw,
                        kWallThickness + ih},
            0);

  std::vector<SplitLeaf> leaves = {
      SplitLeaf{CellRect{kWallThickness, kWallThickness, kWallThickness + iw,
                         kWallThickness + ih}}};
  struct DoorEdge {
    size_t a, b;
    bool vertical_wall;  // wall strip parallel to y (split along x)
    int wall_lo;         // strip start coordinate on the split axis
    int lo, hi;          // shared run on the other axis
  };
  std::vector<DoorEdge> edges;

  while (static_cast<int>(leaves.size()) < rooms_target) {
    // split the largest splittable leaf
    int best = -1;
    int64_t best_area = -1;
    for (size_t i = 0; i < leaves.size(); ++i) {
      const auto& r = leaves[i].rect;
      const bool can_x = r.width() >= 2 * min_cells + kWallThickness;
      const bool can_y = r.height() >= 2 * min_cells + kWallThickness;
      if (!can_x && !can_y) continue;
      const int64_t area = static_cast<int64_t>(r.width()) * r.height();
      if (area > best_area) {
        best_area = area;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return false;  // cannot reach the target room count
    CellRect r = leaves[static_cast<size_t>(best)].rect;
    const bool can_x = r.width() >= 2 * min_cells + kWallThickness;
    const bool can_y = r.height() >= 2 * min_cells + kWallThickness;
    const bool split_x = can_x && (!can_y || r.width() >= r.height());
    if (split_x) {
      const int span = r.width() - 2 * min_cells - kWallThickness;
      const int p = r.x0 + min_cells + static_cast<int>(rng.below(static_cast<uint64_t>(span + 1)));
      fill_rect(h, CellRect{p, r.y0, p + kWallThickness, r.y1}, 1);
      const CellRect left{r.x0, r.y0, p, r.y1};
      const CellRect right{p + kWallThickness, r.y0, r.x1, r.y1};
      leaves[static_cast<size_t>(best)].rect = left;
      leaves.push_back(SplitLeaf{right});
      edges.push_back(DoorEdge{static_cast<size_t>(best), leaves.size() - 1, true, p, r.y0, r.y1});
    } else {
      const int span = r.height() - 2 * min_cells - kWallThickness;
      const int p = r.y0 + min_cells + static_cast<int>(rng.below(static_cast<uint64_t>(span + 1)));
      fill_rect(h, CellRect{r.x0, p, r.x1, p + kWallThickness}, 1);
      const CellRect top{r.x0, r.y0, r.x1, p};
      const CellRect bottom{r.x0, p + kWallThickness, r.x1, r.y1};
      leaves[static_cast<size_t>(best)].rect = top;
      leaves.push_back(SplitLeaf{bottom});
      edges.push_back(DoorEdge{static_cast<size_t>(best), leaves.size() - 1, false, p, r.x0, r.x1});
    }
  }

  // carve doors: every recorded split edge gets one (splits form a tree over
  // the final leaves, which keeps the floor connected)
  for (const auto& e : edges) {
    // the shared run may have shrunk by later splits; recompute the overlap
    const CellRect& ra = leaves[e.a].rect;
    const CellRect& rb = leaves[e.b].rect;
    const int lo = e.vertical_wall ? std::max(ra.y0, rb.y0) : std::max(ra.x0, rb.x0);
    const int hi = e.vertical_wall ? std::min(ra.y1, rb.y1) : std::min(ra.x1, rb.x1);
    const int run = hi - lo;
    const int width = std::min(door_cells, std::max(2, run - 2));
    if (run < width) return false;
    const int start = lo + static_cast<int>(rng.below(static_cast<uint64_t>(run - width + 1)));
    if (e.vertical_wall)
      fill_rect(h, CellRect{e.wall_lo, start, e.wall_lo + kWallThickness, start + width}, 0);
    else
      fill_rect(h, CellRect{start, e.wall_lo, start + width, e.wall_lo + kWallThickness}, 0);
  }

  h.rooms.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    Room room;
    room.rect = leaf.rect;
    room.kind = static_cast<RoomKind>(rng.below(5));
    h.rooms.push_back(room);
  }

  // objects: at least one instance of every class; clearance keeps free space
  // connected and leaves the agent room to pass
  const float clear_wall = cfg.body_radius_m * 2.0f + 0.12f;
  for (int cls = 0; cls < cfg.object_classes; ++cls) {
    const int span = cfg.objects_per_class_max - cfg.objects_per_class_min;
    const int count = cfg.objects_per_class_min +
                      (span > 0 ? static_cast<int>(rng.below(static_cast<uint64_t>(span + 1))) : 0);
    for (int k = 0; k < count; ++k) {
      bool placed = false;
      for (int tries = 0; tries < 400 && !placed; ++tries) {
        const auto& room = h.rooms[rng.below(h.rooms.size())];
        const float radius =
            static_cast<float>(rng.range(cfg.object_radius_min_m, cfg.object_radius_max_m));
        const float margin = radius + clear_wall;
        const float rx0 = room.rect.x0 * cfg.cell_m + margin;
        const float rx1 = room.rect.x1 * cfg.cell_m - margin;
        const float ry0 = room.rect.y0 * cfg.cell_m + margin;
        const float ry1 = room.rect.y1 * cfg.cell_m - margin;
        if (rx1 <= rx0 || ry1 <= ry0) continue;
        const float x = static_cast<float>(rng.range(rx0, rx1));
        const float y = static_cast<float>(rng.range(ry0, ry1));
        bool ok = true;
        for (const auto& o : h.objects) {
          const float dx = x - o.x, dy = y - o.y;
          const float need = o.radius + radius + clear_wall;
          if (dx * dx + dy * dy < need * need) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        h.objects.push_back(ObjectInstance{cls, x, y, radius});
        placed = true;
      }
      if (!placed && k == 0) return false;  // every class needs an instance
      if (!placed) break;
    }
  }

  if (!house_connected(h)) return false;
  out = std::move(h);
  return true;
}

}  // namespace

House generate_house(const SimConfig& cfg, uint64_t seed, int room_count_min,
                     int room_count_max) {
  if (room_count_min < 1 || room_count_max > 8 || room_count_min > room_count_max)
    throw ArgumentError("room count range must satisfy 1 <= min <= max <= 8");
  House h;
  for (uint64_t attempt = 0; attempt < 32; ++attempt)
    if (try_generate(cfg, seed, room_count_min, room_count_max, attempt, h)) return h;
  throw GenerationError("house generation failed after bounded retries (seed " +
                        std::to_string(seed) + ")");
}

bool house_connected(const House& house) {
  const int w = house.width, hgt = house.height;
  std::vector<uint8_t> free(static_cast<size_t>(w) * hgt, 0);
  int total = 0;
  int sx = -1, sy = -1;
  for (int y = 0; y < hgt; ++y)
    for (int x = 0; x < w; ++x) {
      if (house.wall_at(x, y)) continue;
      if (house.object_at(house.center_of(x), house.center_of(y))) continue;
      free[static_cast<size_t>(y) * w + x] = 1;
      ++total;
      if (sx < 0) {
        sx = x;
        sy = y;
      }
    }
  if (total == 0) return false;
  std::vector<uint8_t> seen(static_cast<size_t>(w) * hgt, 0);
  std::deque<std::pair<int, int>> queue = {{sx, sy}};
  seen[static_cast<size_t>(sy) * w + sx] = 1;
  int reached = 0;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    ++reached;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= hgt) continue;
      const size_t idx = static_cast<size_t>(ny) * w + nx;
      if (!free[idx] || seen[idx]) continue;
      seen[idx] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return reached == total;
}

namespace {

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<uint8_t>& in, size_t& off) {
  if (off + sizeof(T) > in.size()) throw IoError("house container truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> house_to_bytes(const House& h) {
  std::vector<uint8_t> out;
  put(out, kHouseMagic);
  put(out, kHouseVersion);
  put(out, h.seed);
  put(out, h.cell_m);
  put(out, static_cast<uint32_t>(h.width));
  put(out, static_cast<uint32_t>(h.height));
  out.insert(out.end(), h.walls.begin(), h.walls.end());
  put(out, static_cast<uint32_t>(h.rooms.size()));
  for (const auto& r : h.rooms) {
    put(out, static_cast<int32_t>(r.rect.x0));
    put(out, static_cast<int32_t>(r.rect.y0));
    put(out, static_cast<int32_t>(r.rect.x1));
    put(out, static_cast<int32_t>(r.rect.y1));
    put(out, static_cast<uint8_t>(r.kind));
  }
  put(out, static_cast<uint32_t>(h.objects.size()));
  for (const auto& o : h.objects) {
    put(out, static_cast<int32_t>(o.class_id));
    put(out, o.x);
    put(out, o.y);
    put(out, o.radius);
  }
  return out;
}

House house_from_bytes(const std::vector<uint8_t>& bytes) {
  size_t off = 0;
  if (take<uint32_t>(bytes, off) != kHouseMagic) throw IoError("not a house container");
  const uint32_t version = take<uint32_t>(bytes, off);
  if (version != kHouseVersion)
    throw IoError("unsupported house container version " + std::to_string(version));
  House h;
  h.seed = take<uint64_t>(bytes, off);
  h.cell_m = take<float>(bytes, off);
  h.width = static_cast<int>(take<uint32_t>(bytes, off));
  h.height = static_cast<int>(take<uint32_t>(bytes, off));
  const size_t n = static_cast<size_t>(h.width) * h.height;
  if (off + n > bytes.size()) throw IoError("house container truncated");
  h.walls.assign(bytes.begin() + static_cast<long>(off), bytes.begin() + static_cast<long>(off + n));
  off += n;
  const uint32_t rooms = take<uint32_t>(bytes, off);
  for (uint32_t i = 0; i < rooms; ++i) {
    Room r;
    r.rect.x0 = take<int32_t>(bytes, off);
    r.rect.y0 = take<int32_t>(bytes, off);
    r.rect.x1 = take<int32_t>(bytes, off);
    r.rect.y1 = take<int32_t>(bytes, off);
    r.kind = static_cast<RoomKind>(take<uint8_t>(bytes, off));
    h.rooms.push_back(r);
  }
  const uint32_t objects = take<uint32_t>(bytes, off);
  for (uint32_t i = 0; i < objects; ++i) {
    ObjectInstance o;
    o.class_id = take<int32_t>(bytes, off);
    o.x = take<float>(bytes, off);
    o.y = take<float>(bytes, off);
    o.radius = take<float>(bytes, off);
    h.objects.push_back(o);
  }
  return h;
}

void save_house(const House& house, const std::string& path) {
  const auto bytes = house_to_bytes(house);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

House load_house(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open house file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return house_from_bytes(bytes);
}

bool houses_equal(const House& a, const House& b) {
  return house_to_bytes(a) == house_to_bytes(b);
}

}  // namespace navrl
