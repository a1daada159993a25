#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "navrl/common.hpp"

namespace navrl {

// Ego-centric semantic raster: H x W x C, row-major (y, x, channel).
// Channel 0 = free space, channel 1 = wall, channel 2+k = object class k.
// Every pixel is one-hot or all-zero.
struct Observation {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  static Observation zeros(int h, int w, int c) {
    Observation o;
    o.height = h;
    o.width = w;
    o.channels = c;
    o.data.assign(static_cast<size_t>(h) * w * c, 0.0f);
    return o;
  }
};

// Normalized bounding box of the goal in the current view plus its area.
struct BBox {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  float area = 0;
};

// Per-step goal: a fixed category and/or a detected box. An absent box in a
// box-goal run means "no detection this step".
struct GoalSpec {
  std::optional<int> category;
  std::optional<BBox> bbox;
};

template <typename T>
struct PolicyOutputT {
  RowVec<T> logits;  // |A|
  T value = T(0);
};
using PolicyOutput = PolicyOutputT<float>;

// Forward-call accounting. Score ops count evaluated (query, key) pairs
// summed over decoder layers; heads share the pair set, so an incremental
// step at position t adds layers * (t + 1).
struct CallCounters {
  int64_t backbone_calls = 0;
  int64_t encoder_calls = 0;
  int64_t decoder_calls = 0;
  int64_t decoder_score_ops = 0;

  void reset() { *this = CallCounters{}; }
};

}  // namespace navrl
