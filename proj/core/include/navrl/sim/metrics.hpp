#pragma once

#include <vector>

#include "navrl/common.hpp"

namespace navrl {

struct EpisodeResult {
  bool success = false;
  double path_length_m = 0.0;   // p_i
  int steps = 0;                // e_i, includes the final Done
  double shortest_path_m = 0.0; // l_i
  int expert_steps = 0;         // w_i, includes the final Done
};

struct EvalMetrics {
  double success_rate = 0.0;
  double spl = 0.0;
  double sel = 0.0;
};

// SPL = mean S_i * l_i / max(l_i, p_i); SEL analogous with w_i, e_i. Failed
// episodes contribute 0. A degenerate denominator (both zero) counts as a
// perfect ratio.
inline EvalMetrics compute_metrics(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw ArgumentError("compute_metrics on an empty result list");
  EvalMetrics m;
  for (const auto& r : results) {
    if (!r.success) continue;
    m.success_rate += 1.0;
    const double pd = std::max(r.shortest_path_m, r.path_length_m);
    m.spl += pd > 0.0 ? r.shortest_path_m / pd : 1.0;
    const double ed = std::max<double>(r.expert_steps, r.steps);
    m.sel += ed > 0.0 ? static_cast<double>(r.expert_steps) / ed : 1.0;
  }
  const double n = static_cast<double>(results.size());
  m.success_rate /= n;
  m.spl /= n;
  m.sel /= n;
  return m;
}

}  // namespace navrl
