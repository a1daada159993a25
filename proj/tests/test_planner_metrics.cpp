#include "doctest.h"

#include "navrl/sim/metrics.hpp"
#include "navrl/sim/planner.hpp"
#include "navrl/sim/world.hpp"
#include "sim_fixtures.hpp"

using namespace navrl;
using navrl::testfix::add_wall_block;
using navrl::testfix::empty_house;

namespace {

RasterSpec raster() {
  RasterSpec r;
  r.height = 28;
  r.width = 28;
  r.classes = 5;
  return r;
}

}  // namespace

TEST_CASE("shortest path: identity, corridor, symmetry, unreachable") {
  House h = empty_house(6, 6);
  const float br = 0.18f;

  CHECK(shortest_path(h, 1.0f, 1.0f, 1.0f, 1.0f, br) == 0.0);

  // straight 3 m corridor
  const double l = shortest_path(h, 1.0f, 1.0f, 1.0f, 4.0f, br);
  CHECK(l == doctest::Approx(3.0).epsilon(0.03));

  const double ab = shortest_path(h, 1.0f, 1.0f, 4.5f, 3.2f, br);
  const double ba = shortest_path(h, 4.5f, 3.2f, 1.0f, 1.0f, br);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));

  // seal a chamber: unreachable yields the infinite sentinel
  House h2 = empty_house(6, 6);
  add_wall_block(h2, 3.0f, 0.0f, 3.2f, 6.0f);
  CHECK(shortest_path(h2, 1.0f, 1.0f, 5.0f, 5.0f, br) == kUnreachable);
}

TEST_CASE("shortest path routes around walls") {
  House h = empty_house(6, 6);
  // wall with a gap near x=5
  add_wall_block(h, 0.0f, 3.0f, 4.5f, 3.2f);
  const double direct = 2.0;
  const double l = shortest_path(h, 2.0f, 2.0f, 2.0f, 4.0f, 0.18f);
  CHECK(l > direct + 1.0);  // detour through the gap
  CHECK(l < 12.0);
}

TEST_CASE("expert steps: already-success pose needs only Done") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{0, 3.0f, 3.5f, 0.2f});
  SimConfig sim;
  sim.object_classes = 5;
  TaskSpec t;
  t.target_class = 0;
  t.success_distance_m = 1.0f;
  t.max_steps = 500;
  t.embodiment = Embodiment::kLoCoBot;
  t.start.x = 3.0f;
  t.start.y = 3.0f;
  t.start.yaw_deg = 0.0f;
  t.start.body_radius_m = sim.body_radius_m;
  CHECK(expert_steps(h, sim, raster(), t) == 1);
}

TEST_CASE("expert steps: aligned 1m approach costs 5 moves plus Done") {
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{0, 1.025f, 3.025f, 0.2f});
  SimConfig sim;
  sim.object_classes = 5;
  TaskSpec t;
  t.target_class = 0;
  t.success_distance_m = 1.0f;
  t.max_steps = 500;
  t.embodiment = Embodiment::kLoCoBot;
  t.start.x = 1.025f;  // grid-aligned, 2 m straight ahead of the target
  t.start.y = 1.025f;
  t.start.yaw_deg = 0.0f;
  t.start.body_radius_m = sim.body_radius_m;
  CHECK(expert_steps(h, sim, raster(), t) == 6);
}

TEST_CASE("expert steps are invariant to unreachable decoy rooms") {
  SimConfig sim;
  sim.object_classes = 5;
  House h = empty_house(6, 6);
  h.objects.push_back(ObjectInstance{0, 4.5f, 4.5f, 0.2f});
  TaskSpec t;
  t.target_class = 0;
  t.success_distance_m = 1.0f;
  t.max_steps = 500;
  t.embodiment = Embodiment::kLoCoBot;
  t.start.x = 1.0f;
  t.start.y = 1.0f;
  t.start.yaw_deg = 90.0f;
  t.start.body_radius_m = sim.body_radius_m;
  const int w1 = expert_steps(h, sim, raster(), t);
  CHECK(w1 > 1);

  // bolt a sealed decoy chamber (with a same-class decoy object) onto the map
  House h2 = h;
  h2.width += 40;
  std::vector<uint8_t> walls(static_cast<size_t>(h2.width) * h2.height, 1);
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x)
      walls[static_cast<size_t>(y) * h2.width + x] = h.walls[static_cast<size_t>(y) * h.width + x];
  for (int y = 4; y < h2.height - 4; ++y)
    for (int x = h.width + 4; x < h2.width - 4; ++x)
      walls[static_cast<size_t>(y) * h2.width + x] = 0;
  h2.walls = std::move(walls);
  h2.objects.push_back(ObjectInstance{0, h.width * h.cell_m + 1.0f, 3.0f, 0.2f});
  const int w2 = expert_steps(h2, sim, raster(), t);
  CHECK(w1 == w2);
}

TEST_CASE("geodesic distance to success stays below the straight-line-plus-detour bound") {
  SimConfig sim;
  sim.object_classes = 5;
  House h = generate_house(sim, 31);
  auto spec = raster();
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    TaskSpec t = sample_task(h, sim, spec, Embodiment::kLoCoBot, rng);
    const double l = geodesic_to_success(h, sim, spec, t);
    CHECK(std::isfinite(l));
    CHECK(l >= 0.0);
    const int w = expert_steps(h, sim, spec, t);
    CHECK(w >= 1);
    CHECK(w < t.max_steps);
  }
}

TEST_CASE("metrics formulas: extremes and the 0.8 hand case") {
  // all failures
  std::vector<EpisodeResult> fails(3);
  auto m = compute_metrics(fails);
  CHECK(m.success_rate == 0.0);
  CHECK(m.spl == 0.0);
  CHECK(m.sel == 0.0);

  // single success with p=l, e=w
  EpisodeResult perfect;
  perfect.success = true;
  perfect.path_length_m = 2.5;
  perfect.shortest_path_m = 2.5;
  perfect.steps = 14;
  perfect.expert_steps = 14;
  m = compute_metrics({perfect});
  CHECK(m.success_rate == 1.0);
  CHECK(m.spl == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.sel == doctest::Approx(1.0).epsilon(1e-12));

  // S=1, l=4, p=5, w=20, e=25 -> SPL = SEL = 0.8
  EpisodeResult r;
  r.success = true;
  r.shortest_path_m = 4.0;
  r.path_length_m = 5.0;
  r.expert_steps = 20;
  r.steps = 25;
  m = compute_metrics({r});
  CHECK(m.spl == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.sel == doctest::Approx(0.8).epsilon(1e-12));

  // mean over mixed episodes; SuccessRate equals mean of S_i
  m = compute_metrics({perfect, r, EpisodeResult{}});
  CHECK(m.success_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.spl == doctest::Approx((1.0 + 0.8) / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(compute_metrics({}), ArgumentError);
}

TEST_CASE("metrics stay in [0,1] on random inputs") {
  Rng rng(12);
  std::vector<EpisodeResult> rs;
  for (int i = 0; i < 200; ++i) {
    EpisodeResult r;
    r.success = rng.uniform() < 0.5;
    r.path_length_m = rng.range(0.0, 30.0);
    r.shortest_path_m = rng.range(0.0, 30.0);
    r.steps = 1 + static_cast<int>(rng.below(500));
    r.expert_steps = 1 + static_cast<int>(rng.below(500));
    rs.push_back(r);
  }
  auto m = compute_metrics(rs);
  CHECK(m.success_rate >= 0.0);
  CHECK(m.success_rate <= 1.0);
  CHECK(m.spl >= 0.0);
  CHECK(m.spl <= 1.0);
  CHECK(m.sel >= 0.0);
  CHECK(m.sel <= 1.0);
}
