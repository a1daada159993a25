#include "doctest.h"

#include "navrl/common.hpp"
#include "navrl/config.hpp"

using namespace navrl;

TEST_CASE("rng is deterministic and serializable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(7);
  c.uniform();
  c.normal();
  Rng d = Rng::from_state(c.base(), c.counter());
  for (int i = 0; i < 10; ++i) CHECK(c.next_u64() == d.next_u64());

  Rng e(1), f(2);
  CHECK(e.next_u64() != f.next_u64());
}

TEST_CASE("rng moments are sane") {
  Rng r(123);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shard ranges cover exactly") {
  for (int n : {1, 7, 16, 100})
    for (int s : {1, 2, 3, 8}) {
      int covered = 0;
      int prev_end = 0;
      for (int i = 0; i < s; ++i) {
        auto r = shard_range(n, s, i);
        CHECK(r.begin == prev_end);
        prev_end = r.end;
        covered += r.end - r.begin;
      }
      CHECK(covered == n);
      CHECK(prev_end == n);
    }
}

TEST_CASE("config parses flat key-value text") {
  const std::string text = R"(
# a comment
run_dir = /tmp/run1
total_env_steps = 1000
learning_rate = 0.0002   # trailing comment
embodiment = stretch
goal_mode = both
object_classes = 5
)";
  auto kv = KvFile::parse_text(text, "inline");
  auto cfg = parse_engine_config(kv);
  CHECK(cfg.run.run_dir == "/tmp/run1");
  CHECK(cfg.train.total_env_steps == 1000);
  CHECK(cfg.train.learning_rate == doctest::Approx(2e-4));
  CHECK(cfg.model.embodiment == Embodiment::kStretch);
  CHECK(cfg.model.goal_mode == GoalMode::kBoth);
  CHECK(cfg.model.object_classes == 5);
  CHECK(cfg.sim.object_classes == 5);
  CHECK(cfg.model.action_count() == 7);
}

TEST_CASE("config errors are line-precise and name the key") {
  auto kv = KvFile::parse_text("total_env_steps = 100\nbogus_key = 1\n", "cfg.txt");
  try {
    parse_engine_config(kv);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cfg.txt:2") != std::string::npos);
    CHECK(msg.find("bogus_key") != std::string::npos);
  }

  // missing required key names the key
  auto kv2 = KvFile::parse_text("total_env_steps = 100\n", "cfg.txt");
  try {
    parse_engine_config(kv2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run_dir") != std::string::npos);
  }

  auto kv3 = KvFile::parse_text("run_dir = /tmp/x\ntotal_env_steps = ten\n", "cfg.txt");
  CHECK_THROWS_AS(parse_engine_config(kv3), ConfigError);
}

TEST_CASE("config round-trips through its canonical dump") {
  auto kv = KvFile::parse_text(
      "run_dir = /tmp/r\ntotal_env_steps = 5000\nhidden_dim = 64\nencoder_heads = 4\n"
      "decoder_heads = 4\nobject_classes = 5\n",
      "a");
  auto cfg = parse_engine_config(kv);
  const std::string dump = serialize_engine_config(cfg);
  auto cfg2 = parse_engine_config(KvFile::parse_text(dump, "dump"));
  CHECK(serialize_engine_config(cfg2) == dump);
}

TEST_CASE("episode profiles carry the embodiment limits") {
  const auto lo = episode_profile(Embodiment::kLoCoBot);
  CHECK(lo.max_steps == 500);
  CHECK(lo.success_distance_m == doctest::Approx(1.0f));
  const auto st = episode_profile(Embodiment::kStretch);
  CHECK(st.max_steps == 600);
  CHECK(st.success_distance_m == doctest::Approx(2.0f));
}
