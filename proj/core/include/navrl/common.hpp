#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace navrl {

// Tokens are rows; row-major keeps per-token slices contiguous.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

// ---------------------------------------------------------------------------
// Errors. Exceptions carry the category named in the module contracts; the
// CLI maps them onto exit codes.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RolloverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Rng: counter-based generator (splitmix64 over a 64-bit counter).
// The entire state is (seed-derived base, counter), which makes snapshots in
// checkpoints trivial and keeps every stream independent of thread timing.
// Gaussians use non-caching Box-Muller so the state stays two words.
// ---------------------------------------------------------------------------

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : base_(splitmix(seed + 0x9e3779b97f4a7c15ull)), counter_(0) {}

  static Rng from_state(uint64_t base, uint64_t counter) {
    Rng r;
    r.base_ = base;
    r.counter_ = counter;
    return r;
  }

  uint64_t base() const { return base_; }
  uint64_t counter() const { return counter_; }

  // Derive an independent stream; deterministic in (this seed, key).
  Rng fork(uint64_t key) const { return Rng(base_ ^ splitmix(key * 0xbf58476d1ce4e5b9ull + 1)); }

  uint64_t next_u64() { return splitmix(base_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Uniform in [lo, hi).
  double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller, spare discarded: two counter steps per sample.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  static uint64_t splitmix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  uint64_t base_;
  uint64_t counter_;
};

// ---------------------------------------------------------------------------
// Sharded execution: W contiguous shards, one thread each. Shard boundaries
// depend only on (n, shards), so results are reproducible for a fixed shard
// count no matter how the OS schedules the threads.
// ---------------------------------------------------------------------------

struct ShardRange {
  int begin = 0;
  int end = 0;
};

inline ShardRange shard_range(int n, int shards, int shard) {
  const int base = n / shards;
  const int rem = n % shards;
  ShardRange r;
  r.begin = shard * base + std::min(shard, rem);
  r.end = r.begin + base + (shard < rem ? 1 : 0);
  return r;
}

template <typename Fn>
void run_sharded(int n, int shards, Fn&& fn) {
  if (shards <= 1 || n <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(shards));
  for (int s = 0; s < shards; ++s) {
    const ShardRange r = shard_range(n, shards, s);
    pool.emplace_back([&fn, s, r] { fn(s, r.begin, r.end); });
  }
  for (auto& t : pool) t.join();
}

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace navrl
