#pragma once

#include <cstdint>

namespace lidarsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based generator: every draw is a pure function of its key, so
// results do not depend on evaluation order or thread count.
struct CounterRng {
  std::uint64_t key = 0;

  static constexpr CounterRng keyed(std::uint64_t seed) { return {splitmix64(seed)}; }
  constexpr CounterRng child(std::uint64_t component) const {
    return {splitmix64(key ^ splitmix64(component + 0x632be59bd9b4e019ull))};
  }
  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key + splitmix64(counter));
  }
  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }
  constexpr double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }
};

// Sequential stream on top of CounterRng for setup code (scene generation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(CounterRng::keyed(seed)) {}

  double uniform() { return base_.uniform(counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next_u64() { return base_.bits(counter_++); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  CounterRng base_;
  std::uint64_t counter_ = 0;
};

}  // namespace lidarsim
