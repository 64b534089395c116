#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mmpn {

// Deterministic RNG with named substreams. One root seed drives the whole
// pipeline; components fork their own streams ("split", "init", "shuffle.3",
// "synth.subject.0017", ...) so reordering one stage never perturbs another.
//
// The generator is xoshiro-style splitmix64 steps; distributions are
// implemented here rather than with <random> so the byte-for-byte replay
// guarantee does not depend on the standard library's unspecified algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  Rng fork(const std::string& name) const {
    std::uint64_t h = fnv1a(name);
    Rng r(0);
    r.state_ = splitmix(state_ ^ h);
    return r;
  }
  Rng fork(const std::string& name, std::uint64_t index) const {
    return fork(name + "." + std::to_string(index));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return splitmix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = std::uint64_t(hi - lo) + 1;
    // Rejection sampling removes modulo bias.
    std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % span + 1) % span;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r > limit);
    return lo + std::int64_t(r % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; draws two uniforms per call and discards the spare so that
  // the stream position is input-independent.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(uniform_int(0, std::int64_t(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  std::uint64_t state_;
};

}  // namespace mmpn
