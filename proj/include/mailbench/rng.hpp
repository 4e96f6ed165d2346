#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace mailbench {

// splitmix64 finalizer; used to derive independent stream seeds from a master
// seed and a list of tag words, so tasks can run in any order and still see
// identical randomness.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> tags) {
  uint64_t s = mix64(master);
  for (uint64_t t : tags) s = mix64(s ^ mix64(t));
  return s;
}

// Thin deterministic sampler over std::mt19937_64. Distribution logic is kept
// in-house because libstdc++ distribution internals are not pinned by the
// standard, while the raw engine output is.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in {0, ..., n-1}.
  int uniform_int(int n) {
    return static_cast<int>(static_cast<uint64_t>(n) * (engine_() >> 11) >> 53);
  }

  // Samples an index from an (assumed normalized) probability vector.
  int categorical(std::span<const double> probs) {
    double u = uniform();
    int last_positive = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = static_cast<int>(i);
      u -= probs[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return last_positive;  // guards against rounding drift
  }

  // Dirichlet(1) row: uniform over the simplex.
  void dirichlet_row(std::span<double> out) {
    double sum = 0.0;
    for (double& v : out) {
      v = -std::log(1.0 - uniform());
      sum += v;
    }
    for (double& v : out) v /= sum;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mailbench
