#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "levdec/errors.hpp"

namespace levdec {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG with explicit draw helpers. std::mt19937_64 is fully
// specified by the standard; the distribution helpers are hand-rolled so
// that results do not depend on the standard library implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Independent stream for sentence `index` within stream family `tag`.
  // Results are invariant under processing order.
  static Rng split(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed ^ (tag * 0x9e3779b97f4a7c15ULL)) + index));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return static_cast<std::size_t>(x % n);
  }

  // Index drawn from softmax(scores) at temperature 1.
  std::size_t sample_softmax(std::span<const double> scores) {
    if (scores.empty()) throw ContractError("sample_softmax: empty score vector");
    double max_score = scores[0];
    for (double s : scores) {
      if (!std::isfinite(s)) throw ContractError("sample_softmax: non-finite score");
      if (s > max_score) max_score = s;
    }
    double total = 0.0;
    std::vector<double> weights(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      weights[i] = std::exp(scores[i] - max_score);
      total += weights[i];
    }
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  // k distinct indices from [0, n), in increasing order.
  std::vector<std::size_t> choose(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::swap(pool[i], pool[i + below(n - i)]);
    }
    pool.resize(k < n ? k : n);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

private:
  std::mt19937_64 engine_;
};

// Stream tags for the split-seed scheme, one per randomness consumer.
enum class RngStream : std::uint64_t {
  kRollinDrop = 1,
  kRollinSample = 2,
  kGapSample = 3,
  kProbe = 4,
  kCorruptAccuracy = 5,
  kCorruptFluency = 6,
  kTrainOrder = 7,
};

inline Rng split_rng(std::uint64_t seed, RngStream stream, std::uint64_t index) {
  return Rng::split(seed, static_cast<std::uint64_t>(stream), index);
}

}  // namespace levdec
