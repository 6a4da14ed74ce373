#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace watch {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and up to three
/// tags (module stream id, task index, sub-index).  Every randomized
/// routine draws from its own derived stream, so results do not depend
/// on scheduling or thread count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(stream ^ 0x6a09e667f3bcc909ULL));
  h = mix64(h ^ mix64(a ^ 0xbb67ae8584caa73bULL));
  h = mix64(h ^ mix64(b ^ 0x3c6ef372fe94f82bULL));
  return h;
}

// Stream tags, one per randomized consumer.
namespace streams {
inline constexpr std::uint64_t kFolds = 1;
inline constexpr std::uint64_t kPermutation = 2;
inline constexpr std::uint64_t kTree = 3;
inline constexpr std::uint64_t kImportance = 4;
inline constexpr std::uint64_t kBootstrap = 5;
inline constexpr std::uint64_t kStack = 6;
inline constexpr std::uint64_t kLassoCv = 7;
inline constexpr std::uint64_t kRow = 8;
inline constexpr std::uint64_t kCiForest = 9;
}  // namespace streams

/// xoshiro256** with a splitmix64-expanded seed.  Small, fast, and
/// counter-friendly: independent instances are cheap, so parallel code
/// creates one per task instead of sharing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).  Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per call; no state kept
  /// so streams stay reproducible regardless of call pattern).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586 * u2);
  }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    shuffle(p);
    return p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  /// n draws with replacement from 0..n-1 (bootstrap resample).
  std::vector<int> bootstrap(int n) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = static_cast<int>(below(n));
    return idx;
  }

  /// k distinct values from 0..n-1 in random order (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    if (k > n) k = n;
    for (int i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + static_cast<int>(below(n - i))]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

}  // namespace watch
