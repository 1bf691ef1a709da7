#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "nodex/common.hpp"

namespace nodex {

/// Counter-based deterministic RNG. Every stochastic component derives its
/// own stream from (seed, tags...) so results do not depend on execution
/// order or thread scheduling. Distributions are hand-rolled to keep
/// sequences identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  Scalar uniform();
  /// Uniform in [lo, hi).
  Scalar uniform(Scalar lo, Scalar hi);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  Scalar normal();
  Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }
  /// Normal truncated to [-2, 2] standard deviations (resampled).
  Scalar trunc_normal(Scalar stddev);
  bool bernoulli(Scalar p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  Scalar spare_ = 0.0;
};

/// Mixes a master seed with tag words into an independent substream seed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);
std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::uint64_t a = 0,
                          std::uint64_t b = 0);

/// FNV-1a over a byte string; used for run ids and config fingerprints.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace nodex
