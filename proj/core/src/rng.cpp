#include "nodex/rng.hpp"

#include <cmath>
#include <vector>

namespace nodex {

namespace {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

Scalar Rng::uniform() {
  // 53-bit mantissa in [0,1)
  return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
}

Scalar Rng::uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  NODEX_CHECK(hi >= lo, "uniform_int: empty range");
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling to stay unbiased.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % span);
}

Scalar Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  Scalar u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  Scalar r = std::sqrt(-2.0 * std::log(u1));
  Scalar theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Scalar Rng::trunc_normal(Scalar stddev) {
  Scalar z;
  do {
    z = normal();
  } while (z < -2.0 || z > 2.0);
  return z * stddev;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = master ^ 0xa0761d6478bd642fULL;
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    (void)splitmix64(s);
  }
  std::uint64_t x = s;
  return splitmix64(x);
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::uint64_t a,
                          std::uint64_t b) {
  return derive_seed(master, {fnv1a64(tag), a, b});
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nodex
