#include "stablab/rng.hpp"

#include <cmath>
#include <numbers>

namespace stablab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_replicate_seed(std::uint64_t base_seed, std::uint64_t replicate_index,
                                    std::uint64_t n, std::uint64_t t) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(replicate_index) ^ n) ^ t);
  return base_seed ^ h;
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  // Standard splitmix64 stream: the state advances by the golden gamma and
  // each word is the mix of the advanced state.
  std::uint64_t state = seed;
  for (auto& word : s_) {
    word = splitmix64(state);
    state += 0x9e3779b97f4a7c15ULL;
  }
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw UsageError("Rng::uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

ParamVector Rng::normal_vector(Eigen::Index d) {
  ParamVector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
  return v;
}

ParamVector Rng::unit_sphere(Eigen::Index d) {
  if (d == 1) return ParamVector::Constant(1, uniform01() < 0.5 ? -1.0 : 1.0);
  for (;;) {
    ParamVector v = normal_vector(d);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

ParamVector Rng::uniform_ball(Eigen::Index d, double radius) {
  const ParamVector dir = unit_sphere(d);
  const double r = radius * std::pow(uniform01(), 1.0 / static_cast<double>(d));
  return r * dir;
}

}  // namespace stablab
