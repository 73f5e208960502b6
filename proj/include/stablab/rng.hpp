#pragma once

#include "stablab/core.hpp"

#include <cstdint>
#include <string_view>

namespace stablab {

/// Identifier recorded in experiment summaries. Bump when any sampling
/// routine below changes its output.
inline constexpr std::string_view kRngAlgorithm = "xoshiro256starstar+splitmix64/v1";

std::uint64_t splitmix64(std::uint64_t x);

/// replicate_seed = base_seed XOR hash(replicate_index, n, t), with
/// hash(r, n, t) = splitmix64(splitmix64(splitmix64(r) ^ n) ^ t).
std::uint64_t derive_replicate_seed(std::uint64_t base_seed, std::uint64_t replicate_index,
                                    std::uint64_t n, std::uint64_t t);

/// Independent sub-stream of `seed` labelled by `tag`.
std::uint64_t substream(std::uint64_t seed, std::uint64_t tag);

/// xoshiro256** seeded through splitmix64. All variate transforms are
/// implemented here so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform on {0, ..., n-1}, unbiased.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal via Box-Muller (one value cached).
  double normal();

  ParamVector normal_vector(Eigen::Index d);
  ParamVector unit_sphere(Eigen::Index d);
  ParamVector uniform_ball(Eigen::Index d, double radius);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stablab
