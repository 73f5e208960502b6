#pragma once

#include "stablab/core.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace stablab {

/// Number of integer-lattice points in the bounding cube of the ball at spacing h.
inline double grid_cube_count(Eigen::Index d, double radius, double h) {
  return std::pow(2.0 * std::floor(radius / h) + 1.0, static_cast<double>(d));
}

/// Visit every point center + h k (k integer) inside the ball, in
/// lexicographic order of k with the first axis fastest. Points are built
/// from integer indices so refinement by halving h reproduces shared
/// points bit-for-bit.
template <class Visit>
void for_each_grid_point(const BallDomain& domain, double h, Visit&& visit) {
  const Eigen::Index d = domain.dim();
  const long m = static_cast<long>(std::floor(domain.radius() / h));
  std::vector<long> k(static_cast<std::size_t>(d), -m);
  ParamVector w(d);
  for (;;) {
    for (Eigen::Index i = 0; i < d; ++i) w[i] = domain.center()[i] + h * static_cast<double>(k[i]);
    if (domain.contains(w)) visit(static_cast<const ParamVector&>(w), static_cast<const std::vector<long>&>(k));
    std::size_t i = 0;
    while (i < k.size() && ++k[i] > m) k[i++] = -m;
    if (i == k.size()) break;
  }
}

}  // namespace stablab
