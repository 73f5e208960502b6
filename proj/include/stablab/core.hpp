#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stablab {

using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A sample point z. Each problem family documents its own packing.
using Sample = Eigen::VectorXd;

/// Caller violated a documented precondition (bad dimension, index, parameter).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed; usually means mis-certified constants.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

bool all_finite(const ParamVector& v);
bool all_finite(const Matrix& m);

/// Closed Euclidean ball, the only constraint set used in this library.
class BallDomain {
 public:
  BallDomain(ParamVector center, double radius);

  const ParamVector& center() const { return center_; }
  double radius() const { return radius_; }
  double diameter() const { return 2.0 * radius_; }
  Eigen::Index dim() const { return center_.size(); }

  bool contains(const ParamVector& v, double tol = 0.0) const;
  /// Distance from the center, useful for boundary tests.
  double offset_norm(const ParamVector& v) const;

 private:
  ParamVector center_;
  double radius_;
};

/// Euclidean projection onto the ball.
ParamVector project(const BallDomain& domain, const ParamVector& v);

/// Ordered training set. Position i is the substitution slot for S^i.
struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  const Sample& operator[](std::size_t i) const { return samples[i]; }
};

/// Copy of the dataset with position `index` replaced by `replacement`.
Dataset substitute(const Dataset& dataset, std::size_t index, const Sample& replacement);

/// Smoothness, curvature and size constants of one problem instance.
///
/// `lambda` is the Hessian floor at population minima. `saddle_curvature` is
/// the floor used for the strict-saddle implication: it equals lambda unless
/// a non-minimum critical point has weaker negative curvature.
struct ConstantsBundle {
  double L0 = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double lambda = 0.0;
  double saddle_curvature = 0.0;
  double alpha = 0.0;
  std::optional<double> beta;
  double M = 0.0;
  double D = 0.0;
  int K = 1;
  // How the numbers were obtained, e.g. "analytic" or "grid:0.01 points=125000".
  std::string provenance = "analytic";

  /// Throws UsageError when an invariant does not hold.
  void validate() const;
};

struct EigenPair {
  double value = 0.0;
  ParamVector vector;
};

/// Algebraically smallest eigenpair of a symmetric matrix. The input is
/// symmetrized first. The eigenvector is oriented so its first entry with
/// magnitude above 1e-12 is positive.
EigenPair smallest_eigenpair(const Matrix& h);

/// Smallest eigenvalue only.
double min_eigenvalue(const Matrix& h);

/// Spectral norm of a symmetric matrix.
double spectral_norm_sym(const Matrix& h);

/// Flip `v` so its first non-negligible entry is positive.
void orient_positive(ParamVector& v);

}  // namespace stablab
