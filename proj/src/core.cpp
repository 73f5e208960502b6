#include "stablab/core.hpp"

#include <cmath>
#include <sstream>

namespace stablab {

bool all_finite(const ParamVector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

BallDomain::BallDomain(ParamVector center, double radius)
    : center_(std::move(center)), radius_(radius) {
  if (center_.size() < 1) throw UsageError("BallDomain: dimension must be at least 1");
  if (!(radius_ > 0.0) || !std::isfinite(radius_))
    throw UsageError("BallDomain: radius must be positive and finite");
  if (!all_finite(center_)) throw UsageError("BallDomain: center must be finite");
}

bool BallDomain::contains(const ParamVector& v, double tol) const {
  return offset_norm(v) <= radius_ + tol;
}

double BallDomain::offset_norm(const ParamVector& v) const {
  if (v.size() != center_.size()) throw UsageError("BallDomain: dimension mismatch");
  return (v - center_).norm();
}

ParamVector project(const BallDomain& domain, const ParamVector& v) {
  if (v.size() != domain.dim()) {
    std::ostringstream msg;
    msg << "project: vector has dimension " << v.size() << ", domain has " << domain.dim();
    throw UsageError(msg.str());
  }
  if (!all_finite(v)) throw UsageError("project: non-finite input");
  const ParamVector offset = v - domain.center();
  const double dist = offset.norm();
  if (dist <= domain.radius()) return v;
  // Rounding can leave the scaled point a few ulps outside; shrink until it
  // is inside so that projecting again returns it unchanged.
  double scale = domain.radius() / dist;
  ParamVector p = domain.center() + scale * offset;
  while ((p - domain.center()).norm() > domain.radius()) {
    scale = std::nextafter(scale, 0.0);
    p = domain.center() + scale * offset;
  }
  return p;
}

Dataset substitute(const Dataset& dataset, std::size_t index, const Sample& replacement) {
  if (index >= dataset.size()) {
    std::ostringstream msg;
    msg << "substitute: index " << index << " out of range for n=" << dataset.size();
    throw UsageError(msg.str());
  }
  Dataset out = dataset;
  out.samples[index] = replacement;
  return out;
}

void ConstantsBundle::validate() const {
  auto bad = [](const char* what) { throw UsageError(std::string("ConstantsBundle: ") + what); };
  for (double v : {L0, L1, L2, M, D, alpha, lambda, saddle_curvature})
    if (!std::isfinite(v) || v < 0.0) bad("all constants must be finite and nonnegative");
  if (!(lambda > 0.0)) bad("lambda must be positive");
  if (!(D > 0.0)) bad("D must be positive");
  if (K < 1) bad("K must be at least 1");
  if (lambda > L1) bad("lambda cannot exceed L1");
  if (saddle_curvature > lambda) bad("saddle_curvature cannot exceed lambda");
  if (beta) {
    if (!(*beta > 0.0)) bad("beta must be positive when set");
    if (!(*beta < L1)) bad("beta must be below L1");
  }
}

void orient_positive(ParamVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

EigenPair smallest_eigenpair(const Matrix& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw UsageError("smallest_eigenpair: matrix must be square");
  if (!all_finite(h)) throw UsageError("smallest_eigenpair: non-finite entries");
  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("smallest_eigenpair: eigensolver failed");
  EigenPair out;
  out.value = solver.eigenvalues()(0);
  out.vector = solver.eigenvectors().col(0).normalized();
  orient_positive(out.vector);
  return out;
}

double min_eigenvalue(const Matrix& h) {
  if (h.rows() == 1) return h(0, 0);
  if (h.rows() == 2) {
    // Closed form avoids solver setup on the hot grid paths.
    const double a = h(0, 0), d = h(1, 1), b = 0.5 * (h(0, 1) + h(1, 0));
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), b);
    return mean - rad;
  }
  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

double spectral_norm_sym(const Matrix& h) {
  if (h.rows() == 1) return std::abs(h(0, 0));
  if (h.rows() == 2) {
    const double a = h(0, 0), d = h(1, 1), b = 0.5 * (h(0, 1) + h(1, 0));
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), b);
    return std::max(std::abs(mean - rad), std::abs(mean + rad));
  }
  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace stablab
