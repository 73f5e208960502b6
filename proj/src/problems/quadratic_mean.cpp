#include "stablab/problems.hpp"

#include <cmath>

namespace stablab {

namespace {

class QuadraticPopulation final : public RiskFunction {
 public:
  QuadraticPopulation(ParamVector mu, double noise_moment) : mu_(std::move(mu)), noise_moment_(noise_moment) {}
  Eigen::Index dim() const override { return mu_.size(); }
  double value(const ParamVector& w) const override {
    return 0.5 * (w - mu_).squaredNorm() + 0.5 * noise_moment_;
  }
  ParamVector gradient(const ParamVector& w) const override { return w - mu_; }
  Matrix hessian(const ParamVector&) const override { return Matrix::Identity(dim(), dim()); }

 private:
  ParamVector mu_;
  double noise_moment_;
};

// R_S(w) = 0.5||w||^2 - <w, mean z> + 0.5 mean ||z||^2
class QuadraticEmpirical final : public RiskFunction {
 public:
  explicit QuadraticEmpirical(const Dataset& S) {
    if (S.empty()) throw UsageError("empirical risk: dataset is empty");
    mean_ = ParamVector::Zero(S[0].size());
    for (const auto& z : S.samples) {
      mean_ += z;
      mean_sq_ += z.squaredNorm();
    }
    mean_ /= static_cast<double>(S.size());
    mean_sq_ /= static_cast<double>(S.size());
  }
  Eigen::Index dim() const override { return mean_.size(); }
  double value(const ParamVector& w) const override {
    return 0.5 * w.squaredNorm() - w.dot(mean_) + 0.5 * mean_sq_;
  }
  ParamVector gradient(const ParamVector& w) const override { return w - mean_; }
  Matrix hessian(const ParamVector&) const override { return Matrix::Identity(dim(), dim()); }

 private:
  ParamVector mean_;
  double mean_sq_ = 0.0;
};

void check_sample(const ParamVector& w, const Sample& z) {
  if (w.size() != z.size()) throw UsageError("quadratic_mean: sample/parameter dimension mismatch");
}

}  // namespace

QuadraticMeanProblem::QuadraticMeanProblem(ParamVector mu, double noise_radius)
    : ProblemSpec(BallDomain(ParamVector::Zero(mu.size()), 2.0 * noise_radius)),
      mu_(std::move(mu)),
      rho_(noise_radius) {
  if (mu_.norm() > rho_) throw UsageError("quadratic_mean: ||mu|| must not exceed noise_radius");
  population_ = std::make_shared<QuadraticPopulation>(mu_, noise_second_moment());
  population_info_.local_minima = {mu_};
  population_info_.global_min_index = 0;

  const Eigen::Index d = dim();
  for (Eigen::Index i = 0; i < d; ++i) {
    probes_.push_back(mu_ + rho_ * ParamVector::Unit(d, i));
    probes_.push_back(mu_ - rho_ * ParamVector::Unit(d, i));
  }
  Rng rng(0x9a11ULL);
  for (int i = 0; i < 64; ++i) probes_.push_back(mu_ + rho_ * rng.unit_sphere(d));

  ConstantsBundle c;
  c.L0 = 3.0 * rho_ + mu_.norm();
  c.L1 = 1.0;
  c.L2 = 0.0;
  c.lambda = 1.0;
  c.saddle_curvature = 1.0;
  // No point has |sigma_min| below 1, so any threshold works; L0 bounds every gradient.
  c.alpha = c.L0;
  const double boundary_floor = 2.0 * rho_ * (rho_ - mu_.norm());
  if (boundary_floor > 0.0) c.beta = std::min(boundary_floor, 0.95 * c.L1);
  c.M = 0.5 * c.L0 * c.L0;
  c.D = domain_.diameter();
  c.K = 1;
  c.provenance = "analytic";
  set_constants(std::move(c));
}

double QuadraticMeanProblem::noise_second_moment() const {
  const double d = static_cast<double>(dim());
  return rho_ * rho_ * d / (d + 2.0);
}

double QuadraticMeanProblem::loss(const ParamVector& w, const Sample& z) const {
  check_sample(w, z);
  return 0.5 * (w - z).squaredNorm();
}

ParamVector QuadraticMeanProblem::grad(const ParamVector& w, const Sample& z) const {
  check_sample(w, z);
  return w - z;
}

Matrix QuadraticMeanProblem::hess(const ParamVector& w, const Sample&) const {
  return Matrix::Identity(w.size(), w.size());
}

Sample QuadraticMeanProblem::draw(Rng& rng) const { return mu_ + rng.uniform_ball(dim(), rho_); }

SupportEnvelope QuadraticMeanProblem::envelope(const ParamVector& w) const {
  const double r = (w - mu_).norm();
  SupportEnvelope env;
  env.loss_max = 0.5 * (r + rho_) * (r + rho_);
  env.loss_min = 0.5 * std::pow(std::max(0.0, r - rho_), 2);
  env.grad_norm_max = r + rho_;
  env.hess_norm_max = 1.0;
  // grad f - grad R = mu - z, which ranges over the radius-rho ball.
  env.radial_deviation_max = rho_ * (w - domain_.center()).norm();
  return env;
}

std::shared_ptr<const RiskFunction> QuadraticMeanProblem::empirical(const Dataset& S) const {
  return std::make_shared<QuadraticEmpirical>(S);
}

ParamVector QuadraticMeanProblem::empirical_minimizer(const Dataset& S) const {
  if (S.empty()) throw UsageError("empirical_minimizer: dataset is empty");
  ParamVector mean = ParamVector::Zero(dim());
  for (const auto& z : S.samples) mean += z;
  mean /= static_cast<double>(S.size());
  return project(domain_, mean);
}

std::shared_ptr<QuadraticMeanProblem> make_quadratic_mean(Eigen::Index d, const ParamVector& mu,
                                                          double noise_radius) {
  if (d < 1) throw UsageError("quadratic_mean: d must be at least 1");
  if (mu.size() != d) throw UsageError("quadratic_mean: mu has wrong dimension");
  if (!(noise_radius > 0.0)) throw UsageError("quadratic_mean: noise_radius must be positive");
  return std::make_shared<QuadraticMeanProblem>(mu, noise_radius);
}

}  // namespace stablab
