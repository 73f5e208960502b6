#include "stablab/problems.hpp"
#include "stablab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace stablab {

namespace {

class DoubleWellPopulation final : public RiskFunction {
 public:
  explicit DoubleWellPopulation(const DoubleWellProblem& p) : p_(&p) {}
  Eigen::Index dim() const override { return p_->dim(); }
  double value(const ParamVector& w) const override { return p_->quartic(w) + p_->offset(); }
  ParamVector gradient(const ParamVector& w) const override { return p_->quartic_grad(w); }
  Matrix hessian(const ParamVector& w) const override { return p_->quartic_hess(w); }

 private:
  const DoubleWellProblem* p_;
};

// R_S(w) = quartic(w) + <mean(t u), w> + mean(s) w^T B w / 2 + c0
class DoubleWellEmpirical final : public RiskFunction {
 public:
  DoubleWellEmpirical(const DoubleWellProblem& p, const Dataset& S) : p_(&p) {
    if (S.empty()) throw UsageError("empirical risk: dataset is empty");
    const Eigen::Index d = p.dim();
    tilt_ = ParamVector::Zero(d);
    for (const auto& z : S.samples) {
      if (z.size() != d + 2) throw UsageError("double_well: sample has wrong size");
      tilt_ += z[0] * z.segment(1, d);
      curv_ += z[d + 1];
    }
    tilt_ /= static_cast<double>(S.size());
    curv_ /= static_cast<double>(S.size());
  }
  Eigen::Index dim() const override { return p_->dim(); }
  double value(const ParamVector& w) const override {
    const Matrix& B = p_->curvature_matrix();
    return p_->quartic(w) + tilt_.dot(w) + 0.5 * curv_ * w.dot(B * w) + p_->offset();
  }
  ParamVector gradient(const ParamVector& w) const override {
    return p_->quartic_grad(w) + tilt_ + curv_ * (p_->curvature_matrix() * w);
  }
  Matrix hessian(const ParamVector& w) const override {
    return p_->quartic_hess(w) + curv_ * p_->curvature_matrix();
  }

 private:
  const DoubleWellProblem* p_;
  ParamVector tilt_;
  double curv_ = 0.0;
};

}  // namespace

DoubleWellProblem::DoubleWellProblem(const DoubleWellParams& params)
    : ProblemSpec(BallDomain(ParamVector::Zero(params.d), 1.0)), params_(params) {
  const double a = params_.well_radius;
  const Eigen::Index d = params_.d;
  if (d < 1 || d > 3) throw UsageError("double_well: d must be 1, 2 or 3");
  if (!(a > 0.0 && a <= 0.5)) throw UsageError("double_well: well_radius must lie in (0, 0.5]");
  if (a * a * static_cast<double>(d) >= 1.0) throw UsageError("double_well: minima (+-a,...) leave the unit ball");
  if (params_.noise_scale < 0.0 || params_.curvature_noise < 0.0)
    throw UsageError("double_well: noise parameters must be nonnegative");

  Rng rng(substream(params_.seed, 0xB));
  if (d == 1) {
    B_ = Matrix::Ones(1, 1);
  } else {
    Matrix G(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) G(i, j) = rng.normal();
    B_ = 0.5 * (G + G.transpose());
    B_ /= spectral_norm_sym(B_);
  }

  c0_ = compute_offset();
  population_ = std::make_shared<DoubleWellPopulation>(*this);

  const std::size_t count = std::size_t{1} << d;
  for (std::size_t mask = 0; mask < count; ++mask) {
    ParamVector w(d);
    for (Eigen::Index i = 0; i < d; ++i) w[i] = (mask >> i) & 1U ? -a : a;
    population_info_.local_minima.push_back(w);
  }
  population_info_.global_min_index = 0;

  const double nu = params_.noise_scale, tau = params_.curvature_noise;
  for (double t : {-nu, nu})
    for (double s : {-tau, tau})
      for (Eigen::Index i = 0; i < d; ++i)
        for (double sign : {-1.0, 1.0}) {
          Sample z(d + 2);
          z << t, sign * ParamVector::Unit(d, i), s;
          probes_.push_back(z);
        }

  const double h = params_.certify_resolution > 0.0 ? params_.certify_resolution : (d <= 2 ? 0.01 : 0.025);
  ConstantsBundle c = certify_constants(*this, h);
  if (!c.beta)
    throw UsageError("double_well: certified boundary floor beta <= 0; reduce noise_scale or curvature_noise");
  set_constants(std::move(c));
}

double DoubleWellProblem::quartic(const ParamVector& w) const {
  const double a2 = params_.well_radius * params_.well_radius;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double r = w[i] * w[i] - a2;
    acc += 0.25 * r * r;
  }
  return acc;
}

ParamVector DoubleWellProblem::quartic_grad(const ParamVector& w) const {
  const double a2 = params_.well_radius * params_.well_radius;
  return w.array() * (w.array().square() - a2);
}

Matrix DoubleWellProblem::quartic_hess(const ParamVector& w) const {
  const double a2 = params_.well_radius * params_.well_radius;
  return (3.0 * w.array().square() - a2).matrix().asDiagonal();
}

double DoubleWellProblem::compute_offset() const {
  const double nu = params_.noise_scale, tau = params_.curvature_noise;
  if (nu == 0.0 && tau == 0.0) return 0.0;
  const Eigen::Index d = params_.d;
  // Pointwise lower envelope over the support; each sign branch is smooth away from 0.
  auto branch = [&](const ParamVector& w, double sign) {
    return quartic(w) - nu * w.norm() - 0.5 * tau * sign * w.dot(B_ * w);
  };
  auto branch_grad = [&](const ParamVector& w, double sign) {
    ParamVector g = quartic_grad(w) - tau * sign * (B_ * w);
    const double r = w.norm();
    if (r > 0.0) g -= nu * w / r;
    return g;
  };
  struct Candidate {
    double value;
    ParamVector w;
    double sign;
  };
  std::vector<Candidate> best;
  const double h = d <= 2 ? 0.01 : 0.025;
  for_each_grid_point(domain_, h, [&](const ParamVector& w, const std::vector<long>&) {
    for (double sign : {-1.0, 1.0}) {
      const double v = branch(w, sign);
      if (best.size() < 8 || v < best.back().value) {
        best.push_back({v, w, sign});
        std::sort(best.begin(), best.end(), [](const auto& x, const auto& y) { return x.value < y.value; });
        if (best.size() > 8) best.pop_back();
      }
    }
  });
  double lowest = best.front().value;
  for (auto& cand : best) {
    ParamVector w = cand.w;
    double v = branch(w, cand.sign);
    double step = 0.5;
    for (int it = 0; it < 2000 && step > 1e-14; ++it) {
      const ParamVector g = branch_grad(w, cand.sign);
      const ParamVector trial = project(domain_, w - step * g);
      const double tv = branch(trial, cand.sign);
      if (tv < v) {
        w = trial;
        v = tv;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    lowest = std::min(lowest, v);
  }
  // Small margin so rounding in the loss never dips below zero.
  return -lowest + 1e-12;
}

double DoubleWellProblem::loss(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = dim();
  if (z.size() != d + 2 || w.size() != d) throw UsageError("double_well: dimension mismatch");
  return quartic(w) + z[0] * z.segment(1, d).dot(w) + 0.5 * z[d + 1] * w.dot(B_ * w) + c0_;
}

ParamVector DoubleWellProblem::grad(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = dim();
  if (z.size() != d + 2 || w.size() != d) throw UsageError("double_well: dimension mismatch");
  return quartic_grad(w) + z[0] * z.segment(1, d) + z[d + 1] * (B_ * w);
}

Matrix DoubleWellProblem::hess(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = dim();
  if (z.size() != d + 2 || w.size() != d) throw UsageError("double_well: dimension mismatch");
  return quartic_hess(w) + z[d + 1] * B_;
}

Sample DoubleWellProblem::draw(Rng& rng) const {
  const Eigen::Index d = dim();
  Sample z(d + 2);
  z[0] = rng.uniform(-params_.noise_scale, params_.noise_scale);
  z.segment(1, d) = rng.unit_sphere(d);
  z[d + 1] = rng.uniform(-params_.curvature_noise, params_.curvature_noise);
  return z;
}

SupportEnvelope DoubleWellProblem::envelope(const ParamVector& w) const {
  const double nu = params_.noise_scale, tau = params_.curvature_noise;
  const ParamVector g = quartic_grad(w);
  const ParamVector Bw = B_ * w;
  const Matrix H = quartic_hess(w);
  const double q = quartic(w);
  const double bend = std::abs(w.dot(Bw));
  SupportEnvelope env;
  // Both norms are convex in s, so the sup over s is attained at s = +-tau;
  // the sup over the unit vector u adds exactly |t| = nu.
  env.grad_norm_max = std::max((g + tau * Bw).norm(), (g - tau * Bw).norm()) + nu;
  env.hess_norm_max = std::max(spectral_norm_sym(H + tau * B_), spectral_norm_sym(H - tau * B_));
  env.loss_max = q + nu * w.norm() + 0.5 * tau * bend + c0_;
  env.loss_min = q - nu * w.norm() - 0.5 * tau * bend + c0_;
  env.radial_deviation_max = nu * w.norm() + tau * bend;
  return env;
}

double DoubleWellProblem::hessian_difference_sup(const ParamVector& w, const ParamVector& v) const {
  // The s B term cancels, leaving a z-independent diagonal.
  return (3.0 * (w.array().square() - v.array().square())).abs().maxCoeff();
}

std::shared_ptr<const RiskFunction> DoubleWellProblem::empirical(const Dataset& S) const {
  return std::make_shared<DoubleWellEmpirical>(*this, S);
}

std::shared_ptr<DoubleWellProblem> make_double_well(const DoubleWellParams& params) {
  return std::make_shared<DoubleWellProblem>(params);
}

}  // namespace stablab
