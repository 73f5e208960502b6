#include "stablab/problems.hpp"

#include <functional>

namespace stablab {

namespace {

constexpr double kStep = 1e-5;

double rel_error(const Eigen::Ref<const Eigen::MatrixXd>& analytic, const Eigen::Ref<const Eigen::MatrixXd>& numeric) {
  // Floor keeps points with a vanishing derivative from dividing by ~0.
  const double scale = std::max(analytic.norm(), 1e-6);
  return (analytic - numeric).norm() / scale;
}

ParamVector fd_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& w) {
  ParamVector g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    ParamVector plus = w, minus = w;
    plus[i] += kStep;
    minus[i] -= kStep;
    g[i] = (f(plus) - f(minus)) / (2.0 * kStep);
  }
  return g;
}

Matrix fd_hessian(const std::function<ParamVector(const ParamVector&)>& g, const ParamVector& w) {
  Matrix H(w.size(), w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    ParamVector plus = w, minus = w;
    plus[i] += kStep;
    minus[i] -= kStep;
    H.col(i) = (g(plus) - g(minus)) / (2.0 * kStep);
  }
  return 0.5 * (H + H.transpose());
}

void record(DerivativeCheckReport& report, double grad_err, double hess_err) {
  ++report.points;
  report.max_grad_rel_error = std::max(report.max_grad_rel_error, grad_err);
  report.max_hess_rel_error = std::max(report.max_hess_rel_error, hess_err);
  if (!(grad_err <= kGradCheckTol)) ++report.grad_failures;
  if (!(hess_err <= kHessCheckTol)) ++report.hess_failures;
}

}  // namespace

DerivativeCheckReport check_sample_derivatives(const ProblemSpec& spec, std::size_t points, std::uint64_t seed) {
  Rng rng(seed);
  const BallDomain& dom = spec.domain();
  DerivativeCheckReport report;
  for (std::size_t p = 0; p < points; ++p) {
    // Stay well inside so the stencil does not leave the domain.
    const ParamVector w = dom.center() + rng.uniform_ball(dom.dim(), 0.9 * dom.radius());
    const Sample z = spec.draw(rng);
    const ParamVector g = spec.grad(w, z);
    const Matrix H = spec.hess(w, z);
    const ParamVector g_fd = fd_gradient([&](const ParamVector& v) { return spec.loss(v, z); }, w);
    const Matrix H_fd = fd_hessian([&](const ParamVector& v) { return spec.grad(v, z); }, w);
    record(report, rel_error(g, g_fd), rel_error(H, H_fd));
  }
  return report;
}

DerivativeCheckReport check_risk_derivatives(const RiskFunction& f, const std::vector<ParamVector>& points) {
  DerivativeCheckReport report;
  for (const auto& w : points) {
    const ParamVector g_fd = fd_gradient([&](const ParamVector& v) { return f.value(v); }, w);
    const Matrix H_fd = fd_hessian([&](const ParamVector& v) { return f.gradient(v); }, w);
    record(report, rel_error(f.gradient(w), g_fd), rel_error(f.hessian(w), H_fd));
  }
  return report;
}

}  // namespace stablab
