#include "stablab/problems.hpp"

#include <cmath>
#include <sstream>

namespace stablab {

LogisticBlobsProblem::LogisticBlobsProblem(const LogisticBlobsParams& params)
    : ProblemSpec(BallDomain(ParamVector::Zero(std::max<Eigen::Index>(1, (params.classes - 1) * params.d)),
                             params.domain_radius)),
      params_(params),
      truncation_radius_(3.0 + std::sqrt(static_cast<double>(params.d))) {
  if (params_.classes < 2) throw UsageError("logistic_blobs: classes must be at least 2");
  if (params_.d < params_.classes) throw UsageError("logistic_blobs: d must be at least classes");
  if (params_.n_population_oracle < 100) throw UsageError("logistic_blobs: n_population_oracle must be >= 100");

  const std::uint64_t pop_seed = substream(params_.seed, 0x909);
  population_ = std::make_shared<SampleAverageRisk>(*this, sample(pop_seed, params_.n_population_oracle));
  population_info_.mode = PopulationMode::monte_carlo;
  population_info_.mc_sample_count = params_.n_population_oracle;
  population_info_.mc_seed = pop_seed;

  // Damped Newton on the frozen population average.
  ParamVector w = ParamVector::Zero(dim());
  double value = population_->value(w);
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const ParamVector g = population_->gradient(w);
    if (g.norm() <= 1e-11) {
      converged = true;
      break;
    }
    const ParamVector dir = population_->hessian(w).ldlt().solve(-g);
    double step = 1.0;
    while (step > 1e-12) {
      const ParamVector trial = w + step * dir;
      const double tv = population_->value(trial);
      if (tv <= value) {
        w = trial;
        value = tv;
        break;
      }
      step *= 0.5;
    }
    if (step <= 1e-12) {
      converged = population_->gradient(w).norm() <= 1e-8;
      break;
    }
  }
  if (!converged) throw NumericalError("logistic_blobs: population minimizer did not converge");
  if (!domain_.contains(w)) {
    std::ostringstream msg;
    msg << "logistic_blobs: population minimizer has norm " << w.norm() << ", outside the domain radius "
        << domain_.radius() << "; lower separation or enlarge the domain";
    throw UsageError(msg.str());
  }
  population_info_.local_minima = {w};
  population_info_.global_min_index = 0;

  use_random_probes();
  CertificationDetail cert = certify_constants_detailed(*this, 0.05, params_.certify_points);
  set_constants(std::move(cert.constants));
}

ParamVector LogisticBlobsProblem::logits(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = params_.d;
  if (w.size() != dim() || z.size() != d + 1) throw UsageError("logistic_blobs: dimension mismatch");
  ParamVector l(params_.classes);
  l[0] = 0.0;
  for (int k = 1; k < params_.classes; ++k) l[k] = w.segment((k - 1) * d, d).dot(z.head(d));
  return l;
}

namespace {

int label_of(const Sample& z) { return static_cast<int>(z[z.size() - 1]); }

ParamVector softmax(const ParamVector& l, double* log_partition) {
  const double top = l.maxCoeff();
  ParamVector p = (l.array() - top).exp();
  const double sum = p.sum();
  if (log_partition) *log_partition = top + std::log(sum);
  return p / sum;
}

}  // namespace

double LogisticBlobsProblem::loss(const ParamVector& w, const Sample& z) const {
  const ParamVector l = logits(w, z);
  double lse = 0.0;
  softmax(l, &lse);
  return lse - l[label_of(z)];
}

ParamVector LogisticBlobsProblem::grad(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = params_.d;
  const ParamVector p = softmax(logits(w, z), nullptr);
  const int y = label_of(z);
  ParamVector g(dim());
  for (int k = 1; k < params_.classes; ++k)
    g.segment((k - 1) * d, d) = (p[k] - (k == y ? 1.0 : 0.0)) * z.head(d);
  return g;
}

Matrix LogisticBlobsProblem::hess(const ParamVector& w, const Sample& z) const {
  const Eigen::Index d = params_.d;
  const ParamVector p = softmax(logits(w, z), nullptr);
  const Matrix xx = z.head(d) * z.head(d).transpose();
  Matrix H(dim(), dim());
  for (int k = 1; k < params_.classes; ++k)
    for (int m = 1; m < params_.classes; ++m) {
      const double c = (k == m ? p[k] : 0.0) - p[k] * p[m];
      H.block((k - 1) * d, (m - 1) * d, d, d) = c * xx;
    }
  return H;
}

Sample LogisticBlobsProblem::draw(Rng& rng) const {
  const Eigen::Index d = params_.d;
  const std::size_t y = rng.uniform_index(static_cast<std::size_t>(params_.classes));
  ParamVector g;
  do {
    g = rng.normal_vector(d);
  } while (g.norm() > truncation_radius_);
  Sample z(d + 1);
  z.head(d) = g;
  z[static_cast<Eigen::Index>(y)] += params_.separation;
  z[d] = static_cast<double>(y);
  return z;
}

std::shared_ptr<LogisticBlobsProblem> make_logistic_blobs(const LogisticBlobsParams& params) {
  return std::make_shared<LogisticBlobsProblem>(params);
}

}  // namespace stablab
