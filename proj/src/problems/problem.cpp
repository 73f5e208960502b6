#include "stablab/problems.hpp"

#include <cmath>

namespace stablab {

SampleAverageRisk::SampleAverageRisk(const ProblemSpec& spec, Dataset data)
    : spec_(&spec), data_(std::move(data)) {
  if (data_.empty()) throw UsageError("empirical risk: dataset is empty");
}

Eigen::Index SampleAverageRisk::dim() const { return spec_->dim(); }

double SampleAverageRisk::value(const ParamVector& w) const {
  double acc = 0.0;
  for (const auto& z : data_.samples) acc += spec_->loss(w, z);
  return acc / static_cast<double>(data_.size());
}

ParamVector SampleAverageRisk::gradient(const ParamVector& w) const {
  ParamVector acc = ParamVector::Zero(w.size());
  for (const auto& z : data_.samples) acc += spec_->grad(w, z);
  return acc / static_cast<double>(data_.size());
}

Matrix SampleAverageRisk::hessian(const ParamVector& w) const {
  Matrix acc = Matrix::Zero(w.size(), w.size());
  for (const auto& z : data_.samples) acc += spec_->hess(w, z);
  return acc / static_cast<double>(data_.size());
}

void ProblemSpec::set_constants(ConstantsBundle c) {
  c.validate();
  constants_ = std::move(c);
}

const ParamVector& ProblemSpec::global_minimum() const {
  return population_info_.local_minima.at(population_info_.global_min_index);
}

Dataset ProblemSpec::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng(seed);
  Dataset out;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.samples.push_back(draw(rng));
  return out;
}

void ProblemSpec::use_random_probes() {
  Rng rng(0x5eed5eedULL);
  probes_.clear();
  probes_.reserve(256);
  for (int i = 0; i < 256; ++i) probes_.push_back(draw(rng));
}

SupportEnvelope ProblemSpec::envelope(const ParamVector& w) const {
  const auto& probes = support_probes();
  const ParamVector pop_grad = population().gradient(w);
  const ParamVector offset = w - domain_.center();
  SupportEnvelope env;
  env.loss_min = INFINITY;
  env.loss_max = -INFINITY;
  for (const auto& z : probes) {
    const double f = loss(w, z);
    const ParamVector g = grad(w, z);
    env.loss_max = std::max(env.loss_max, f);
    env.loss_min = std::min(env.loss_min, f);
    env.grad_norm_max = std::max(env.grad_norm_max, g.norm());
    env.hess_norm_max = std::max(env.hess_norm_max, spectral_norm_sym(hess(w, z)));
    env.radial_deviation_max = std::max(env.radial_deviation_max, std::abs((g - pop_grad).dot(offset)));
  }
  return env;
}

double ProblemSpec::hessian_difference_sup(const ParamVector& w, const ParamVector& v) const {
  double best = 0.0;
  for (const auto& z : support_probes()) best = std::max(best, spectral_norm_sym(hess(w, z) - hess(v, z)));
  return best;
}

std::shared_ptr<const RiskFunction> ProblemSpec::empirical(const Dataset& S) const {
  return std::make_shared<SampleAverageRisk>(*this, S);
}

double empirical_risk(const ProblemSpec& spec, const ParamVector& w, const Dataset& S) {
  return spec.empirical(S)->value(w);
}

ParamVector empirical_grad(const ProblemSpec& spec, const ParamVector& w, const Dataset& S) {
  return spec.empirical(S)->gradient(w);
}

Matrix empirical_hess(const ProblemSpec& spec, const ParamVector& w, const Dataset& S) {
  return spec.empirical(S)->hessian(w);
}

MonteCarloEstimate monte_carlo_risk(const ProblemSpec& spec, const ParamVector& w, std::size_t count,
                                    std::uint64_t seed) {
  if (count < 2) throw UsageError("monte_carlo_risk: need at least 2 samples");
  Rng rng(seed);
  // Welford keeps the variance accurate at 10^6 samples.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double f = spec.loss(w, spec.draw(rng));
    const double delta = f - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (f - mean);
  }
  const double var = m2 / static_cast<double>(count - 1);
  return {mean, std::sqrt(var / static_cast<double>(count))};
}

std::vector<ParamVector> halton_points(Eigen::Index dim, std::size_t count, std::size_t skip) {
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                    43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101};
  if (dim < 1 || dim > static_cast<Eigen::Index>(std::size(kPrimes)))
    throw UsageError("halton_points: dimension must be in [1, 26]");
  std::vector<ParamVector> out;
  out.reserve(count);
  for (std::size_t idx = skip; idx < skip + count; ++idx) {
    ParamVector p(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const int base = kPrimes[j];
      double f = 1.0, r = 0.0;
      std::size_t i = idx;
      while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
      }
      p[j] = r;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace stablab
