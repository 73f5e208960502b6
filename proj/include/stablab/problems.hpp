#pragma once

#include "stablab/core.hpp"
#include "stablab/rng.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace stablab {

/// A smooth scalar function on parameter space with exact derivatives.
/// Used for both population risk and empirical risk over a fixed dataset.
class RiskFunction {
 public:
  virtual ~RiskFunction() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const ParamVector& w) const = 0;
  virtual ParamVector gradient(const ParamVector& w) const = 0;
  virtual Matrix hessian(const ParamVector& w) const = 0;
};

enum class PopulationMode { analytic, monte_carlo };

struct PopulationInfo {
  std::vector<ParamVector> local_minima;
  std::size_t global_min_index = 0;
  PopulationMode mode = PopulationMode::analytic;
  // Only meaningful in monte_carlo mode.
  std::size_t mc_sample_count = 0;
  std::uint64_t mc_seed = 0;
};

/// Pointwise suprema over the sample support at a fixed w.
struct SupportEnvelope {
  double loss_max = 0.0;
  double loss_min = 0.0;
  double grad_norm_max = 0.0;
  double hess_norm_max = 0.0;
  // sup_z |<grad f(w,z) - grad R(w), w - center>|
  double radial_deviation_max = 0.0;
};

class ProblemSpec;

/// Plain sample average (1/n) sum_i f(w, z_i) through the per-sample oracle.
class SampleAverageRisk final : public RiskFunction {
 public:
  SampleAverageRisk(const ProblemSpec& spec, Dataset data);
  Eigen::Index dim() const override;
  double value(const ParamVector& w) const override;
  ParamVector gradient(const ParamVector& w) const override;
  Matrix hessian(const ParamVector& w) const override;
  const Dataset& data() const { return data_; }

 private:
  const ProblemSpec* spec_;
  Dataset data_;
};

/// Sample oracle, population oracle, sampler and constants of one problem.
/// Constructed fully certified; treat as read-only once shared.
class ProblemSpec {
 public:
  virtual ~ProblemSpec() = default;

  virtual std::string name() const = 0;
  const BallDomain& domain() const { return domain_; }
  Eigen::Index dim() const { return domain_.dim(); }
  const ConstantsBundle& constants() const { return constants_; }
  /// Replace the bundle (used when re-certifying or for mutation tests).
  void set_constants(ConstantsBundle c);

  virtual Eigen::Index sample_dim() const = 0;
  virtual double loss(const ParamVector& w, const Sample& z) const = 0;
  virtual ParamVector grad(const ParamVector& w, const Sample& z) const = 0;
  virtual Matrix hess(const ParamVector& w, const Sample& z) const = 0;

  virtual const RiskFunction& population() const = 0;
  const PopulationInfo& population_info() const { return population_info_; }
  const ParamVector& global_minimum() const;

  virtual Sample draw(Rng& rng) const = 0;
  /// n i.i.d. samples, deterministic in (seed, n).
  Dataset sample(std::uint64_t seed, std::size_t n) const;

  /// Fixed finite subset of the support used when a supremum over z has
  /// no closed form. Filled by each family's constructor.
  const std::vector<Sample>& support_probes() const { return probes_; }
  virtual SupportEnvelope envelope(const ParamVector& w) const;
  /// sup_z ||hess(w,z) - hess(v,z)||.
  virtual double hessian_difference_sup(const ParamVector& w, const ParamVector& v) const;

  /// Empirical risk over S. Families override this with closed forms
  /// built from sufficient statistics.
  virtual std::shared_ptr<const RiskFunction> empirical(const Dataset& S) const;

 protected:
  explicit ProblemSpec(BallDomain domain) : domain_(std::move(domain)) {}

  /// 256 draws from a frozen stream.
  void use_random_probes();

  BallDomain domain_;
  ConstantsBundle constants_;
  PopulationInfo population_info_;
  std::vector<Sample> probes_;
};

double empirical_risk(const ProblemSpec& spec, const ParamVector& w, const Dataset& S);
ParamVector empirical_grad(const ProblemSpec& spec, const ParamVector& w, const Dataset& S);
Matrix empirical_hess(const ProblemSpec& spec, const ParamVector& w, const Dataset& S);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of R(w) with `count` fresh samples.
MonteCarloEstimate monte_carlo_risk(const ProblemSpec& spec, const ParamVector& w,
                                    std::size_t count, std::uint64_t seed);

// ---- quadratic_mean ----
// f(w, z) = 0.5 ||w - z||^2, z uniform in ball(mu, noise_radius),
// domain ball(0, 2 noise_radius). Sample packing: z itself.
class QuadraticMeanProblem final : public ProblemSpec {
 public:
  QuadraticMeanProblem(ParamVector mu, double noise_radius);

  std::string name() const override { return "quadratic_mean"; }
  Eigen::Index sample_dim() const override { return dim(); }
  double loss(const ParamVector& w, const Sample& z) const override;
  ParamVector grad(const ParamVector& w, const Sample& z) const override;
  Matrix hess(const ParamVector& w, const Sample& z) const override;
  const RiskFunction& population() const override { return *population_; }
  Sample draw(Rng& rng) const override;
  SupportEnvelope envelope(const ParamVector& w) const override;
  double hessian_difference_sup(const ParamVector&, const ParamVector&) const override { return 0.0; }
  std::shared_ptr<const RiskFunction> empirical(const Dataset& S) const override;

  const ParamVector& mu() const { return mu_; }
  double noise_radius() const { return rho_; }
  /// E||z - mu||^2 = rho^2 d / (d + 2).
  double noise_second_moment() const;
  /// Minimizer of R_S over the domain: the projected sample mean.
  ParamVector empirical_minimizer(const Dataset& S) const;

 private:
  ParamVector mu_;
  double rho_;
  std::shared_ptr<RiskFunction> population_;
};

std::shared_ptr<QuadraticMeanProblem> make_quadratic_mean(Eigen::Index d, const ParamVector& mu,
                                                          double noise_radius);

// ---- double_well ----
// f(w, z) = sum_i (w_i^2 - a^2)^2 / 4 + t <u, w> + s w^T B w / 2 + c0 on the
// unit ball. Sample packing z = (t, u_1..u_d, s).
struct DoubleWellParams {
  Eigen::Index d = 2;
  double well_radius = 0.5;
  double noise_scale = 0.05;
  double curvature_noise = 0.05;
  std::uint64_t seed = 0;
  /// Certification grid; 0 picks 0.01 for d <= 2 and 0.025 for d = 3.
  double certify_resolution = 0.0;
};

class DoubleWellProblem final : public ProblemSpec {
 public:
  explicit DoubleWellProblem(const DoubleWellParams& params);

  std::string name() const override { return "double_well"; }
  Eigen::Index sample_dim() const override { return dim() + 2; }
  double loss(const ParamVector& w, const Sample& z) const override;
  ParamVector grad(const ParamVector& w, const Sample& z) const override;
  Matrix hess(const ParamVector& w, const Sample& z) const override;
  const RiskFunction& population() const override { return *population_; }
  Sample draw(Rng& rng) const override;
  SupportEnvelope envelope(const ParamVector& w) const override;
  double hessian_difference_sup(const ParamVector& w, const ParamVector& v) const override;
  std::shared_ptr<const RiskFunction> empirical(const Dataset& S) const override;

  const DoubleWellParams& params() const { return params_; }
  double well_radius() const { return params_.well_radius; }
  const Matrix& curvature_matrix() const { return B_; }
  double offset() const { return c0_; }

  /// Noise-free quartic part and its derivatives.
  double quartic(const ParamVector& w) const;
  ParamVector quartic_grad(const ParamVector& w) const;
  Matrix quartic_hess(const ParamVector& w) const;

 private:
  double compute_offset() const;

  DoubleWellParams params_;
  Matrix B_;
  double c0_ = 0.0;
  std::shared_ptr<RiskFunction> population_;
};

std::shared_ptr<DoubleWellProblem> make_double_well(const DoubleWellParams& params);

// ---- logistic_blobs ----
// Multinomial logistic regression on Gaussian blobs with class means sep e_k.
// Class 0 is the reference class (its weights are pinned at zero), so the
// parameter vector holds (classes - 1) rows of d weights, row-major.
// Sample packing z = (x_1..x_d, y).
struct LogisticBlobsParams {
  int classes = 3;
  Eigen::Index d = 3;
  std::size_t n_population_oracle = 5000;
  std::uint64_t seed = 0;
  double separation = 1.5;
  double domain_radius = 3.0;
  /// Number of Halton domain probes used during certification.
  std::size_t certify_points = 2048;
};

class LogisticBlobsProblem final : public ProblemSpec {
 public:
  explicit LogisticBlobsProblem(const LogisticBlobsParams& params);

  std::string name() const override { return "logistic_blobs"; }
  Eigen::Index sample_dim() const override { return params_.d + 1; }
  double loss(const ParamVector& w, const Sample& z) const override;
  ParamVector grad(const ParamVector& w, const Sample& z) const override;
  Matrix hess(const ParamVector& w, const Sample& z) const override;
  const RiskFunction& population() const override { return *population_; }
  Sample draw(Rng& rng) const override;

  const LogisticBlobsParams& params() const { return params_; }

 private:
  ParamVector logits(const ParamVector& w, const Sample& z) const;

  LogisticBlobsParams params_;
  double truncation_radius_;
  std::shared_ptr<SampleAverageRisk> population_;
};

std::shared_ptr<LogisticBlobsProblem> make_logistic_blobs(const LogisticBlobsParams& params);

// ---- certification ----

/// Assumption check failed on the probe set.
class CertificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct CertificationDetail {
  ConstantsBundle constants;
  std::size_t domain_points = 0;
  std::size_t boundary_points = 0;
  std::vector<ParamVector> critical_points;  // non-minimum critical points found
  double raw_beta = 0.0;                     // before deflation, may be <= 0
};

/// Grid (d <= 3) or Halton (d > 3) certification of the constant bundle.
/// L0, L1, L2, M are inflated by 5%; lambda, alpha, beta deflated by 5%.
CertificationDetail certify_constants_detailed(const ProblemSpec& spec, double grid_resolution,
                                               std::size_t halton_points = 4096);
ConstantsBundle certify_constants(const ProblemSpec& spec, double grid_resolution);

struct SeparationReport {
  bool pass = true;
  double required = 0.0;  // 4 lambda / L2, +inf when L2 = 0
  struct Pair {
    std::size_t i, j;
    double distance;
  };
  std::vector<Pair> pairs;
};

SeparationReport validate_minima_separation(const std::vector<ParamVector>& minima,
                                            const ConstantsBundle& c);
SeparationReport validate_minima_separation(const ProblemSpec& spec);

// ---- finite-difference checks ----

struct DerivativeCheckReport {
  std::size_t points = 0;
  double max_grad_rel_error = 0.0;
  double max_hess_rel_error = 0.0;
  std::size_t grad_failures = 0;
  std::size_t hess_failures = 0;
  bool pass() const { return grad_failures == 0 && hess_failures == 0; }
};

inline constexpr double kGradCheckTol = 1e-5;
inline constexpr double kHessCheckTol = 1e-4;

/// Central differences (step 1e-5) of the per-sample oracle at random
/// interior points paired with fresh samples.
DerivativeCheckReport check_sample_derivatives(const ProblemSpec& spec, std::size_t points,
                                               std::uint64_t seed);
/// Same for an arbitrary risk function at the given points.
DerivativeCheckReport check_risk_derivatives(const RiskFunction& f,
                                             const std::vector<ParamVector>& points);

/// Low-discrepancy points in [0,1)^dim (Halton, bases = first primes),
/// skipping the first `skip` indices.
std::vector<ParamVector> halton_points(Eigen::Index dim, std::size_t count, std::size_t skip = 1);

}  // namespace stablab
