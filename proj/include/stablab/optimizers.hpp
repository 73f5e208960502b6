#pragma once

#include "stablab/problems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stablab {

enum class HaltReason { completed, sosp_found, step_cap };
std::string to_string(HaltReason reason);

enum class PgdBranch : char { boundary = 'b', gradient = 'g', curvature = 'c' };

/// Recorded optimizer run. Entry j of the per-record vectors belongs to
/// step recorded_steps[j]; step 0 (the start) and the terminal step are
/// always recorded, others every `record_stride` steps.
struct Trace {
  std::vector<ParamVector> iterates;
  std::vector<std::size_t> recorded_steps;
  std::vector<double> empirical_risks;
  std::vector<double> grad_norms;
  std::size_t step_count = 0;
  ParamVector terminal;
  std::uint64_t rng_seed = 0;
  std::size_t record_stride = 1;
  HaltReason halt = HaltReason::completed;
  // PGD only: branch taken at each step (not thinned).
  std::vector<PgdBranch> branches;
};

/// Projected gradient descent with step 1/L1 on R_S.
Trace run_gd(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, std::size_t steps,
             std::size_t record_stride = 1);
Trace run_gd(const RiskFunction& objective, const BallDomain& domain, double L1, const ParamVector& w0,
             std::size_t steps, std::size_t record_stride = 1);

/// Projected SGD with eta_t = D / (L1 sqrt(t + 1)) and i_t uniform with
/// replacement from the seeded stream.
Trace run_sgd(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, std::size_t steps,
              std::uint64_t seed, std::size_t record_stride = 1);

struct PgdConfig {
  double epsilon = 0.0;
  ConstantsBundle constants;
  std::size_t max_steps = 1'000'000;
  std::size_t record_stride = 1;
};

/// min{8 beta^3 L2^3 / (27 L1^3), 27 / (64^3 L2^3), beta / 2}; requires beta
/// and L2 > 0.
double pgd_max_epsilon(const ConstantsBundle& c);
/// Throws UsageError when the configuration is outside the admissible range.
void validate_pgd_config(const PgdConfig& config);
/// sigma = 3 L1 eps^{1/3} / (2 beta L2).
double pgd_mixing_weight(const ConstantsBundle& c, double epsilon);

struct NegativeCurvatureStep {
  ParamVector u;
  /// (u - w)^T H (u - w)
  double curvature = 0.0;
  /// Whether curvature <= -beta^2 eps^{1/3} / (8 L1), the bound as printed
  /// in the algorithm listing. The eigenvector step always satisfies the
  /// L1^2 form used in the convergence argument.
  bool listing_bound_holds = false;
  bool proof_bound_holds = false;
};

/// u = w + (beta / 2L1) v along the smallest eigenvector, sign chosen to keep
/// ||u|| <= 1. Throws InternalError if neither sign is feasible.
NegativeCurvatureStep negative_curvature_step(const ParamVector& w, const Matrix& H, const ConstantsBundle& c,
                                              double epsilon);

/// Saddle-escaping projected gradient descent on the unit ball.
Trace run_pgd_sosp(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, const PgdConfig& config);
Trace run_pgd_sosp(const RiskFunction& objective, const BallDomain& domain, const ParamVector& w0,
                   const PgdConfig& config);

struct SospCheck {
  bool is_sosp = false;
  double grad_norm = 0.0;
  double sigma_min = 0.0;
};

/// ||grad R_S(w)|| <= eps and sigma_min(hess R_S(w)) >= -gamma.
SospCheck check_sosp(const ProblemSpec& spec, const Dataset& S, const ParamVector& w, double eps, double gamma);
SospCheck check_sosp(const RiskFunction& objective, const ParamVector& w, double eps, double gamma);

}  // namespace stablab
