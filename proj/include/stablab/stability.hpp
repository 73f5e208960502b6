#pragma once

#include "stablab/bounds.hpp"
#include "stablab/optimizers.hpp"
#include "stablab/problems.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stablab {

enum class AlgorithmKind { gd, sgd, pgd };
std::string to_string(AlgorithmKind k);
AlgorithmKind parse_algorithm(const std::string& s);

/// An optimizer with its run length. For PGD, `t` is the step cap and
/// `pgd_epsilon` <= 0 selects the largest admissible tolerance.
struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::gd;
  std::size_t t = 1;
  double pgd_epsilon = 0.0;
  std::size_t record_stride = 1;
  /// Data-independent start; the domain center when unset.
  std::optional<ParamVector> w0;
};

/// Runs the algorithm on S. `algo_seed` drives SGD's index stream and is
/// ignored by the deterministic methods.
Trace run_algorithm(const ProblemSpec& spec, const Dataset& S, const AlgorithmSpec& algo, std::uint64_t algo_seed);

/// Sum with pairwise splitting so results do not depend on how replicates
/// were scheduled.
double pairwise_sum(std::span<const double> values);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};
MeanEstimate mean_and_error(std::span<const double> values);

/// Substreams used for one replicate; exposed so single replicates can be
/// reproduced from the seed derivation alone.
struct ReplicateSeeds {
  std::uint64_t replicate = 0;
  std::uint64_t data = 0;
  std::uint64_t substitute = 0;
  std::uint64_t probes = 0;
  std::uint64_t algorithm(std::size_t j) const;
};
ReplicateSeeds replicate_seeds(std::uint64_t base_seed, std::size_t replicate, std::size_t n, std::size_t t);

/// Coupled pair: S and S' differ at index 0, both runs share algorithm seeds.
struct PairedRun {
  Dataset S;
  Dataset S_prime;
  Trace trace;
  Trace trace_prime;
  std::uint64_t shared_seed = 0;
};
PairedRun make_paired_run(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                          const ReplicateSeeds& seeds, std::size_t algo_seed_index = 0);

/// Everything measured on one replicate of one (n, t) cell.
struct ReplicateRecord {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double emp_risk = 0.0;            // mean over algorithm seeds of R_S(w_t)
  double pop_risk = 0.0;            // mean over algorithm seeds of R(w_t)
  double gap = 0.0;                 // pop_risk - emp_risk
  double stability_pair_diff = 0.0; // max over probes of |mean_j f(w_t,z) - f(w'_t,z)|
  double excess = 0.0;              // pop_risk - R(w*)
  double grad_norm = 0.0;           // mean over algorithm seeds of ||grad R_S(w_t)||
  std::optional<double> opt_gap;    // R_S(w_t) - R_S(w*_S) when w*_S is known
  double max_loss = 0.0;            // largest per-sample loss seen on S, S' and probes
  double min_loss = 0.0;
  HaltReason halt = HaltReason::completed;
};

struct ReplicateOptions {
  std::size_t algo_seeds_per_replicate = 1;
  std::size_t probe_count = 512;
};

/// The empirical minimizer used for optimization gaps: closed form on
/// quadratic_mean, local search around the population global minimum
/// otherwise. Empty when the search does not end at an interior point.
std::optional<ParamVector> empirical_global_minimizer(const ProblemSpec& spec, const Dataset& S);

ReplicateRecord run_replicate(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n, std::size_t replicate,
                              std::uint64_t base_seed, const ReplicateOptions& options);

/// All replicates of one cell, evaluated in parallel but returned in order.
std::vector<ReplicateRecord> run_replicates(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                            std::size_t replicates, std::uint64_t base_seed,
                                            const ReplicateOptions& options);

struct StabilityEstimate {
  std::size_t t = 0;
  double value = 0.0;
  std::size_t replicates = 0;
  std::size_t probe_count = 0;
  double std_error = 0.0;
  /// The probe max never exceeds the true supremum over the support.
  bool lower_estimate = true;
};

StabilityEstimate estimate_stability(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                     std::size_t replicates, std::size_t algo_seeds_per_replicate,
                                     std::size_t probe_count, std::uint64_t base_seed);
StabilityEstimate stability_from_records(const std::vector<ReplicateRecord>& records, std::size_t probe_count);

MeanEstimate estimate_generalization_gap(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                         std::size_t replicates, std::uint64_t base_seed);
MeanEstimate gap_from_records(const std::vector<ReplicateRecord>& records);

struct ExcessRiskReport {
  MeanEstimate excess;
  std::optional<MeanEstimate> opt_error;
  MeanEstimate gen_gap;
  /// excess <= E_opt + |E_gen| + 3 sqrt(se_excess^2 + se_opt^2 + se_gen^2);
  /// empty when w*_S could not be located on some replicate.
  std::optional<bool> decomposition_holds;
  std::size_t location_failures = 0;
};
ExcessRiskReport estimate_excess_risk(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                      std::size_t replicates, std::uint64_t base_seed);
ExcessRiskReport excess_from_records(const std::vector<ReplicateRecord>& records);

struct MinimaDistanceReport {
  std::size_t replicates = 0;
  std::size_t event_count = 0;
  double event_frequency = 0.0;
  double bound = 0.0;             // 8 L0/(n lambda)
  double max_ratio = 0.0;         // max over event replicates of distance / bound
  std::size_t violations = 0;     // event replicates with distance > bound
  std::size_t location_failures = 0;
  std::vector<double> distances;  // per replicate, NaN when location failed
  std::vector<bool> events;
};

/// Good event: ||grad R_S(w*)|| <= lambda^2/(16 L2) (vacuous when L2 = 0)
/// and ||hess R_S(w*) - hess R(w*)|| <= lambda/4, for both S and S'.
bool good_event(const ProblemSpec& spec, const Dataset& S, const ParamVector& w_star);

MinimaDistanceReport minima_distance_experiment(const ProblemSpec& spec, std::size_t n, std::size_t replicates,
                                                std::uint64_t base_seed);

struct TailCheck {
  TailKind kind = TailKind::gradient_inner;
  double delta = 0.0;
  double frequency = 0.0;
  double std_error = 0.0;
  double bound = 0.0;   // clamped
  double bound_raw = 0.0;
  bool pass = false;    // frequency - 3 se <= bound
};

struct ConcentrationReport {
  std::size_t replicates = 0;
  std::size_t n = 0;
  MeanEstimate grad_moment;  // E||grad R_S - grad R||^2 at w_ref
  MeanEstimate hess_moment;  // E||hess R_S - hess R||^2 at w_ref
  double grad_moment_bound = 0.0;
  std::optional<double> hess_moment_bound;  // needs d >= 2
  bool grad_moment_pass = false;
  bool hess_moment_pass = false;
  std::vector<TailCheck> tails;
};

/// Moments at w_ref and tail frequencies at w_tail (defaults to w_ref) at
/// the deviations where each tail bound equals the given levels.
ConcentrationReport concentration_mc(const ProblemSpec& spec, const ParamVector& w_ref, std::size_t n,
                                     std::size_t replicates, std::uint64_t base_seed,
                                     std::optional<ParamVector> w_tail = std::nullopt,
                                     std::vector<double> tail_levels = {0.9, 0.5, 0.1});

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points_used = 0;
  std::vector<std::string> warnings;
};

/// Least-squares slope of log y against log x.
ScalingFit fit_scaling(const std::vector<double>& xs, const std::vector<double>& ys);
/// Same on per-x replicate means, with a percentile bootstrap interval from
/// resampling replicates within each x.
ScalingFit fit_scaling(const std::vector<double>& xs, const std::vector<std::vector<double>>& replicate_values,
                       std::size_t bootstrap = 1000, std::uint64_t seed = 0);

/// Deterministic parallel loop over [0, count); fn(i) must only touch slot i.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace stablab
