#pragma once

#include "stablab/problems.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stablab {

/// Radius lambda/(4 L2) of the trapping ball around a population minimum;
/// +inf when L2 = 0.
double trapping_ball_radius(const ConstantsBundle& c);

struct LocatedMinimum {
  ParamVector w;
  std::size_t steps = 0;
  double grad_norm = 0.0;   // ||grad R_S|| at the terminal
  double radius = 0.0;      // search-ball radius actually used
  bool interior = false;    // strictly inside both the search ball and the domain
};

/// Minimizes R_S over ball(w_k, lambda/(4 L2)) intersected with the domain by
/// projected gradient steps of size 1/L1 started at w_k. Stops once a step
/// moves less than 1e-10; throws NumericalError after 1e5 steps.
LocatedMinimum locate_empirical_min_near(const ProblemSpec& spec, const Dataset& S, std::size_t k);
LocatedMinimum locate_empirical_min_near(const RiskFunction& objective, const BallDomain& domain,
                                         const ConstantsBundle& c, const ParamVector& center);

/// Euclidean projection onto the intersection of two balls (Dykstra).
ParamVector project_two_balls(const BallDomain& a, const BallDomain& b, const ParamVector& v);

struct CensusMatch {
  std::size_t found_index = 0;
  double distance = 0.0;
};

struct MinimaCensus {
  std::vector<ParamVector> found_minima;  // sorted by risk, then lexicographically
  std::vector<double> found_risks;
  /// One slot per population minimum.
  std::vector<std::optional<CensusMatch>> matched;
  std::vector<std::size_t> unmatched_found;
  std::size_t starts_used = 0;
  std::size_t unconverged = 0;
  std::size_t boundary_excluded = 0;
  std::size_t not_sosp = 0;
  double merge_radius = 0.0;
  double match_radius = 0.0;
  std::vector<std::string> warnings;

  std::size_t matched_count() const;
  /// Exactly K found minima, each matched to a distinct population minimum.
  bool pass() const;
};

inline constexpr double kCensusSospTol = 1e-7;
inline constexpr double kCensusGradTol = 1e-9;

/// min(lambda/(8 L2), 0.05 D).
double default_merge_radius(const ConstantsBundle& c);

/// Multistart projected GD from randomly shifted Halton starts in the domain.
/// merge_radius <= 0 selects the default.
MinimaCensus minima_census(const ProblemSpec& spec, const Dataset& S, std::size_t starts, double merge_radius,
                           std::uint64_t seed);
MinimaCensus minima_census(const ProblemSpec& spec, const RiskFunction& objective, std::size_t starts,
                           double merge_radius, std::uint64_t seed);

struct ErrorBoundReport {
  std::size_t qualifying = 0;
  std::size_t attempted = 0;
  std::size_t proof_violations = 0;      // distance > (2/lambda) ||grad||
  std::size_t statement_violations = 0;  // distance > (lambda/4) ||grad||
  double max_proof_ratio = 0.0;          // distance / ((2/lambda) ||grad||)
  double grad_threshold = 0.0;           // alpha^2/(2 L0)
  std::optional<ParamVector> worst_point;
};

/// Samples probes near the census minima and uniformly in the domain, keeps
/// those with ||grad R_S|| < alpha^2/(2 L0) and sigma_min > -lambda/2, and
/// compares their distance to the nearest census minimum with the gradient
/// norm. Gives up after 50 attempts per requested probe.
ErrorBoundReport error_bound_check(const ProblemSpec& spec, const Dataset& S, const MinimaCensus& census,
                                   std::size_t probes, std::uint64_t seed);

struct FieldRow {
  ParamVector w;
  double grad_norm = 0.0;
  double sigma_min = 0.0;
};

struct FieldReport {
  std::vector<FieldRow> rows;
  std::vector<std::size_t> violations;  // indices into rows
  double alpha = 0.0;
  double curvature = 0.0;
  bool pass() const { return violations.empty(); }
};

/// Grid map of (||grad||, sigma_min). Flags points with
/// ||grad|| <= (1 - slack) alpha but |sigma_min| < (1 - slack) curvature.
FieldReport min_eig_field(const RiskFunction& objective, const BallDomain& domain, double grid_resolution,
                          double alpha, double curvature, double slack = 0.05);
/// Population (S == nullptr) or empirical field at the certified alpha and
/// strict-saddle curvature.
FieldReport min_eig_field(const ProblemSpec& spec, const Dataset* S, double grid_resolution);

/// R_S at the census minimum nearest to w minus the smallest census risk.
double opt_gap_to_global(const ProblemSpec& spec, const Dataset& S, const ParamVector& w, const MinimaCensus& census);

}  // namespace stablab
