#include "stablab/landscape.hpp"

#include "stablab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace stablab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLocateStepTol = 1e-10;
constexpr std::size_t kLocateStepCap = 100'000;
constexpr std::size_t kCensusStepCap = 100'000;

bool lex_less(const ParamVector& a, const ParamVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

std::size_t nearest_index(const std::vector<ParamVector>& points, const ParamVector& w) {
  if (points.empty()) throw UsageError("nearest_index: empty point set");
  std::size_t best = 0;
  double best_d = kInf;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - w).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

double trapping_ball_radius(const ConstantsBundle& c) {
  if (c.L2 == 0.0) return kInf;
  return c.lambda / (4.0 * c.L2);
}

ParamVector project_two_balls(const BallDomain& a, const BallDomain& b, const ParamVector& v) {
  const double gap = (a.center() - b.center()).norm();
  if (gap + b.radius() <= a.radius()) return project(b, v);
  if (gap + a.radius() <= b.radius()) return project(a, v);
  if (gap > a.radius() + b.radius()) throw UsageError("project_two_balls: the balls do not intersect");
  ParamVector x = v;
  ParamVector p = ParamVector::Zero(v.size());
  ParamVector q = ParamVector::Zero(v.size());
  for (int it = 0; it < 10'000; ++it) {
    const ParamVector y = project(a, x + p);
    p = x + p - y;
    const ParamVector next = project(b, y + q);
    q = y + q - next;
    const double moved = (next - x).norm();
    x = next;
    if (moved <= 1e-15 && a.contains(x, 1e-12)) break;
  }
  return x;
}

LocatedMinimum locate_empirical_min_near(const RiskFunction& objective, const BallDomain& domain,
                                         const ConstantsBundle& c, const ParamVector& center) {
  LocatedMinimum out;
  out.radius = trapping_ball_radius(c);
  const bool whole_domain = !std::isfinite(out.radius) || out.radius >= domain.diameter();
  const std::optional<BallDomain> local =
      whole_domain ? std::nullopt : std::optional<BallDomain>(BallDomain(center, out.radius));
  auto proj = [&](const ParamVector& v) { return local ? project_two_balls(domain, *local, v) : project(domain, v); };

  ParamVector w = proj(center);
  for (std::size_t step = 1; step <= kLocateStepCap; ++step) {
    const ParamVector g = objective.gradient(w);
    if (!all_finite(g)) throw NumericalError("locate_empirical_min_near: non-finite gradient");
    const ParamVector next = proj(w - g / c.L1);
    const double moved = (next - w).norm();
    w = next;
    if (moved <= kLocateStepTol) {
      out.steps = step;
      out.w = w;
      out.grad_norm = objective.gradient(w).norm();
      const bool inside_local = !local || (w - center).norm() < out.radius - 1e-9;
      out.interior = inside_local && domain.offset_norm(w) < domain.radius() - 1e-9;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "locate_empirical_min_near: no convergence within " << kLocateStepCap
      << " steps; last gradient norm " << objective.gradient(w).norm();
  throw NumericalError(msg.str());
}

LocatedMinimum locate_empirical_min_near(const ProblemSpec& spec, const Dataset& S, std::size_t k) {
  const auto& minima = spec.population_info().local_minima;
  if (k >= minima.size()) throw UsageError("locate_empirical_min_near: population minimum index out of range");
  const auto objective = spec.empirical(S);
  return locate_empirical_min_near(*objective, spec.domain(), spec.constants(), minima[k]);
}

std::size_t MinimaCensus::matched_count() const {
  return static_cast<std::size_t>(std::count_if(matched.begin(), matched.end(), [](const auto& m) { return m.has_value(); }));
}

bool MinimaCensus::pass() const {
  return found_minima.size() == matched.size() && matched_count() == matched.size() && unmatched_found.empty();
}

double default_merge_radius(const ConstantsBundle& c) {
  const double half_trap = c.L2 == 0.0 ? kInf : c.lambda / (8.0 * c.L2);
  return std::min(half_trap, 0.05 * c.D);
}

MinimaCensus minima_census(const ProblemSpec& spec, const RiskFunction& objective, std::size_t starts,
                           double merge_radius, std::uint64_t seed) {
  const BallDomain& dom = spec.domain();
  const Eigen::Index d = dom.dim();
  if (d > 3) throw UsageError("minima_census: multistart census is limited to d <= 3");
  if (starts < 1) throw UsageError("minima_census: starts must be positive");
  const ConstantsBundle& c = spec.constants();

  MinimaCensus census;
  census.merge_radius = merge_radius > 0.0 ? merge_radius : default_merge_radius(c);
  census.match_radius = c.L2 == 0.0 ? 0.1 * c.D : trapping_ball_radius(c);

  // Halton starts with a random Cranley-Patterson shift, rejected into the ball.
  Rng rng(substream(seed, 0xC3));
  ParamVector shift(d);
  for (Eigen::Index i = 0; i < d; ++i) shift[i] = rng.uniform01();
  std::vector<ParamVector> start_points;
  std::size_t skip = 1;
  while (start_points.size() < starts) {
    for (const auto& h : halton_points(d, starts, skip)) {
      ParamVector u(d);
      for (Eigen::Index i = 0; i < d; ++i) u[i] = std::fmod(h[i] + shift[i], 1.0);
      const ParamVector w = dom.center() + dom.radius() * (2.0 * u.array() - 1.0).matrix();
      if (dom.contains(w) && start_points.size() < starts) start_points.push_back(w);
    }
    skip += starts;
  }

  struct Candidate {
    ParamVector w;
    double risk;
  };
  std::vector<Candidate> candidates;
  for (const auto& w0 : start_points) {
    ++census.starts_used;
    ParamVector w = w0;
    bool converged = false;
    bool on_boundary = false;
    for (std::size_t step = 0; step < kCensusStepCap; ++step) {
      const ParamVector g = objective.gradient(w);
      if (g.norm() <= kCensusGradTol) {
        converged = true;
        break;
      }
      const ParamVector next = project(dom, w - g / c.L1);
      if ((next - w).norm() <= 1e-14) {
        // Stationary for the projected map but with nonzero gradient.
        on_boundary = true;
        break;
      }
      w = next;
    }
    if (on_boundary || (converged && dom.offset_norm(w) >= dom.radius() - 1e-8)) {
      ++census.boundary_excluded;
      continue;
    }
    if (!converged) {
      ++census.unconverged;
      continue;
    }
    const bool sosp = objective.gradient(w).norm() <= kCensusSospTol &&
                      min_eigenvalue(objective.hessian(w)) >= -kCensusSospTol;
    if (!sosp) {
      ++census.not_sosp;
      continue;
    }
    candidates.push_back({w, objective.value(w)});
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.risk != b.risk) return a.risk < b.risk;
    return lex_less(a.w, b.w);
  });
  for (const auto& cand : candidates) {
    const bool duplicate = std::any_of(census.found_minima.begin(), census.found_minima.end(), [&](const ParamVector& m) {
      return (m - cand.w).norm() <= census.merge_radius;
    });
    if (!duplicate) {
      census.found_minima.push_back(cand.w);
      census.found_risks.push_back(cand.risk);
    }
  }

  const auto& pop = spec.population_info().local_minima;
  census.matched.assign(pop.size(), std::nullopt);
  for (std::size_t f = 0; f < census.found_minima.size(); ++f) {
    const std::size_t k = nearest_index(pop, census.found_minima[f]);
    const double dist = (pop[k] - census.found_minima[f]).norm();
    if (dist <= census.match_radius && !census.matched[k]) {
      census.matched[k] = CensusMatch{f, dist};
    } else {
      census.unmatched_found.push_back(f);
    }
  }

  if (static_cast<double>(census.unconverged) > 0.05 * static_cast<double>(census.starts_used)) {
    std::ostringstream msg;
    msg << census.unconverged << " of " << census.starts_used << " starts did not converge";
    census.warnings.push_back(msg.str());
  }
  return census;
}

MinimaCensus minima_census(const ProblemSpec& spec, const Dataset& S, std::size_t starts, double merge_radius,
                           std::uint64_t seed) {
  const auto objective = spec.empirical(S);
  return minima_census(spec, *objective, starts, merge_radius, seed);
}

ErrorBoundReport error_bound_check(const ProblemSpec& spec, const Dataset& S, const MinimaCensus& census,
                                   std::size_t probes, std::uint64_t seed) {
  ErrorBoundReport rep;
  if (census.found_minima.empty()) return rep;
  const ConstantsBundle& c = spec.constants();
  const BallDomain& dom = spec.domain();
  const auto objective = spec.empirical(S);
  rep.grad_threshold = c.alpha * c.alpha / (2.0 * c.L0);
  const double proof_factor = 2.0 / c.lambda;
  const double statement_factor = c.lambda / 4.0;
  // Near a minimum ||grad|| >= (lambda/2) dist, so this radius reaches the
  // edge of the qualifying region.
  const double local_radius = 4.0 * rep.grad_threshold / c.lambda;

  Rng rng(substream(seed, 0xEB));
  const std::size_t max_attempts = 50 * probes;
  while (rep.qualifying < probes && rep.attempted < max_attempts) {
    ++rep.attempted;
    ParamVector w;
    if (rep.attempted % 8 == 0) {
      w = dom.center() + rng.uniform_ball(dom.dim(), dom.radius());
    } else {
      const ParamVector& m = census.found_minima[rng.uniform_index(census.found_minima.size())];
      w = project(dom, m + rng.uniform_ball(dom.dim(), local_radius));
    }
    const double gnorm = objective->gradient(w).norm();
    if (!(gnorm < rep.grad_threshold)) continue;
    if (!(min_eigenvalue(objective->hessian(w)) > -c.lambda / 2.0)) continue;
    ++rep.qualifying;
    const double dist = (census.found_minima[nearest_index(census.found_minima, w)] - w).norm();
    const double proof_rhs = proof_factor * gnorm;
    if (dist > proof_rhs) ++rep.proof_violations;
    if (dist > statement_factor * gnorm) ++rep.statement_violations;
    const double ratio = proof_rhs > 0.0 ? dist / proof_rhs : (dist > 0.0 ? kInf : 0.0);
    if (ratio > rep.max_proof_ratio || !rep.worst_point) {
      rep.max_proof_ratio = std::max(rep.max_proof_ratio, ratio);
      rep.worst_point = w;
    }
  }
  return rep;
}

FieldReport min_eig_field(const RiskFunction& objective, const BallDomain& domain, double grid_resolution,
                          double alpha, double curvature, double slack) {
  if (domain.dim() > 3) throw UsageError("min_eig_field: grid fields are limited to d <= 3");
  if (!(grid_resolution > 0.0)) throw UsageError("min_eig_field: grid_resolution must be positive");
  if (grid_cube_count(domain.dim(), domain.radius(), grid_resolution) > 1e7)
    throw UsageError("min_eig_field: grid too fine (more than 1e7 points)");
  FieldReport rep;
  rep.alpha = alpha;
  rep.curvature = curvature;
  const double alpha_cut = (1.0 - slack) * alpha;
  const double curvature_cut = (1.0 - slack) * curvature;
  for_each_grid_point(domain, grid_resolution, [&](const ParamVector& w, const std::vector<long>&) {
    FieldRow row{w, objective.gradient(w).norm(), min_eigenvalue(objective.hessian(w))};
    if (row.grad_norm <= alpha_cut && std::abs(row.sigma_min) < curvature_cut) rep.violations.push_back(rep.rows.size());
    rep.rows.push_back(std::move(row));
  });
  return rep;
}

FieldReport min_eig_field(const ProblemSpec& spec, const Dataset* S, double grid_resolution) {
  const ConstantsBundle& c = spec.constants();
  if (S) {
    const auto objective = spec.empirical(*S);
    return min_eig_field(*objective, spec.domain(), grid_resolution, c.alpha, c.saddle_curvature);
  }
  return min_eig_field(spec.population(), spec.domain(), grid_resolution, c.alpha, c.saddle_curvature);
}

double opt_gap_to_global(const ProblemSpec& spec, const Dataset& S, const ParamVector& w, const MinimaCensus& census) {
  if (census.found_minima.empty()) throw UsageError("opt_gap_to_global: census found no minima");
  const auto objective = spec.empirical(S);
  const std::size_t k = nearest_index(census.found_minima, w);
  double best = kInf;
  for (const auto& m : census.found_minima) best = std::min(best, objective->value(m));
  return std::max(0.0, objective->value(census.found_minima[k]) - best);
}

}  // namespace stablab
