#include "stablab/grid.hpp"
#include "stablab/problems.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace stablab {

namespace {

constexpr double kInflate = 1.05;
constexpr double kDeflate = 0.95;

std::string format_point(const ParamVector& w) {
  std::ostringstream out;
  out.precision(6);
  out << "(";
  for (Eigen::Index i = 0; i < w.size(); ++i) out << (i ? ", " : "") << w[i];
  out << ")";
  return out.str();
}

struct ProbeSet {
  std::vector<ParamVector> points;
  std::vector<std::pair<std::size_t, ParamVector>> pair_partners;  // (index, neighbor)
  std::string description;
};

ProbeSet lattice_probes(const BallDomain& domain, double h) {
  const Eigen::Index d = domain.dim();
  const long m = static_cast<long>(std::floor(domain.radius() / h));
  const long side = 2 * m + 1;
  ProbeSet set;
  std::unordered_map<long long, std::size_t> index;
  auto key = [&](const std::vector<long>& k) {
    long long acc = 0;
    for (std::size_t i = k.size(); i-- > 0;) acc = acc * side + (k[i] + m);
    return acc;
  };
  for_each_grid_point(domain, h, [&](const ParamVector& w, const std::vector<long>& k) {
    index.emplace(key(k), set.points.size());
    set.points.push_back(w);
  });
  // Axis neighbours k + e_j that are also inside the ball.
  for_each_grid_point(domain, h, [&](const ParamVector&, const std::vector<long>& k) {
    const std::size_t self = index.at(key(k));
    std::vector<long> nb = k;
    for (Eigen::Index j = 0; j < d; ++j) {
      nb[j] += 1;
      if (nb[j] <= m && index.count(key(nb))) set.pair_partners.emplace_back(self, set.points[index.at(key(nb))]);
      nb[j] -= 1;
    }
  });
  std::ostringstream desc;
  desc << "grid h=" << h << " domain_points=" << set.points.size();
  set.description = desc.str();
  return set;
}

ProbeSet halton_probes(const BallDomain& domain, double h, std::size_t count) {
  const Eigen::Index d = domain.dim();
  ProbeSet set;
  std::size_t skip = 1;
  while (set.points.size() < count) {
    const auto batch = halton_points(d, 4096, skip);
    skip += batch.size();
    for (const auto& p : batch) {
      const ParamVector unit = 2.0 * p.array() - 1.0;
      if (unit.norm() <= 1.0) set.points.push_back(domain.center() + domain.radius() * unit);
      if (set.points.size() == count) break;
    }
    if (skip > 50'000'000) throw UsageError("certify_constants: Halton rejection sampling is too sparse in this dimension");
  }
  // One partner per point along a fixed pseudo-random direction.
  Rng rng(0xC3D7ULL);
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const ParamVector v = set.points[i] + h * rng.unit_sphere(d);
    if (domain.contains(v)) set.pair_partners.emplace_back(i, v);
  }
  std::ostringstream desc;
  desc << "halton points=" << set.points.size() << " h=" << h;
  set.description = desc.str();
  return set;
}

std::vector<ParamVector> boundary_probes(const BallDomain& domain, double h, std::size_t fallback_count) {
  const Eigen::Index d = domain.dim();
  const double R = domain.radius();
  std::vector<ParamVector> out;
  auto push_dir = [&](const ParamVector& u) { out.push_back(domain.center() + R * u); };
  if (d == 1) {
    push_dir(ParamVector::Constant(1, -1.0));
    push_dir(ParamVector::Constant(1, 1.0));
  } else if (d == 2) {
    const std::size_t count = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi * R / h)));
    for (std::size_t i = 0; i < count; ++i) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
      ParamVector u(2);
      u << std::cos(theta), std::sin(theta);
      push_dir(u);
    }
  } else if (d == 3) {
    // Fibonacci lattice on the sphere.
    const std::size_t count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(4.0 * std::numbers::pi * R * R / (h * h))), 32, 1'000'000);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      ParamVector u(3);
      u << r * std::cos(phi), r * std::sin(phi), z;
      push_dir(u);
    }
  } else {
    Rng rng(0xB0DAULL);
    for (std::size_t i = 0; i < fallback_count; ++i) push_dir(rng.unit_sphere(d));
  }
  // Axis poles are where the quartic families peak; always include them.
  for (Eigen::Index i = 0; i < d && d > 1; ++i) {
    push_dir(ParamVector::Unit(d, i));
    push_dir(-ParamVector::Unit(d, i));
  }
  return out;
}

// Newton's method on the population gradient. Returns nullopt if it does
// not converge inside the domain.
std::optional<ParamVector> newton_critical_point(const RiskFunction& pop, const BallDomain& domain, ParamVector w) {
  for (int it = 0; it < 60; ++it) {
    const ParamVector g = pop.gradient(w);
    if (g.norm() <= 1e-11) return domain.contains(w) ? std::optional<ParamVector>(w) : std::nullopt;
    Eigen::FullPivLU<Matrix> lu(pop.hessian(w));
    if (!lu.isInvertible()) return std::nullopt;
    w -= lu.solve(g);
    if (!all_finite(w) || domain.offset_norm(w) > 1.5 * domain.radius()) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

CertificationDetail certify_constants_detailed(const ProblemSpec& spec, double h, std::size_t halton_count) {
  if (!(h > 0.0) || !std::isfinite(h)) throw UsageError("certify_constants: grid_resolution must be positive");
  const BallDomain& domain = spec.domain();
  const Eigen::Index d = domain.dim();
  const RiskFunction& pop = spec.population();
  const auto& minima = spec.population_info().local_minima;
  if (minima.empty()) throw UsageError("certify_constants: problem lists no population minima");

  ProbeSet probes;
  if (d <= 3) {
    if (grid_cube_count(d, domain.radius(), h) > 1e7)
      throw UsageError("certify_constants: grid_resolution too fine (more than 1e7 grid points)");
    probes = lattice_probes(domain, h);
  } else {
    probes = halton_probes(domain, h, halton_count);
  }
  const auto boundary = boundary_probes(domain, h, halton_count);

  double grad_max = 0.0, hess_max = 0.0, loss_max = 0.0, loss_min = INFINITY;
  ParamVector loss_min_at;
  auto absorb = [&](const ParamVector& w, const SupportEnvelope& env) {
    grad_max = std::max(grad_max, env.grad_norm_max);
    hess_max = std::max(hess_max, env.hess_norm_max);
    loss_max = std::max(loss_max, env.loss_max);
    if (env.loss_min < loss_min) {
      loss_min = env.loss_min;
      loss_min_at = w;
    }
  };

  std::vector<double> pop_grad_norm(probes.points.size());
  std::vector<double> pop_sigma(probes.points.size());
  for (std::size_t i = 0; i < probes.points.size(); ++i) {
    const ParamVector& w = probes.points[i];
    absorb(w, spec.envelope(w));
    pop_grad_norm[i] = pop.gradient(w).norm();
    pop_sigma[i] = min_eigenvalue(pop.hessian(w));
  }

  double raw_beta = INFINITY;
  for (const auto& w : boundary) {
    const SupportEnvelope env = spec.envelope(w);
    absorb(w, env);
    const double radial = pop.gradient(w).dot(w - domain.center());
    raw_beta = std::min(raw_beta, radial - env.radial_deviation_max);
  }
  if (loss_min < -1e-9)
    throw CertificationError("certify_constants: loss is negative (" + std::to_string(loss_min) + ") at " +
                             format_point(loss_min_at));

  double l2_raw = 0.0;
  for (const auto& [i, v] : probes.pair_partners) {
    const ParamVector& w = probes.points[i];
    l2_raw = std::max(l2_raw, spec.hessian_difference_sup(w, v) / (w - v).norm());
  }

  CertificationDetail out;
  ConstantsBundle& c = out.constants;
  c.L0 = kInflate * grad_max;
  c.L1 = kInflate * hess_max;
  c.L2 = kInflate * l2_raw;
  c.M = kInflate * loss_max;
  c.D = domain.diameter();
  c.K = static_cast<int>(minima.size());

  double lambda_raw = INFINITY;
  for (const auto& w : minima) lambda_raw = std::min(lambda_raw, min_eigenvalue(pop.hessian(w)));
  if (!(lambda_raw > 0.0))
    throw CertificationError("certify_constants: listed minimum has non-positive curvature " +
                             std::to_string(lambda_raw));
  c.lambda = kDeflate * lambda_raw;

  // Critical points other than the listed minima, seeded from probes whose
  // gradient is small enough that a critical point may lie within one cell.
  const double seed_threshold = hess_max * h * std::sqrt(static_cast<double>(d));
  double saddle_raw = INFINITY;
  for (std::size_t i = 0; i < probes.points.size(); ++i) {
    if (pop_grad_norm[i] > seed_threshold) continue;
    const auto crit = newton_critical_point(pop, domain, probes.points[i]);
    if (!crit) continue;
    bool known = false;
    for (const auto& m : minima) known = known || (m - *crit).norm() <= 1e-6;
    for (const auto& m : out.critical_points) known = known || (m - *crit).norm() <= 1e-6;
    if (known) continue;
    const double sigma = min_eigenvalue(pop.hessian(*crit));
    if (std::abs(sigma) <= 1e-9)
      throw CertificationError("certify_constants: degenerate critical point at " + format_point(*crit));
    if (sigma > 0.0)
      throw CertificationError("certify_constants: unlisted population minimum at " + format_point(*crit));
    out.critical_points.push_back(*crit);
    saddle_raw = std::min(saddle_raw, std::abs(sigma));
  }
  c.saddle_curvature = std::isfinite(saddle_raw) ? std::min(c.lambda, kDeflate * saddle_raw) : c.lambda;

  // Largest alpha for which small gradient forces |sigma_min| >= saddle_curvature on the probes.
  double alpha_raw = INFINITY;
  std::size_t alpha_at = 0;
  for (std::size_t i = 0; i < probes.points.size(); ++i) {
    if (std::abs(pop_sigma[i]) < c.saddle_curvature && pop_grad_norm[i] < alpha_raw) {
      alpha_raw = pop_grad_norm[i];
      alpha_at = i;
    }
  }
  if (std::isfinite(alpha_raw)) {
    if (alpha_raw < 1e-9)
      throw CertificationError("certify_constants: strict-saddle implication fails at " +
                               format_point(probes.points[alpha_at]) + " (gradient " + std::to_string(alpha_raw) +
                               ", sigma_min " + std::to_string(pop_sigma[alpha_at]) + ")");
    c.alpha = kDeflate * alpha_raw;
  } else {
    c.alpha = c.L0;
  }

  out.raw_beta = raw_beta;
  if (raw_beta > 0.0) c.beta = std::min(kDeflate * raw_beta, kDeflate * c.L1);

  out.domain_points = probes.points.size();
  out.boundary_points = boundary.size();
  c.provenance = probes.description + " boundary_points=" + std::to_string(boundary.size());
  c.validate();
  return out;
}

ConstantsBundle certify_constants(const ProblemSpec& spec, double grid_resolution) {
  return certify_constants_detailed(spec, grid_resolution).constants;
}

SeparationReport validate_minima_separation(const std::vector<ParamVector>& minima, const ConstantsBundle& c) {
  SeparationReport report;
  report.required = c.L2 > 0.0 ? 4.0 * c.lambda / c.L2 : INFINITY;
  for (std::size_t i = 0; i < minima.size(); ++i)
    for (std::size_t j = i + 1; j < minima.size(); ++j) {
      const double dist = (minima[i] - minima[j]).norm();
      report.pairs.push_back({i, j, dist});
      if (!(dist >= report.required)) report.pass = false;
    }
  return report;
}

SeparationReport validate_minima_separation(const ProblemSpec& spec) {
  return validate_minima_separation(spec.population_info().local_minima, spec.constants());
}

}  // namespace stablab
