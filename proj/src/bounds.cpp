#include "stablab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace stablab {

namespace {

constexpr double kE = std::numbers::e;
constexpr double kUnderflowCutoff = 1e-300;

void require_log_dim(int d, const char* who) {
  if (d < 2) {
    std::ostringstream msg;
    msg << who << ": d = " << d << " makes log d vanish; the concentration constants need d >= 2";
    throw UsageError(msg.str());
  }
}

void require_positive_n(double n, const char* who) {
  if (!(n >= 1.0) || !std::isfinite(n)) throw UsageError(std::string(who) + ": n must be a finite value >= 1");
}

void require_nonneg(double v, const char* what, const char* who) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw UsageError(std::string(who) + ": " + what + " must be finite and nonnegative");
}

// 5 sqrt(log d) + 4e log d / sqrt(n)
double concentration_factor(double n, int d) {
  const double ld = std::log(static_cast<double>(d));
  return 5.0 * std::sqrt(ld) + 4.0 * kE * ld / std::sqrt(n);
}

// min{3D, 3 lambda / (2 L2)} with the L2 = 0 limit picking 3D.
double trapping_radius(const ConstantsBundle& c) {
  if (c.L2 == 0.0) return 3.0 * c.D;
  return std::min(3.0 * c.D, 3.0 * c.lambda / (2.0 * c.L2));
}

void finish(BoundReport& r) {
  double sum = 0.0;
  for (const auto& [key, value] : r.terms) {
    if (!(value >= 0.0)) throw InternalError("bound term '" + key + "' in " + r.name + " is negative or NaN");
    sum += value;
  }
  r.total = sum;
}

void add_constant_inputs(BoundReport& r, const ConstantsBundle& c) {
  r.inputs.insert(r.inputs.end(), {{"L0", c.L0},
                                   {"L1", c.L1},
                                   {"L2", c.L2},
                                   {"lambda", c.lambda},
                                   {"alpha", c.alpha},
                                   {"M", c.M},
                                   {"D", c.D},
                                   {"K", static_cast<double>(c.K)}});
}

// The shared 1/n block of the convex bounds:
// 8L0/(n lambda) {L0 + 64 L0^2 L2^2 D/lambda^3 + 16 L1^2 D/lambda (...)^2}.
double convex_one_over_n(const ConstantsBundle& c, double n, int d) {
  const double f = concentration_factor(n, d);
  const double inner = c.L0 + 64.0 * c.L0 * c.L0 * c.L2 * c.L2 * c.D / std::pow(c.lambda, 3) +
                       16.0 * c.L1 * c.L1 * c.D / c.lambda * f * f;
  return 8.0 * c.L0 / (n * c.lambda) * inner;
}

double convex_sqrt_eps_term(const ConstantsBundle& c, double eps_t) {
  return 4.0 * std::sqrt(2.0) * c.L0 * (c.lambda + 4.0 * c.D * c.L2) / std::pow(c.lambda, 1.5) * std::sqrt(eps_t);
}

double good_event_total(const ConstantsBundle& c, double n, int d) {
  const double f = concentration_factor(n, d);
  return 512.0 * c.L0 * c.L0 * c.L2 * c.L2 / (n * std::pow(c.lambda, 4)) +
         128.0 * c.L1 * c.L1 / (n * c.lambda * c.lambda) * f * f;
}

}  // namespace

double BoundReport::term(const std::string& key) const {
  for (const auto& [k, v] : terms)
    if (k == key) return v;
  throw UsageError("BoundReport " + name + " has no term '" + key + "'");
}

double BoundReport::input(const std::string& key) const {
  for (const auto& [k, v] : inputs)
    if (k == key) return v;
  throw UsageError("BoundReport " + name + " has no input '" + key + "'");
}

bool BoundReport::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

BoundReport convex_stability_bound(const ConstantsBundle& c, double n, int d, double eps_t) {
  require_log_dim(d, "convex_stability_bound");
  require_positive_n(n, "convex_stability_bound");
  require_nonneg(eps_t, "eps_t", "convex_stability_bound");
  c.validate();
  BoundReport r;
  r.name = "convex_stability";
  add_constant_inputs(r, c);
  r.inputs.insert(r.inputs.end(), {{"n", n}, {"d", static_cast<double>(d)}, {"eps_t", eps_t}});
  r.terms = {{"sqrt_eps_term", convex_sqrt_eps_term(c, eps_t)}, {"one_over_n_term", convex_one_over_n(c, n, d)}};
  finish(r);
  return r;
}

BoundReport convex_excess_bound(const ConstantsBundle& c, double n, int d, double eps_t) {
  BoundReport r = convex_stability_bound(c, n, d, eps_t);
  r.name = "convex_excess";
  r.terms.insert(r.terms.begin(), {"eps_term", eps_t});
  finish(r);
  return r;
}

double gd_opt_bound(const ConstantsBundle& c, double t) {
  if (!(t > 0.0)) throw UsageError("gd_opt_bound: t must be positive");
  return c.D * c.D * c.L1 / (2.0 * t);
}

double sgd_opt_bound(const ConstantsBundle& c, double t) {
  if (!(t >= 0.0)) throw UsageError("sgd_opt_bound: t must be nonnegative");
  if (!(c.L1 > 0.0)) throw UsageError("sgd_opt_bound: L1 must be positive");
  return c.D * (c.L1 * c.L1 + 2.0 * c.L0 * c.L0) / (2.0 * c.L1 * std::sqrt(t + 1.0)) * (1.0 + std::log(t + 1.0));
}

ProbabilityReport good_event_prob_bound(const ConstantsBundle& c, double n, int d) {
  require_log_dim(d, "good_event_prob_bound");
  require_positive_n(n, "good_event_prob_bound");
  c.validate();
  ProbabilityReport out;
  BoundReport& r = out.report;
  r.name = "good_event_failure_prob";
  add_constant_inputs(r, c);
  r.inputs.insert(r.inputs.end(), {{"n", n}, {"d", static_cast<double>(d)}});
  const double f = concentration_factor(n, d);
  r.terms = {{"gradient_event_term", 512.0 * c.L0 * c.L0 * c.L2 * c.L2 / (n * std::pow(c.lambda, 4))},
             {"hessian_event_term", 128.0 * c.L1 * c.L1 / (n * c.lambda * c.lambda) * f * f}};
  finish(r);
  out.clamped = std::min(r.total, 1.0);
  if (r.total > 1.0) r.flags.push_back("vacuous");
  return out;
}

BoundReport local_minima_gen_bound(const ConstantsBundle& c, double n, int d) {
  require_log_dim(d, "local_minima_gen_bound");
  require_positive_n(n, "local_minima_gen_bound");
  c.validate();
  BoundReport r;
  r.name = "local_minima_gen";
  add_constant_inputs(r, c);
  r.inputs.insert(r.inputs.end(), {{"n", n}, {"d", static_cast<double>(d)}});
  const double f = concentration_factor(n, d);
  const double scale = 8.0 * c.L0 / (n * c.lambda);
  const double radius = trapping_radius(c);
  r.terms = {{"gradient_term", scale * c.L0},
             {"hessian_lipschitz_term", scale * 64.0 * c.L0 * c.L0 * c.L2 * c.L2 / std::pow(c.lambda, 3) * radius},
             {"hessian_concentration_term", scale * 16.0 * c.L1 * c.L1 / c.lambda * f * f * radius}};
  finish(r);
  return r;
}

double covering_radius(const ConstantsBundle& c) {
  if (!(c.L0 > 0.0) || !(c.L1 > 0.0)) throw UsageError("covering_radius: L0 and L1 must be positive");
  const double saddle_part = c.alpha * c.alpha / (16.0 * c.L0 * c.L1);
  if (c.L2 == 0.0) return saddle_part;
  return std::min(c.lambda / (8.0 * c.L2), saddle_part);
}

XiTerms xi_terms(const ConstantsBundle& c, double n, int d) {
  require_log_dim(d, "xi_terms");
  require_positive_n(n, "xi_terms");
  c.validate();
  if (!(c.alpha > 0.0) || !(c.lambda > 0.0)) throw UsageError("xi_terms: alpha and lambda must be positive");
  XiTerms x;
  x.xi1 = static_cast<double>(c.K) * good_event_total(c, n, d);
  x.r = covering_radius(c);
  double log_cover = 0.0;
  if (x.r >= 3.0 * c.D) {
    x.degenerate = true;
  } else {
    log_cover = static_cast<double>(d) * std::log(3.0 * c.D / x.r);
  }
  const double la = std::log(2.0) + log_cover - n * std::pow(c.alpha, 4) / (256.0 * std::pow(c.L0, 4));
  const double lb = std::log(4.0 * d) + log_cover - n * c.lambda * c.lambda / (256.0 * c.L1 * c.L1);
  const double top = std::max(la, lb);
  x.log_xi2 = top + std::log1p(std::exp(std::min(la, lb) - top));
  const double value = std::exp(x.log_xi2);
  if (value < kUnderflowCutoff) {
    x.xi2 = 0.0;
    x.underflow = true;
  } else {
    x.xi2 = value;
  }
  return x;
}

std::string to_string(SpuriousVariant v) { return v == SpuriousVariant::with_spurious ? "with_spurious" : "no_spurious"; }

SpuriousVariant parse_variant(const std::string& s) {
  if (s == "with_spurious") return SpuriousVariant::with_spurious;
  if (s == "no_spurious") return SpuriousVariant::no_spurious;
  throw UsageError("unknown variant '" + s + "' (expected with_spurious or no_spurious)");
}

namespace {

BoundReport nonconvex_common(const char* name, const ConstantsBundle& c, double n, int d, double zeta_t,
                             double delta, SpuriousVariant variant, double delta_prime, XiTerms& xi) {
  require_nonneg(zeta_t, "zeta_t", name);
  require_nonneg(delta, "delta", name);
  require_nonneg(delta_prime, "delta_prime", name);
  xi = xi_terms(c, n, d);
  BoundReport r;
  r.name = name;
  add_constant_inputs(r, c);
  r.inputs.insert(r.inputs.end(), {{"n", n},
                                   {"d", static_cast<double>(d)},
                                   {"zeta_t", zeta_t},
                                   {"delta", delta},
                                   {"delta_prime", delta_prime},
                                   {"xi1", xi.xi1},
                                   {"xi2", xi.xi2},
                                   {"r", xi.r}});
  r.flags.push_back(to_string(variant));
  if (xi.degenerate) r.flags.push_back("covering_degenerate");
  if (xi.underflow) r.flags.push_back("xi2_underflow");
  return r;
}

}  // namespace

BoundReport nonconvex_gen_bound(const ConstantsBundle& c, double n, int d, double zeta_t, double delta,
                                SpuriousVariant variant, double delta_prime) {
  XiTerms xi;
  BoundReport r = nonconvex_common("nonconvex_gen", c, n, d, zeta_t, delta, variant, delta_prime, xi);
  const double K = static_cast<double>(c.K);
  const double radius = trapping_radius(c);
  const double zeta_term = 8.0 * c.L0 / c.lambda * zeta_t;
  const double delta_term = 2.0 * c.L0 * c.D * delta;
  if (variant == SpuriousVariant::with_spurious) {
    r.terms = {{"zeta_term", zeta_term},
               {"delta_term", delta_term},
               {"sqrt_n_term", 2.0 * K * c.M / std::sqrt(n)},
               {"one_over_n_term", 8.0 * K * c.L0 * c.L0 / (n * c.lambda)},
               {"xi1_term", (c.L0 * radius + 2.0 * c.M) * xi.xi1},
               {"xi2_term", 2.0 * c.M * xi.xi2}};
  } else {
    r.terms = {{"zeta_term", zeta_term},
               {"delta_term", delta_term},
               {"delta_prime_term", 6.0 * c.M * delta_prime},
               {"one_over_n_term", 8.0 * (K + 4.0) * c.L0 * c.L0 / (n * c.lambda)},
               {"xi1_term", ((K + 4.0) * c.L0 / K * radius + 6.0 * c.M) * xi.xi1},
               {"xi2_term", 6.0 * c.M * xi.xi2}};
  }
  finish(r);
  return r;
}

BoundReport nonconvex_excess_bound(const ConstantsBundle& c, double n, int d, double zeta_t, double delta,
                                   SpuriousVariant variant, double delta_prime, double opt_gap) {
  XiTerms xi;
  BoundReport r = nonconvex_common("nonconvex_excess", c, n, d, zeta_t, delta, variant, delta_prime, xi);
  const double K = static_cast<double>(c.K);
  const double radius = trapping_radius(c);
  const double zeta_term = 4.0 * c.L0 / c.lambda * zeta_t;
  const double delta_term = c.L0 * c.D * delta;
  if (variant == SpuriousVariant::with_spurious) {
    require_nonneg(opt_gap, "opt_gap", "nonconvex_excess_bound");
    r.inputs.emplace_back("opt_gap", opt_gap);
    r.terms = {{"zeta_term", zeta_term},
               {"delta_term", delta_term},
               {"sqrt_n_term", 2.0 * K * c.M / std::sqrt(n)},
               {"one_over_n_term", 8.0 * K * c.L0 * c.L0 / (n * c.lambda)},
               {"xi1_term", (c.L0 * radius + 2.0 * c.M) * xi.xi1},
               {"xi2_term", 2.0 * c.M * xi.xi2},
               {"opt_gap_term", opt_gap}};
  } else {
    r.terms = {{"zeta_term", zeta_term},
               {"delta_term", delta_term},
               {"delta_prime_term", 8.0 * c.M * delta_prime},
               {"one_over_n_term", 8.0 * (K + 4.0) * c.L0 * c.L0 / (n * c.lambda)},
               {"xi1_term", ((K + 4.0) * c.L0 / K * radius + 8.0 * c.M) * xi.xi1},
               {"xi2_term", 8.0 * c.M * xi.xi2}};
  }
  finish(r);
  return r;
}

IterationBound pgd_iteration_bound(const ConstantsBundle& c, double eps) {
  if (!(eps > 0.0)) throw UsageError("pgd_iteration_bound: eps must be positive");
  const double curvature_phase = 256.0 * c.L2 * c.L2 / (9.0 * eps);
  IterationBound b;
  b.statement = 2.0 * c.M * std::max(2.0 * c.L1 / (eps * eps), curvature_phase);
  b.proof = 2.0 * c.M * std::max(4.0 * c.L1 / (eps * eps), curvature_phase);
  return b;
}

double pgd_pair_decrease(const ConstantsBundle& c, double eps) {
  if (!(eps > 0.0)) throw UsageError("pgd_pair_decrease: eps must be positive");
  const double gradient_phase = eps * eps / (2.0 * c.L1);
  if (c.L2 == 0.0) return gradient_phase;
  return std::min(gradient_phase, 9.0 * eps / (256.0 * c.L2 * c.L2));
}

std::string to_string(TailKind k) { return k == TailKind::gradient_inner ? "gradient_inner" : "hessian"; }

TailKind parse_tail_kind(const std::string& s) {
  if (s == "gradient_inner") return TailKind::gradient_inner;
  if (s == "hessian") return TailKind::hessian;
  throw UsageError("unknown tail kind '" + s + "' (expected gradient_inner or hessian)");
}

TailBound subgaussian_tail_bound(const ConstantsBundle& c, double n, int d, double delta_dev, TailKind which) {
  if (!(delta_dev > 0.0)) throw UsageError("subgaussian_tail_bound: delta must be positive");
  if (!(n >= 0.0)) throw UsageError("subgaussian_tail_bound: n must be nonnegative");
  if (d < 1) throw UsageError("subgaussian_tail_bound: d must be at least 1");
  TailBound b;
  if (which == TailKind::gradient_inner) {
    b.raw = 2.0 * std::exp(-n * delta_dev * delta_dev / (16.0 * std::pow(c.L0, 4)));
  } else {
    b.raw = 2.0 * d * std::exp(-n * delta_dev * delta_dev / (16.0 * c.L1 * c.L1));
  }
  b.clamped = std::clamp(b.raw, 0.0, 1.0);
  return b;
}

double tail_delta_for_level(const ConstantsBundle& c, double n, int d, double level, TailKind which) {
  if (!(level > 0.0)) throw UsageError("tail_delta_for_level: level must be positive");
  if (!(n > 0.0)) throw UsageError("tail_delta_for_level: n must be positive");
  const double prefactor = which == TailKind::gradient_inner ? 2.0 : 2.0 * d;
  const double scale = which == TailKind::gradient_inner ? 16.0 * std::pow(c.L0, 4) : 16.0 * c.L1 * c.L1;
  if (level >= prefactor) return 0.0;
  return std::sqrt(scale * std::log(prefactor / level) / n);
}

double gradient_moment_bound(const ConstantsBundle& c, double n) {
  require_positive_n(n, "gradient_moment_bound");
  return c.L0 * c.L0 / n;
}

double hessian_moment_bound(const ConstantsBundle& c, double n, int d) {
  require_log_dim(d, "hessian_moment_bound");
  require_positive_n(n, "hessian_moment_bound");
  const double ld = std::log(static_cast<double>(d));
  const double inner = 10.0 * std::sqrt(ld) * c.L1 + 8.0 * kE * ld * c.L1 / std::sqrt(n);
  return inner * inner / n;
}

double minima_distance_bound(const ConstantsBundle& c, double n) {
  require_positive_n(n, "minima_distance_bound");
  return 8.0 * c.L0 / (n * c.lambda);
}

double error_bound_proof_factor(const ConstantsBundle& c) { return 2.0 / c.lambda; }
double error_bound_statement_factor(const ConstantsBundle& c) { return c.lambda / 4.0; }

}  // namespace stablab
