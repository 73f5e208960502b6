#include "stablab/optimizers.hpp"

#include <cmath>
#include <sstream>

namespace stablab {

std::string to_string(HaltReason reason) {
  switch (reason) {
    case HaltReason::completed: return "completed";
    case HaltReason::sosp_found: return "sosp_found";
    case HaltReason::step_cap: return "step_cap";
  }
  return "unknown";
}

namespace {

class Recorder {
 public:
  Recorder(Trace& trace, const RiskFunction& f, std::size_t stride) : trace_(trace), f_(f) {
    if (stride == 0) throw UsageError("record_stride must be at least 1");
    trace_.record_stride = stride;
  }

  void record(std::size_t step, const ParamVector& w, double grad_norm) {
    if (!trace_.recorded_steps.empty() && trace_.recorded_steps.back() == step) return;
    trace_.recorded_steps.push_back(step);
    trace_.iterates.push_back(w);
    trace_.empirical_risks.push_back(f_.value(w));
    trace_.grad_norms.push_back(grad_norm);
  }

  void maybe_record(std::size_t step, const ParamVector& w) {
    if (step % trace_.record_stride == 0) record(step, w, f_.gradient(w).norm());
  }

  void finish(std::size_t step, const ParamVector& w) {
    record(step, w, f_.gradient(w).norm());
    trace_.step_count = step;
    trace_.terminal = w;
  }

 private:
  Trace& trace_;
  const RiskFunction& f_;
};

void require_finite(const ParamVector& g, std::size_t step, const char* who) {
  if (!all_finite(g)) {
    std::ostringstream msg;
    msg << who << ": non-finite gradient at step " << step;
    throw NumericalError(msg.str());
  }
}

void require_start(const BallDomain& domain, const ParamVector& w0, const char* who) {
  if (w0.size() != domain.dim()) throw UsageError(std::string(who) + ": w0 has wrong dimension");
  if (!all_finite(w0) || !domain.contains(w0, 1e-12)) throw UsageError(std::string(who) + ": w0 must lie in the domain");
}

}  // namespace

Trace run_gd(const RiskFunction& objective, const BallDomain& domain, double L1, const ParamVector& w0,
             std::size_t steps, std::size_t record_stride) {
  require_start(domain, w0, "run_gd");
  if (steps < 1) throw UsageError("run_gd: steps must be at least 1");
  if (!(L1 > 0.0)) throw UsageError("run_gd: L1 must be positive");
  Trace trace;
  Recorder rec(trace, objective, record_stride);
  ParamVector w = w0;
  rec.record(0, w, objective.gradient(w).norm());
  for (std::size_t t = 0; t < steps; ++t) {
    const ParamVector g = objective.gradient(w);
    require_finite(g, t, "run_gd");
    w = project(domain, w - g / L1);
    rec.maybe_record(t + 1, w);
  }
  rec.finish(steps, w);
  return trace;
}

Trace run_gd(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, std::size_t steps,
             std::size_t record_stride) {
  const auto objective = spec.empirical(S);
  return run_gd(*objective, spec.domain(), spec.constants().L1, w0, steps, record_stride);
}

Trace run_sgd(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, std::size_t steps,
              std::uint64_t seed, std::size_t record_stride) {
  const BallDomain& domain = spec.domain();
  require_start(domain, w0, "run_sgd");
  if (S.empty()) throw UsageError("run_sgd: dataset is empty");
  const ConstantsBundle& c = spec.constants();
  const auto objective = spec.empirical(S);
  Trace trace;
  trace.rng_seed = seed;
  Recorder rec(trace, *objective, record_stride);
  Rng rng(seed);
  ParamVector w = w0;
  rec.record(0, w, objective->gradient(w).norm());
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t i = rng.uniform_index(S.size());
    const ParamVector g = spec.grad(w, S[i]);
    require_finite(g, t, "run_sgd");
    const double eta = c.D / (c.L1 * std::sqrt(static_cast<double>(t) + 1.0));
    w = project(domain, w - eta * g);
    rec.maybe_record(t + 1, w);
  }
  rec.finish(steps, w);
  return trace;
}

double pgd_max_epsilon(const ConstantsBundle& c) {
  if (!c.beta) throw UsageError("PGD requires a certified boundary floor beta");
  if (!(c.L2 > 0.0)) throw UsageError("PGD requires L2 > 0");
  const double b = *c.beta;
  const double first = 8.0 * std::pow(b * c.L2, 3) / (27.0 * std::pow(c.L1, 3));
  const double second = 27.0 / (std::pow(64.0, 3) * std::pow(c.L2, 3));
  return std::min({first, second, b / 2.0});
}

void validate_pgd_config(const PgdConfig& config) {
  const double cap = pgd_max_epsilon(config.constants);
  if (!(config.epsilon > 0.0)) throw UsageError("PGD epsilon must be positive");
  if (config.epsilon > cap) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "PGD epsilon " << config.epsilon << " exceeds the admissible maximum " << cap;
    throw UsageError(msg.str());
  }
  if (config.max_steps < 1) throw UsageError("PGD max_steps must be at least 1");
  if (config.record_stride < 1) throw UsageError("PGD record_stride must be at least 1");
}

double pgd_mixing_weight(const ConstantsBundle& c, double epsilon) {
  return 3.0 * c.L1 * std::cbrt(epsilon) / (2.0 * c.beta.value() * c.L2);
}

NegativeCurvatureStep negative_curvature_step(const ParamVector& w, const Matrix& H, const ConstantsBundle& c,
                                              double epsilon) {
  if (!c.beta) throw UsageError("negative_curvature_step: beta is required");
  const EigenPair pair = smallest_eigenpair(H);
  const double s = *c.beta / (2.0 * c.L1);
  NegativeCurvatureStep out;
  out.u = w + s * pair.vector;
  if (out.u.norm() > 1.0) {
    out.u = w - s * pair.vector;
    if (out.u.norm() > 1.0)
      throw InternalError(
          "negative_curvature_step: neither eigenvector sign stays in the unit ball; the iterate is closer to the "
          "boundary than beta/(2 L1), which contradicts the certified constants");
  }
  const ParamVector step = out.u - w;
  out.curvature = step.dot(H * step);
  const double b2e = *c.beta * *c.beta * std::cbrt(epsilon);
  out.listing_bound_holds = out.curvature <= -b2e / (8.0 * c.L1);
  out.proof_bound_holds = out.curvature <= -b2e / (8.0 * c.L1 * c.L1);
  return out;
}

Trace run_pgd_sosp(const RiskFunction& objective, const BallDomain& domain, const ParamVector& w0,
                   const PgdConfig& config) {
  if (domain.dim() != objective.dim() || domain.center().norm() != 0.0 || domain.radius() != 1.0)
    throw UsageError("run_pgd_sosp: domain must be the unit ball");
  validate_pgd_config(config);
  require_start(domain, w0, "run_pgd_sosp");
  const ConstantsBundle& c = config.constants;
  const double eps = config.epsilon;
  const double curvature_floor = -std::cbrt(eps);
  const double sigma = pgd_mixing_weight(c, eps);
  const double shrink = 1.0 - *c.beta / c.L1;

  Trace trace;
  Recorder rec(trace, objective, config.record_stride);
  ParamVector w = w0;
  for (std::size_t t = 0;; ++t) {
    const ParamVector g = objective.gradient(w);
    require_finite(g, t, "run_pgd_sosp");
    const double gnorm = g.norm();
    if (t % config.record_stride == 0) rec.record(t, w, gnorm);
    ParamVector next;
    if (gnorm >= eps) {
      if (w.norm() >= 1.0 - 1e-10) {
        next = shrink * w;
        trace.branches.push_back(PgdBranch::boundary);
      } else {
        next = project(domain, w - g / c.L1);
        trace.branches.push_back(PgdBranch::gradient);
      }
    } else {
      const Matrix H = objective.hessian(w);
      if (min_eigenvalue(H) <= curvature_floor) {
        const NegativeCurvatureStep nc = negative_curvature_step(w, H, c, eps);
        next = sigma * nc.u + (1.0 - sigma) * w;
        trace.branches.push_back(PgdBranch::curvature);
      } else {
        trace.halt = HaltReason::sosp_found;
        rec.finish(t, w);
        return trace;
      }
    }
    w = std::move(next);
    if (t + 1 >= config.max_steps) {
      trace.halt = HaltReason::step_cap;
      rec.finish(t + 1, w);
      return trace;
    }
  }
}

Trace run_pgd_sosp(const ProblemSpec& spec, const Dataset& S, const ParamVector& w0, const PgdConfig& config) {
  const auto objective = spec.empirical(S);
  return run_pgd_sosp(*objective, spec.domain(), w0, config);
}

SospCheck check_sosp(const RiskFunction& objective, const ParamVector& w, double eps, double gamma) {
  SospCheck out;
  out.grad_norm = objective.gradient(w).norm();
  out.sigma_min = min_eigenvalue(objective.hessian(w));
  out.is_sosp = out.grad_norm <= eps && out.sigma_min >= -gamma;
  return out;
}

SospCheck check_sosp(const ProblemSpec& spec, const Dataset& S, const ParamVector& w, double eps, double gamma) {
  return check_sosp(*spec.empirical(S), w, eps, gamma);
}

}  // namespace stablab
