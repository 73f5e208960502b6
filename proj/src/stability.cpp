#include "stablab/stability.hpp"

#include "stablab/bounds.hpp"
#include "stablab/landscape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace stablab {

std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::gd: return "gd";
    case AlgorithmKind::sgd: return "sgd";
    case AlgorithmKind::pgd: return "pgd";
  }
  return "unknown";
}

AlgorithmKind parse_algorithm(const std::string& s) {
  if (s == "gd") return AlgorithmKind::gd;
  if (s == "sgd") return AlgorithmKind::sgd;
  if (s == "pgd") return AlgorithmKind::pgd;
  throw UsageError("unknown algorithm '" + s + "' (expected gd, sgd or pgd)");
}

Trace run_algorithm(const ProblemSpec& spec, const Dataset& S, const AlgorithmSpec& algo, std::uint64_t algo_seed) {
  const ParamVector w0 = algo.w0 ? *algo.w0 : spec.domain().center();
  if (algo.t == 0) {
    // The untouched start, for measuring gaps at t = 0.
    if (!spec.domain().contains(w0)) throw UsageError("run_algorithm: w0 outside the domain");
    Trace tr;
    tr.iterates = {w0};
    tr.recorded_steps = {0};
    tr.empirical_risks = {empirical_risk(spec, w0, S)};
    tr.grad_norms = {empirical_grad(spec, w0, S).norm()};
    tr.terminal = w0;
    tr.rng_seed = algo_seed;
    tr.record_stride = algo.record_stride;
    return tr;
  }
  switch (algo.kind) {
    case AlgorithmKind::gd: return run_gd(spec, S, w0, algo.t, algo.record_stride);
    case AlgorithmKind::sgd: return run_sgd(spec, S, w0, algo.t, algo_seed, algo.record_stride);
    case AlgorithmKind::pgd: {
      PgdConfig cfg;
      cfg.constants = spec.constants();
      cfg.epsilon = algo.pgd_epsilon > 0.0 ? algo.pgd_epsilon : pgd_max_epsilon(cfg.constants);
      cfg.max_steps = algo.t;
      cfg.record_stride = algo.record_stride;
      return run_pgd_sosp(spec, S, w0, cfg);
    }
  }
  throw InternalError("run_algorithm: unhandled algorithm");
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanEstimate mean_and_error(std::span<const double> values) {
  MeanEstimate e;
  e.count = values.size();
  if (values.empty()) return e;
  const double n = static_cast<double>(values.size());
  e.mean = pairwise_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  }
  return e;
}

std::uint64_t ReplicateSeeds::algorithm(std::size_t j) const { return substream(replicate, 0xA000 + j); }

ReplicateSeeds replicate_seeds(std::uint64_t base_seed, std::size_t replicate, std::size_t n, std::size_t t) {
  ReplicateSeeds s;
  s.replicate = derive_replicate_seed(base_seed, replicate, n, t);
  s.data = substream(s.replicate, 1);
  s.substitute = substream(s.replicate, 2);
  s.probes = substream(s.replicate, 3);
  return s;
}

namespace {

Dataset draw_prime(const ProblemSpec& spec, const Dataset& S, const ReplicateSeeds& seeds) {
  Rng rng(seeds.substitute);
  return substitute(S, 0, spec.draw(rng));
}

}  // namespace

PairedRun make_paired_run(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                          const ReplicateSeeds& seeds, std::size_t algo_seed_index) {
  PairedRun run;
  run.S = spec.sample(seeds.data, n);
  run.S_prime = draw_prime(spec, run.S, seeds);
  run.shared_seed = seeds.algorithm(algo_seed_index);
  run.trace = run_algorithm(spec, run.S, algo, run.shared_seed);
  run.trace_prime = run_algorithm(spec, run.S_prime, algo, run.shared_seed);
  return run;
}

namespace {

// Damped Newton from the population minimizer, falling back to a projected
// gradient step whenever the Newton step leaves the domain or fails to
// decrease. Only used for convex families, where any stationary point of the
// projected map is the global minimizer.
std::optional<ParamVector> convex_minimizer(const RiskFunction& f, const BallDomain& dom, double L1, ParamVector w) {
  double fw = f.value(w);
  for (int it = 0; it < 10000; ++it) {
    const ParamVector g = f.gradient(w);
    const ParamVector pg = project(dom, ParamVector(w - g / L1));
    if ((pg - w).norm() <= 1e-13) return w;
    ParamVector cand = w - f.hessian(w).ldlt().solve(g);
    bool accepted = false;
    for (double step = 1.0; step > 1e-4 && all_finite(cand); step *= 0.5) {
      const ParamVector trial = w + step * (cand - w);
      if (dom.contains(trial)) {
        const double ft = f.value(trial);
        if (ft <= fw) {
          accepted = (trial - w).norm() > 0.0;
          w = trial;
          fw = ft;
          break;
        }
      }
    }
    if (!accepted) {
      w = pg;
      fw = f.value(w);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<ParamVector> empirical_global_minimizer(const ProblemSpec& spec, const Dataset& S) {
  if (const auto* q = dynamic_cast<const QuadraticMeanProblem*>(&spec)) return q->empirical_minimizer(S);
  if (dynamic_cast<const LogisticBlobsProblem*>(&spec))
    return convex_minimizer(*spec.empirical(S), spec.domain(), spec.constants().L1, spec.global_minimum());
  const auto objective = spec.empirical(S);
  std::optional<ParamVector> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& m : spec.population_info().local_minima) {
    LocatedMinimum loc;
    try {
      loc = locate_empirical_min_near(*objective, spec.domain(), spec.constants(), m);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
    if (!loc.interior) return std::nullopt;
    const double v = objective->value(loc.w);
    if (v < best_value) {
      best_value = v;
      best = loc.w;
    }
  }
  return best;
}

ReplicateRecord run_replicate(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n, std::size_t replicate,
                              std::uint64_t base_seed, const ReplicateOptions& options) {
  if (n < 1) throw UsageError("run_replicate: n must be at least 1");
  if (options.algo_seeds_per_replicate < 1) throw UsageError("run_replicate: need at least one algorithm seed");
  const ReplicateSeeds seeds = replicate_seeds(base_seed, replicate, n, algo.t);
  ReplicateRecord rec;
  rec.n = n;
  rec.t = algo.t;
  rec.replicate = replicate;
  rec.seed = seeds.replicate;

  const Dataset S = spec.sample(seeds.data, n);
  const Dataset S_prime = draw_prime(spec, S, seeds);
  Rng probe_rng(seeds.probes);
  std::vector<Sample> probes;
  probes.reserve(options.probe_count);
  for (std::size_t p = 0; p < options.probe_count; ++p) probes.push_back(spec.draw(probe_rng));

  const auto emp = spec.empirical(S);
  const RiskFunction& pop = spec.population();
  const std::optional<ParamVector> w_star_S = empirical_global_minimizer(spec, S);
  const double pop_min = pop.value(spec.global_minimum());

  const std::size_t J = options.algo_seeds_per_replicate;
  std::vector<double> diff_sum(probes.size(), 0.0);
  std::vector<double> emp_vals, pop_vals, opt_vals, grad_vals;
  rec.min_loss = std::numeric_limits<double>::infinity();
  rec.max_loss = -std::numeric_limits<double>::infinity();
  auto observe = [&](double v) {
    rec.min_loss = std::min(rec.min_loss, v);
    rec.max_loss = std::max(rec.max_loss, v);
  };

  for (std::size_t j = 0; j < J; ++j) {
    const std::uint64_t algo_seed = seeds.algorithm(j);
    const Trace tr = run_algorithm(spec, S, algo, algo_seed);
    const Trace tr_prime = run_algorithm(spec, S_prime, algo, algo_seed);
    const ParamVector& w = tr.terminal;
    const ParamVector& wp = tr_prime.terminal;
    if (j == 0 || tr.halt != HaltReason::sosp_found) rec.halt = tr.halt;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const double a = spec.loss(w, probes[p]);
      const double b = spec.loss(wp, probes[p]);
      observe(a);
      observe(b);
      diff_sum[p] += a - b;
    }
    for (const auto& z : S.samples) observe(spec.loss(w, z));
    const double er = emp->value(w);
    emp_vals.push_back(er);
    grad_vals.push_back(emp->gradient(w).norm());
    pop_vals.push_back(pop.value(w));
    if (w_star_S) opt_vals.push_back(er - emp->value(*w_star_S));
  }
  double worst = 0.0;
  for (double s : diff_sum) worst = std::max(worst, std::abs(s / static_cast<double>(J)));
  rec.stability_pair_diff = worst;
  rec.emp_risk = pairwise_sum(emp_vals) / static_cast<double>(J);
  rec.pop_risk = pairwise_sum(pop_vals) / static_cast<double>(J);
  rec.grad_norm = pairwise_sum(grad_vals) / static_cast<double>(J);
  rec.gap = rec.pop_risk - rec.emp_risk;
  rec.excess = rec.pop_risk - pop_min;
  if (w_star_S) rec.opt_gap = pairwise_sum(opt_vals) / static_cast<double>(J);
  return rec;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ReplicateRecord> run_replicates(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                            std::size_t replicates, std::uint64_t base_seed,
                                            const ReplicateOptions& options) {
  std::vector<ReplicateRecord> out(replicates);
  parallel_for(replicates, [&](std::size_t r) { out[r] = run_replicate(spec, algo, n, r, base_seed, options); });
  return out;
}

StabilityEstimate stability_from_records(const std::vector<ReplicateRecord>& records, std::size_t probe_count) {
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.stability_pair_diff);
  const MeanEstimate m = mean_and_error(v);
  StabilityEstimate e;
  e.t = records.empty() ? 0 : records.front().t;
  e.value = m.mean;
  e.std_error = m.std_error;
  e.replicates = records.size();
  e.probe_count = probe_count;
  return e;
}

StabilityEstimate estimate_stability(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                     std::size_t replicates, std::size_t algo_seeds_per_replicate,
                                     std::size_t probe_count, std::uint64_t base_seed) {
  if (replicates < 1) throw UsageError("estimate_stability: replicates must be positive");
  if (probe_count < 1) throw UsageError("estimate_stability: probe_count must be positive");
  const auto records = run_replicates(spec, algo, n, replicates, base_seed, {algo_seeds_per_replicate, probe_count});
  return stability_from_records(records, probe_count);
}

MeanEstimate gap_from_records(const std::vector<ReplicateRecord>& records) {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.gap);
  return mean_and_error(v);
}

MeanEstimate estimate_generalization_gap(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                         std::size_t replicates, std::uint64_t base_seed) {
  return gap_from_records(run_replicates(spec, algo, n, replicates, base_seed, {1, 1}));
}

ExcessRiskReport excess_from_records(const std::vector<ReplicateRecord>& records) {
  ExcessRiskReport rep;
  std::vector<double> ex, opt, gen;
  for (const auto& r : records) {
    ex.push_back(r.excess);
    gen.push_back(r.gap);
    if (r.opt_gap)
      opt.push_back(*r.opt_gap);
    else
      ++rep.location_failures;
  }
  rep.excess = mean_and_error(ex);
  rep.gen_gap = mean_and_error(gen);
  if (rep.location_failures == 0 && !records.empty()) {
    rep.opt_error = mean_and_error(opt);
    const double se = std::sqrt(rep.excess.std_error * rep.excess.std_error +
                                rep.opt_error->std_error * rep.opt_error->std_error +
                                rep.gen_gap.std_error * rep.gen_gap.std_error);
    rep.decomposition_holds = rep.excess.mean <= rep.opt_error->mean + std::abs(rep.gen_gap.mean) + 3.0 * se;
  }
  return rep;
}

ExcessRiskReport estimate_excess_risk(const ProblemSpec& spec, const AlgorithmSpec& algo, std::size_t n,
                                      std::size_t replicates, std::uint64_t base_seed) {
  return excess_from_records(run_replicates(spec, algo, n, replicates, base_seed, {1, 1}));
}

bool good_event(const ProblemSpec& spec, const Dataset& S, const ParamVector& w_star) {
  const ConstantsBundle& c = spec.constants();
  const auto emp = spec.empirical(S);
  if (c.L2 > 0.0 && emp->gradient(w_star).norm() > c.lambda * c.lambda / (16.0 * c.L2)) return false;
  const Matrix dev = emp->hessian(w_star) - spec.population().hessian(w_star);
  return spectral_norm_sym(dev) <= c.lambda / 4.0;
}

MinimaDistanceReport minima_distance_experiment(const ProblemSpec& spec, std::size_t n, std::size_t replicates,
                                                std::uint64_t base_seed) {
  if (replicates < 1) throw UsageError("minima_distance_experiment: replicates must be positive");
  const ConstantsBundle& c = spec.constants();
  const ParamVector& w_star = spec.global_minimum();
  const std::size_t k_star = spec.population_info().global_min_index;
  MinimaDistanceReport rep;
  rep.replicates = replicates;
  rep.bound = minima_distance_bound(c, static_cast<double>(n));
  rep.distances.assign(replicates, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> events(replicates, 0), failed(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    const ReplicateSeeds seeds = replicate_seeds(base_seed, r, n, 0);
    const Dataset S = spec.sample(seeds.data, n);
    const Dataset Sp = draw_prime(spec, S, seeds);
    events[r] = good_event(spec, S, w_star) && good_event(spec, Sp, w_star);
    try {
      if (const auto* q = dynamic_cast<const QuadraticMeanProblem*>(&spec)) {
        rep.distances[r] = (q->empirical_minimizer(S) - q->empirical_minimizer(Sp)).norm();
      } else {
        const LocatedMinimum a = locate_empirical_min_near(spec, S, k_star);
        const LocatedMinimum b = locate_empirical_min_near(spec, Sp, k_star);
        rep.distances[r] = (a.w - b.w).norm();
      }
    } catch (const NumericalError&) {
      failed[r] = 1;
    }
  });
  for (std::size_t r = 0; r < replicates; ++r) {
    rep.events.push_back(events[r] != 0);
    if (failed[r]) {
      ++rep.location_failures;
      continue;
    }
    if (!events[r]) continue;
    ++rep.event_count;
    const double ratio = rep.distances[r] / rep.bound;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (rep.distances[r] > rep.bound) ++rep.violations;
  }
  rep.event_frequency = static_cast<double>(rep.event_count) / static_cast<double>(replicates);
  return rep;
}

ConcentrationReport concentration_mc(const ProblemSpec& spec, const ParamVector& w_ref, std::size_t n,
                                     std::size_t replicates, std::uint64_t base_seed,
                                     std::optional<ParamVector> w_tail, std::vector<double> tail_levels) {
  if (replicates < 2) throw UsageError("concentration_mc: need at least 2 replicates");
  if (n < 1) throw UsageError("concentration_mc: n must be positive");
  const ParamVector wt = w_tail ? *w_tail : w_ref;
  const ConstantsBundle& c = spec.constants();
  const int d = static_cast<int>(spec.dim());
  const double nd = static_cast<double>(n);
  const RiskFunction& pop = spec.population();
  const ParamVector g_ref = pop.gradient(w_ref);
  const Matrix h_ref = pop.hessian(w_ref);
  const ParamVector g_tail = pop.gradient(wt);
  const Matrix h_tail = pop.hessian(wt);

  std::vector<double> grad_sq(replicates), hess_sq(replicates), inner_dev(replicates), hess_dev(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    const Dataset S = spec.sample(replicate_seeds(base_seed, r, n, 0).data, n);
    const auto emp = spec.empirical(S);
    grad_sq[r] = (emp->gradient(w_ref) - g_ref).squaredNorm();
    const double hn = spectral_norm_sym(emp->hessian(w_ref) - h_ref);
    hess_sq[r] = hn * hn;
    inner_dev[r] = std::abs(emp->gradient(wt).dot(g_tail) - g_tail.squaredNorm());
    hess_dev[r] = spectral_norm_sym(emp->hessian(wt) - h_tail);
  });

  ConcentrationReport rep;
  rep.replicates = replicates;
  rep.n = n;
  rep.grad_moment = mean_and_error(grad_sq);
  rep.hess_moment = mean_and_error(hess_sq);
  rep.grad_moment_bound = gradient_moment_bound(c, nd);
  rep.grad_moment_pass = rep.grad_moment.mean - 3.0 * rep.grad_moment.std_error <= rep.grad_moment_bound;
  if (d >= 2) {
    rep.hess_moment_bound = hessian_moment_bound(c, nd, d);
    rep.hess_moment_pass = rep.hess_moment.mean - 3.0 * rep.hess_moment.std_error <= *rep.hess_moment_bound;
  }

  for (TailKind kind : {TailKind::gradient_inner, TailKind::hessian}) {
    const std::vector<double>& devs = kind == TailKind::gradient_inner ? inner_dev : hess_dev;
    for (double level : tail_levels) {
      TailCheck tc;
      tc.kind = kind;
      tc.delta = tail_delta_for_level(c, nd, d, level, kind);
      if (!(tc.delta > 0.0)) continue;
      std::size_t hits = 0;
      for (double v : devs) hits += v >= tc.delta ? 1 : 0;
      const double R = static_cast<double>(replicates);
      tc.frequency = static_cast<double>(hits) / R;
      tc.std_error = std::sqrt(tc.frequency * (1.0 - tc.frequency) / R);
      const TailBound b = subgaussian_tail_bound(c, nd, d, tc.delta, kind);
      tc.bound = b.clamped;
      tc.bound_raw = b.raw;
      tc.pass = tc.frequency - 3.0 * tc.std_error <= tc.bound;
      rep.tails.push_back(tc);
    }
  }
  return rep;
}

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit least_squares(const std::vector<double>& lx, const std::vector<double>& ly) {
  const double n = static_cast<double>(lx.size());
  const double mx = pairwise_sum(lx) / n;
  const double my = pairwise_sum(ly) / n;
  std::vector<double> sxy(lx.size()), sxx(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy[i] = (lx[i] - mx) * (ly[i] - my);
    sxx[i] = (lx[i] - mx) * (lx[i] - mx);
  }
  const double den = pairwise_sum(sxx);
  if (!(den > 0.0)) throw UsageError("fit_scaling: x values must not all be equal");
  LineFit f;
  f.slope = pairwise_sum(sxy) / den;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace

ScalingFit fit_scaling(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw UsageError("fit_scaling: xs and ys differ in length");
  ScalingFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0)) throw UsageError("fit_scaling: x values must be positive");
    if (!(ys[i] > 0.0)) {
      fit.warnings.push_back("excluded nonpositive value at x = " + std::to_string(xs[i]));
      continue;
    }
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  if (lx.size() < 3) throw UsageError("fit_scaling: need at least 3 positive points");
  const LineFit f = least_squares(lx, ly);
  fit.slope = fit.ci_low = fit.ci_high = f.slope;
  fit.intercept = f.intercept;
  fit.points_used = lx.size();
  return fit;
}

ScalingFit fit_scaling(const std::vector<double>& xs, const std::vector<std::vector<double>>& replicate_values,
                       std::size_t bootstrap, std::uint64_t seed) {
  if (xs.size() != replicate_values.size()) throw UsageError("fit_scaling: xs and replicate sets differ in length");
  std::vector<double> means;
  for (const auto& v : replicate_values) {
    if (v.empty()) throw UsageError("fit_scaling: empty replicate set");
    means.push_back(pairwise_sum(v) / static_cast<double>(v.size()));
  }
  ScalingFit fit = fit_scaling(xs, means);
  if (bootstrap == 0) return fit;
  Rng rng(substream(seed, 0xB007));
  std::vector<double> slopes;
  slopes.reserve(bootstrap);
  for (std::size_t b = 0; b < bootstrap; ++b) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& v = replicate_values[i];
      std::vector<double> pick(v.size());
      for (auto& p : pick) p = v[rng.uniform_index(v.size())];
      const double m = pairwise_sum(pick) / static_cast<double>(pick.size());
      if (m > 0.0) {
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(m));
      }
    }
    if (lx.size() >= 3) slopes.push_back(least_squares(lx, ly).slope);
  }
  if (slopes.empty()) {
    fit.warnings.push_back("bootstrap produced no usable resamples");
    return fit;
  }
  std::sort(slopes.begin(), slopes.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(slopes.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
    return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
  };
  fit.ci_low = quantile(0.025);
  fit.ci_high = quantile(0.975);
  return fit;
}

}  // namespace stablab
