// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fail.

#include "stablab/bounds.hpp"
#include "stablab/experiment.hpp"
#include "stablab/landscape.hpp"
#include "stablab/optimizers.hpp"
#include "stablab/problems.hpp"
#include "stablab/stability.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace stablab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) { return format_double(v); }

std::shared_ptr<QuadraticMeanProblem> quad4() { return make_quadratic_mean(4, ParamVector::Constant(4, 0.25), 1.0); }

std::shared_ptr<DoubleWellProblem> well(Eigen::Index d) {
  DoubleWellParams p;
  p.d = d;
  return make_double_well(p);
}

AlgorithmSpec algo(AlgorithmKind kind, std::size_t t) {
  AlgorithmSpec a;
  a.kind = kind;
  a.t = t;
  return a;
}

// 1. Every step of GD on quadratic_mean meets D^2 L1 / (2t).
Outcome gd_convex_rate() {
  const auto q = quad4();
  const ConstantsBundle& c = q->constants();
  std::size_t checked = 0, violations = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset S = q->sample(1000 + seed, 100);
    const double best = empirical_risk(*q, q->empirical_minimizer(S), S);
    // Start on the boundary opposite the data so the early steps matter.
    const ParamVector w0 = q->domain().center() - q->domain().radius() * ParamVector::Constant(4, 0.5);
    const Trace tr = run_gd(*q, S, w0, 2000);
    for (std::size_t j = 0; j < tr.recorded_steps.size(); ++j) {
      const std::size_t t = tr.recorded_steps[j];
      if (t == 0) continue;
      const double gap = tr.empirical_risks[j] - best;
      const double bound = gd_opt_bound(c, static_cast<double>(t));
      worst = std::max(worst, gap / bound);
      ++checked;
      if (gap > bound) ++violations;
    }
  }
  return {violations == 0 && checked == 10 * 2000,
          "checked=" + std::to_string(checked) + " violations=" + std::to_string(violations) +
              " max_gap_over_bound=" + num(worst)};
}

// 2. SGD terminal iterate versus the (1 + log(t+1)) / sqrt(t+1) rate.
Outcome sgd_rate() {
  const auto q = quad4();
  const Dataset S = q->sample(77, 100);
  const double best = empirical_risk(*q, q->empirical_minimizer(S), S);
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t t : {100u, 1000u}) {
    std::vector<double> gaps(200);
    parallel_for(gaps.size(), [&](std::size_t s) {
      const Trace tr = run_sgd(*q, S, q->domain().center(), t, substream(2024, s), t);
      gaps[s] = empirical_risk(*q, tr.terminal, S) - best;
    });
    const MeanEstimate m = mean_and_error(gaps);
    const double bound = sgd_opt_bound(q->constants(), static_cast<double>(t));
    ok = ok && m.mean - 3.0 * m.std_error <= bound;
    detail << "t=" << t << " mean=" << num(m.mean) << " se=" << num(m.std_error) << " bound=" << num(bound) << " ";
  }
  return {ok, detail.str()};
}

struct SweepCell {
  std::size_t n = 0, t = 0;
  StabilityEstimate stab;
  MeanEstimate gap;
};

const std::vector<SweepCell>& stability_sweep() {
  static const std::vector<SweepCell> cells = [] {
    const auto q = quad4();
    ReplicateOptions opt;
    opt.probe_count = 512;
    std::vector<SweepCell> out;
    for (std::size_t t : {1u, 10u, 100u})
      for (std::size_t n : {50u, 100u, 200u, 400u, 800u}) {
        const auto recs = run_replicates(*q, algo(AlgorithmKind::gd, t), n, 50, 31337, opt);
        out.push_back({n, t, stability_from_records(recs, opt.probe_count), gap_from_records(recs)});
      }
    return out;
  }();
  return cells;
}

// 3. Stability at convergence decays like 1/n.
Outcome stability_scaling() {
  std::vector<double> xs, ys;
  for (const SweepCell& c : stability_sweep())
    if (c.t == 100) {
      xs.push_back(static_cast<double>(c.n));
      ys.push_back(c.stab.value);
    }
  const ScalingFit f = fit_scaling(xs, ys);
  return {f.points_used == 5 && f.slope >= -1.35 && f.slope <= -0.65,
          "slope=" + num(f.slope) + " points=" + std::to_string(f.points_used) + " replicates=50"};
}

// 4. |gap| <= stability + 3 combined standard errors on every cell.
Outcome gap_below_stability() {
  std::size_t bad = 0;
  double worst = -INFINITY;
  for (const SweepCell& c : stability_sweep()) {
    const double margin = 3.0 * std::hypot(c.gap.std_error, c.stab.std_error);
    const double excess = std::abs(c.gap.mean) - (c.stab.value + margin);
    worst = std::max(worst, excess);
    if (excess > 0.0) ++bad;
  }
  return {bad == 0, "cells=" + std::to_string(stability_sweep().size()) + " violations=" + std::to_string(bad) +
                        " max(|gap| - stab - 3se)=" + num(worst)};
}

// 5. Per-replicate minima distance on the good event.
Outcome minima_distance() {
  const auto q = quad4();
  const MinimaDistanceReport r = minima_distance_experiment(*q, 100, 500, 99);
  return {r.replicates == 500 && r.violations == 0 && r.location_failures == 0 && r.event_count > 0,
          "events=" + std::to_string(r.event_count) + "/500 violations=" + std::to_string(r.violations) +
              " max_ratio=" + num(r.max_ratio) + " bound=" + num(r.bound)};
}

const ConcentrationReport& concentration() {
  static const ConcentrationReport rep = [] {
    const auto dw = well(2);
    ParamVector w_tail(2);
    w_tail << 0.8, 0.3;  // away from stationary points so the inner product varies
    return concentration_mc(*dw, dw->global_minimum(), 500, 10000, 4242, w_tail);
  }();
  return rep;
}

// 6. Hessian deviation second moment against the matrix concentration bound.
Outcome matrix_concentration() {
  const ConcentrationReport& r = concentration();
  const bool ok = r.hess_moment_bound && r.hess_moment.mean - 3.0 * r.hess_moment.std_error <= *r.hess_moment_bound &&
                  r.grad_moment_pass;
  return {ok, "hess_moment=" + num(r.hess_moment.mean) + " se=" + num(r.hess_moment.std_error) +
                  " bound=" + num(r.hess_moment_bound.value_or(NAN)) + " grad_moment=" + num(r.grad_moment.mean) +
                  " grad_bound=" + num(r.grad_moment_bound)};
}

// 7. Tail frequencies at three deviations per tail.
Outcome subgaussian_tails() {
  const ConcentrationReport& r = concentration();
  std::ostringstream detail;
  bool ok = r.tails.size() == 6;
  for (const TailCheck& t : r.tails) {
    ok = ok && t.pass;
    detail << to_string(t.kind) << "(delta=" << num(t.delta) << " freq=" << num(t.frequency)
           << " bound=" << num(t.bound) << ") ";
  }
  return {ok, detail.str()};
}

// 8. PGD halts at an SOSP within the proof-form iteration bound.
Outcome pgd_correctness() {
  std::size_t runs = 0, bad = 0;
  double worst_steps_ratio = 0.0;
  for (Eigen::Index d : {1, 2}) {
    const auto dw = well(d);
    const ConstantsBundle& c = dw->constants();
    PgdConfig cfg;
    cfg.constants = c;
    cfg.epsilon = pgd_max_epsilon(c);
    const double cap = pgd_iteration_bound(c, cfg.epsilon).proof;
    Rng rng(808 + static_cast<std::uint64_t>(d));
    for (int i = 0; i < 100; ++i) {
      ParamVector w0 = ParamVector::Zero(d);
      if (i == 1 && d >= 2) w0[0] = dw->params().well_radius;  // saddle between two wells
      if (i >= 2) w0 = rng.uniform_ball(d, 1.0);
      const Dataset S = dw->sample(5000 + 100 * d + i, 500);
      const Trace tr = run_pgd_sosp(*dw, S, w0, cfg);
      const SospCheck chk = check_sosp(*dw, S, tr.terminal, cfg.epsilon, std::cbrt(cfg.epsilon));
      ++runs;
      worst_steps_ratio = std::max(worst_steps_ratio, static_cast<double>(tr.step_count) / cap);
      if (tr.halt != HaltReason::sosp_found || !chk.is_sosp || static_cast<double>(tr.step_count) > cap) ++bad;
    }
  }
  return {bad == 0, "runs=" + std::to_string(runs) + " failures=" + std::to_string(bad) +
                        " max_steps_over_proof_bound=" + num(worst_steps_ratio)};
}

struct CensusRun {
  std::vector<MinimaCensus> censuses;
  std::vector<Dataset> datasets;
};

const CensusRun& census_runs() {
  static const CensusRun runs = [] {
    const auto dw = well(2);
    CensusRun out;
    out.censuses.resize(200);
    out.datasets.resize(200);
    parallel_for(200, [&](std::size_t r) {
      out.datasets[r] = dw->sample(derive_replicate_seed(9000, r, 2000, 0), 2000);
      out.censuses[r] = minima_census(*dw, out.datasets[r], 400, 0.0, substream(9001, r));
    });
    return out;
  }();
  return runs;
}

// 9. Census finds exactly K empirical minima.
Outcome no_extra_minima() {
  const auto dw = well(2);
  const XiTerms xi = xi_terms(dw->constants(), 2000, 2);
  std::size_t passes = 0, extra_in_pass = 0, over_k = 0;
  for (const MinimaCensus& c : census_runs().censuses) {
    if (c.pass()) {
      ++passes;
      if (c.found_minima.size() > 4) ++extra_in_pass;
    }
    if (c.found_minima.size() > 4) ++over_k;
  }
  const double freq = passes / 200.0;
  const double se = std::sqrt(freq * (1 - freq) / 200.0);
  const double floor = 1.0 - (xi.xi1 + xi.xi2) - 3.0 * se;
  std::string detail = "pass_frequency=" + num(freq) + " xi1=" + num(xi.xi1) + " xi2=" + num(xi.xi2) +
                       " required>=" + num(floor) + " replicates_with_more_than_K=" + std::to_string(over_k);
  if (floor <= 0.0) detail += " (probability bound vacuous at these constants)";
  return {freq >= floor && extra_in_pass == 0, detail};
}

// 10. Error bound with the proof-form factor on 1000 qualifying probes per replicate.
Outcome error_bound() {
  const auto dw = well(2);
  const CensusRun& runs = census_runs();
  std::size_t replicates = 0, violations = 0, short_probes = 0;
  double worst = 0.0;
  for (std::size_t r = 0; r < runs.censuses.size() && replicates < 20; ++r) {
    if (!runs.censuses[r].pass()) continue;
    const ErrorBoundReport e = error_bound_check(*dw, runs.datasets[r], runs.censuses[r], 1000, substream(9100, r));
    ++replicates;
    violations += e.proof_violations;
    if (e.qualifying < 1000) ++short_probes;
    worst = std::max(worst, e.max_proof_ratio);
  }
  return {replicates == 20 && violations == 0 && short_probes == 0,
          "replicates=" + std::to_string(replicates) + " probes_each=1000 violations=" + std::to_string(violations) +
              " short_replicates=" + std::to_string(short_probes) + " max_ratio=" + num(worst)};
}

// 11. Bound calculators against the 50-digit pins.
Outcome bound_pins() {
  std::ifstream in(std::string(STABLAB_TEST_DATA_DIR) + "/bound_pins.json");
  if (!in) return {false, "bound_pins.json missing"};
  const json data = json::parse(in);
  std::size_t random_cases = 0, compared = 0, bad = 0;
  double worst = 0.0;
  std::string first_bad;
  const auto check = [&](double got, const json& pin, const std::string& what) {
    const double want = std::strtod(pin.get<std::string>().c_str(), nullptr);
    ++compared;
    double err = 0.0;
    if (std::abs(want) < 1e-300)
      err = std::abs(got) < 1e-300 ? 0.0 : INFINITY;
    else
      err = std::abs(got - want) / std::abs(want);
    worst = std::max(worst, err);
    if (err > 1e-10) {
      ++bad;
      if (first_bad.empty()) first_bad = what;
    }
  };
  for (const json& cs : data["cases"]) {
    if (cs["label"] == "random") ++random_cases;
    const json& k = cs["constants"];
    ConstantsBundle c;
    c.L0 = k["L0"];
    c.L1 = k["L1"];
    c.L2 = k["L2"];
    c.lambda = c.saddle_curvature = k["lambda"];
    c.alpha = k["alpha"];
    c.M = k["M"];
    c.D = k["D"];
    c.K = k["K"];
    const json& a = cs["args"];
    const double n = a["n"].get<double>();
    const int d = a["d"];
    const auto report = [&](const BoundReport& r, const std::string& key) {
      const json& want = cs["reports"][key];
      for (const auto& [term, value] : want["terms"].items()) check(r.term(term), value, key + "/" + term);
      check(r.total, want["total"], key + "/total");
    };
    report(convex_stability_bound(c, n, d, a["eps"]), "convex_stability");
    report(convex_excess_bound(c, n, d, a["eps"]), "convex_excess");
    report(good_event_prob_bound(c, n, d).report, "good_event_failure_prob");
    report(local_minima_gen_bound(c, n, d), "local_minima_gen");
    for (const auto v : {SpuriousVariant::with_spurious, SpuriousVariant::no_spurious}) {
      report(nonconvex_gen_bound(c, n, d, a["zeta"], a["delta"], v, a["delta_prime"]), "nonconvex_gen/" + to_string(v));
      report(nonconvex_excess_bound(c, n, d, a["zeta"], a["delta"], v, a["delta_prime"], a["opt_gap"]),
             "nonconvex_excess/" + to_string(v));
    }
    const json& s = cs["scalars"];
    check(gd_opt_bound(c, a["t"].get<double>()), s["gd_opt"], "gd_opt");
    check(sgd_opt_bound(c, a["t"].get<double>()), s["sgd_opt"], "sgd_opt");
    const XiTerms xi = xi_terms(c, n, d);
    check(xi.xi1, s["xi1"], "xi1");
    check(xi.r, s["covering_radius"], "r");
    if (!xi.underflow) check(xi.xi2, s["xi2"], "xi2");
    const IterationBound it = pgd_iteration_bound(c, a["pgd_eps"]);
    check(it.statement, s["pgd_iterations_statement"], "pgd_statement");
    check(it.proof, s["pgd_iterations_proof"], "pgd_proof");
    check(subgaussian_tail_bound(c, n, d, a["dev"], TailKind::gradient_inner).raw, s["tail_gradient_inner"], "tail_g");
    check(subgaussian_tail_bound(c, n, d, a["dev"], TailKind::hessian).raw, s["tail_hessian"], "tail_h");
    check(gradient_moment_bound(c, n), s["gradient_moment"], "grad_moment");
    check(hessian_moment_bound(c, n, d), s["hessian_moment"], "hess_moment");
    check(minima_distance_bound(c, n), s["minima_distance"], "minima_distance");
  }
  std::string detail = "random_bundles=" + std::to_string(random_cases) + " comparisons=" + std::to_string(compared) +
                       " mismatches=" + std::to_string(bad) + " max_rel_err=" + num(worst);
  if (!first_bad.empty()) detail += " first=" + first_bad;
  return {random_cases >= 100 && bad == 0, detail};
}

// 12. Derivative oracles and the Monte-Carlo population oracle.
Outcome oracle_integrity() {
  LogisticBlobsParams lp;
  lp.n_population_oracle = 1000;
  lp.certify_points = 256;
  lp.separation = 1.0;
  const auto q = quad4();
  const auto dw = well(2);
  const auto lb = make_logistic_blobs(lp);
  std::ostringstream detail;
  bool ok = true;
  for (const ProblemSpec* spec : std::vector<const ProblemSpec*>{q.get(), dw.get(), lb.get()}) {
    const DerivativeCheckReport r = check_sample_derivatives(*spec, 100, 1212);
    ok = ok && r.pass();
    detail << spec->name() << "(grad=" << num(r.max_grad_rel_error) << " hess=" << num(r.max_hess_rel_error) << ") ";
  }
  Rng rng(5);
  double worst_z = 0.0;
  for (int i = 0; i < 10; ++i) {
    const ParamVector w = q->domain().center() + rng.uniform_ball(4, q->domain().radius());
    const MonteCarloEstimate mc = monte_carlo_risk(*q, w, 200000, 300 + i);
    const double z = std::abs(mc.mean - q->population().value(w)) / mc.std_error;
    worst_z = std::max(worst_z, z);
    ok = ok && z <= 3.0;
  }
  detail << "quadratic_mc_max_z=" << num(worst_z);
  return {ok, detail.str()};
}

// 13. Identical config and seed give byte-identical data rows.
Outcome determinism() {
  const json doc = json::parse(R"({
    "problem": {"name": "double_well", "params": {"d": 2}},
    "algorithm": "sgd",
    "n_values": [100, 400],
    "t_values": [50, 500],
    "replicates": 10,
    "probe_count": 200,
    "base_seed": 123456789
  })");
  const ExperimentConfig cfg = parse_config(doc);
  const fs::path root = fs::temp_directory_path() / "stablab_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> contents[2];
  for (int k = 0; k < 2; ++k) {
    SuiteOptions opt;
    opt.timestamp = true;  // the marked header line is the only allowed difference
    opt.output_dir = root / std::to_string(k);
    run_suite(cfg, opt);
    for (const char* f : {"replicates.csv", "aggregate.csv", "bounds.csv"}) {
      std::ifstream in(*opt.output_dir / f);
      std::string line, rows;
      while (std::getline(in, line))
        if (line.rfind("# generated:", 0) != 0) rows += line + "\n";
      contents[k].push_back(rows);
    }
  }
  const bool same = contents[0] == contents[1] && !contents[0][0].empty();
  fs::remove_all(root);
  return {same, std::string("files=3 ") + (same ? "identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double seconds_limit;  // <= 0 means no stated limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gd_convex_rate", 5, gd_convex_rate},
      {2, "sgd_terminal_rate", 60, sgd_rate},
      {3, "stability_scaling", 120, stability_scaling},
      {4, "gap_below_stability", 0, gap_below_stability},
      {5, "minima_distance", 0, minima_distance},
      {6, "matrix_concentration", 120, matrix_concentration},
      {7, "subgaussian_tails", 0, subgaussian_tails},
      {8, "pgd_correctness", 60, pgd_correctness},
      {9, "no_extra_minima", 600, no_extra_minima},
      {10, "error_bound", 0, error_bound},
      {11, "bound_calculators", 0, bound_pins},
      {12, "oracle_integrity", 0, oracle_integrity},
      {13, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.seconds_limit > 0 && secs > c.seconds_limit) {
      o.pass = false;
      o.detail += " over time limit " + num(c.seconds_limit) + "s";
    }
    if (!o.pass) ++failures;
    std::ostringstream line;
    line.precision(3);
    line << std::fixed << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.detail
         << " [" << secs << " s]";
    std::cout << line.str() << std::endl;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
