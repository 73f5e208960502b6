// Command-line front end: bound calculators, certification, landscape dumps
// and experiment suites.

#include "stablab/experiment.hpp"
#include "stablab/landscape.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace stablab;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitCheckFailed = 2;

json parse_params(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("--params is not valid JSON: ") + e.what());
  }
}

// Writes to a file when a path was supplied, otherwise stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw UsageError("cannot open output file " + path);
    }
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string join_point(const ParamVector& w) {
  std::string s;
  for (Eigen::Index i = 0; i < w.size(); ++i) s += (i ? " " : "") + format_double(w[i]);
  return s;
}

std::vector<std::string> point_columns(const std::string& prefix, Eigen::Index d) {
  std::vector<std::string> cols;
  for (Eigen::Index i = 0; i < d; ++i) cols.push_back(prefix + std::to_string(i));
  return cols;
}

void append_point(std::vector<std::string>& row, const ParamVector& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) row.push_back(format_double(w[i]));
}

// ---- bounds ----

struct BoundFlags {
  std::string theorem;
  std::string problem;
  std::string params;
  double L0 = 0, L1 = 0, L2 = 0, lambda = 0, alpha = 0, M = 0, D = 0;
  int K = 1;
  double n = 0, t = 0, eps = 0, zeta = 0, delta = 0, delta_prime = 0, opt_gap = 0, dev = 0;
  int d = 2;
  std::string variant = "with_spurious";
  std::string kind = "gradient_inner";
};

BoundReport scalar_report(const std::string& name, std::vector<std::pair<std::string, double>> inputs,
                          double value) {
  BoundReport r;
  r.name = name;
  r.inputs = std::move(inputs);
  r.terms = {{"value", value}};
  r.total = value;
  return r;
}

BoundReport evaluate_bound(const BoundFlags& f, std::vector<std::string>& extra_lines) {
  ConstantsBundle c;
  if (!f.problem.empty()) {
    c = make_problem(f.problem, parse_params(f.params))->constants();
  } else {
    c.L0 = f.L0;
    c.L1 = f.L1;
    c.L2 = f.L2;
    c.lambda = f.lambda;
    c.saddle_curvature = f.lambda;
    c.alpha = f.alpha;
    c.M = f.M;
    c.D = f.D;
    c.K = f.K;
  }
  const std::string& th = f.theorem;
  if (th == "convex_stability") return convex_stability_bound(c, f.n, f.d, f.eps);
  if (th == "convex_excess") return convex_excess_bound(c, f.n, f.d, f.eps);
  if (th == "gd_opt") return scalar_report("gd_opt", {{"D", c.D}, {"L1", c.L1}, {"t", f.t}}, gd_opt_bound(c, f.t));
  if (th == "sgd_opt")
    return scalar_report("sgd_opt", {{"D", c.D}, {"L1", c.L1}, {"t", f.t}}, sgd_opt_bound(c, f.t));
  if (th == "good_event") {
    auto p = good_event_prob_bound(c, f.n, f.d);
    extra_lines.push_back("clamped = " + format_double(p.clamped));
    return p.report;
  }
  if (th == "local_minima_gen") return local_minima_gen_bound(c, f.n, f.d);
  if (th == "xi") {
    const XiTerms x = xi_terms(c, f.n, f.d);
    BoundReport r;
    r.name = "xi";
    r.inputs = {{"n", f.n}, {"d", f.d}};
    r.terms = {{"xi1", x.xi1}, {"xi2", x.xi2}, {"r", x.r}, {"log_xi2", x.log_xi2}};
    r.total = x.xi1 + x.xi2;
    if (x.degenerate) r.flags.push_back("covering_degenerate");
    if (x.underflow) r.flags.push_back("xi2_underflow");
    return r;
  }
  if (th == "nonconvex_gen")
    return nonconvex_gen_bound(c, f.n, f.d, f.zeta, f.delta, parse_variant(f.variant), f.delta_prime);
  if (th == "nonconvex_excess")
    return nonconvex_excess_bound(c, f.n, f.d, f.zeta, f.delta, parse_variant(f.variant), f.delta_prime, f.opt_gap);
  if (th == "pgd_iterations") {
    const IterationBound b = pgd_iteration_bound(c, f.eps);
    BoundReport r;
    r.name = "pgd_iterations";
    r.inputs = {{"eps", f.eps}};
    r.terms = {{"statement", b.statement}, {"proof", b.proof}};
    r.total = b.proof;
    return r;
  }
  if (th == "tail") {
    const TailBound b = subgaussian_tail_bound(c, f.n, f.d, f.dev, parse_tail_kind(f.kind));
    extra_lines.push_back("clamped = " + format_double(b.clamped));
    return scalar_report("tail_" + f.kind, {{"n", f.n}, {"d", f.d}, {"delta", f.dev}}, b.raw);
  }
  if (th == "grad_moment") return scalar_report("grad_moment", {{"n", f.n}}, gradient_moment_bound(c, f.n));
  if (th == "hess_moment")
    return scalar_report("hess_moment", {{"n", f.n}, {"d", f.d}}, hessian_moment_bound(c, f.n, f.d));
  if (th == "minima_distance")
    return scalar_report("minima_distance", {{"n", f.n}}, minima_distance_bound(c, f.n));
  if (th == "error_bound") {
    BoundReport r;
    r.name = "error_bound";
    r.terms = {{"proof_factor", error_bound_proof_factor(c)}, {"statement_factor", error_bound_statement_factor(c)}};
    r.total = error_bound_proof_factor(c);
    r.flags.push_back("statement_factor_suspect");
    return r;
  }
  throw UsageError("unknown --theorem '" + th + "'");
}

int cmd_bounds(const BoundFlags& f) {
  std::vector<std::string> extra;
  const BoundReport r = evaluate_bound(f, extra);
  std::cout << "bound = " << r.name << "\n";
  for (const auto& [k, v] : r.inputs) std::cout << "input." << k << " = " << format_double(v) << "\n";
  for (const auto& [k, v] : r.terms) std::cout << "term." << k << " = " << format_double(v) << "\n";
  for (const auto& flag : r.flags) std::cout << "flag = " << flag << "\n";
  for (const auto& line : extra) std::cout << line << "\n";
  std::cout << "total = " << format_double(r.total) << "\n";

  std::vector<std::string> header{"bound"}, row{r.name};
  for (const auto& [k, v] : r.inputs) {
    header.push_back(k);
    row.push_back(format_double(v));
  }
  for (const auto& [k, v] : r.terms) {
    header.push_back(k);
    row.push_back(format_double(v));
  }
  header.push_back("total");
  row.push_back(format_double(r.total));
  write_csv_row(std::cout, header);
  write_csv_row(std::cout, row);
  return 0;
}

// ---- certify ----

int cmd_certify(const std::string& problem, const std::string& params, double resolution) {
  const auto spec = make_problem(problem, parse_params(params));
  json out;
  out["problem"] = problem;
  if (resolution > 0.0) {
    const CertificationDetail det = certify_constants_detailed(*spec, resolution);
    out["constants"] = constants_to_json(det.constants);
    out["domain_points"] = det.domain_points;
    out["boundary_points"] = det.boundary_points;
    out["raw_beta"] = det.raw_beta;
    json crit = json::array();
    for (const auto& p : det.critical_points) crit.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    out["critical_points"] = crit;
  } else {
    out["constants"] = constants_to_json(spec->constants());
  }
  const auto& info = spec->population_info();
  json mins = json::array();
  for (const auto& m : info.local_minima) mins.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  out["population_minima"] = mins;
  out["global_min_index"] = info.global_min_index;
  const SeparationReport sep = validate_minima_separation(*spec);
  out["separation_pass"] = sep.pass;
  std::cout << out.dump(2) << "\n";
  return sep.pass ? 0 : kExitCheckFailed;
}

// ---- census ----

int cmd_census(const std::string& problem, const std::string& params, std::size_t n, std::uint64_t seed,
               std::size_t starts, bool population, const std::string& out_path) {
  const auto spec = make_problem(problem, parse_params(params));
  const double merge = default_merge_radius(spec->constants());
  MinimaCensus census;
  if (population) {
    census = minima_census(*spec, spec->population(), starts, merge, seed);
  } else {
    census = minima_census(*spec, spec->sample(seed, n), starts, merge, seed);
  }
  Sink sink(out_path);
  auto cols = point_columns("w", spec->dim());
  cols.insert(cols.begin(), "index");
  cols.insert(cols.end(), {"risk", "matched_population_min", "match_distance"});
  write_csv_row(sink.out(), cols);
  std::map<std::size_t, std::pair<std::size_t, double>> match_of;
  for (std::size_t k = 0; k < census.matched.size(); ++k)
    if (census.matched[k]) match_of[census.matched[k]->found_index] = {k, census.matched[k]->distance};
  for (std::size_t i = 0; i < census.found_minima.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    append_point(row, census.found_minima[i]);
    row.push_back(format_double(census.found_risks[i]));
    const auto it = match_of.find(i);
    row.push_back(it == match_of.end() ? "" : std::to_string(it->second.first));
    row.push_back(it == match_of.end() ? "" : format_double(it->second.second));
    write_csv_row(sink.out(), row);
  }
  std::cerr << "census: found=" << census.found_minima.size() << " K=" << spec->constants().K
            << " matched=" << census.matched_count() << " unconverged=" << census.unconverged
            << " boundary_excluded=" << census.boundary_excluded << " not_sosp=" << census.not_sosp
            << " pass=" << (census.pass() ? "yes" : "no") << "\n";
  for (const auto& w : census.warnings) std::cerr << "warning: " << w << "\n";
  return census.pass() ? 0 : kExitCheckFailed;
}

// ---- field ----

int cmd_field(const std::string& problem, const std::string& params, double resolution, std::size_t n,
              std::uint64_t seed, const std::string& out_path) {
  const auto spec = make_problem(problem, parse_params(params));
  std::optional<Dataset> S;
  if (n > 0) S = spec->sample(seed, n);
  const FieldReport field = min_eig_field(*spec, S ? &*S : nullptr, resolution);
  Sink sink(out_path);
  auto cols = point_columns("w", spec->dim());
  cols.insert(cols.end(), {"grad_norm", "sigma_min", "violation"});
  write_csv_row(sink.out(), cols);
  std::vector<bool> bad(field.rows.size(), false);
  for (std::size_t i : field.violations) bad[i] = true;
  for (std::size_t i = 0; i < field.rows.size(); ++i) {
    std::vector<std::string> row;
    append_point(row, field.rows[i].w);
    row.push_back(format_double(field.rows[i].grad_norm));
    row.push_back(format_double(field.rows[i].sigma_min));
    row.push_back(bad[i] ? "1" : "0");
    write_csv_row(sink.out(), row);
  }
  std::cerr << "field: points=" << field.rows.size() << " alpha=" << format_double(field.alpha)
            << " curvature=" << format_double(field.curvature) << " violations=" << field.violations.size() << "\n";
  return field.pass() ? 0 : kExitCheckFailed;
}

// ---- pgd-demo ----

ParamVector parse_start(const std::string& start, const ProblemSpec& spec) {
  const Eigen::Index d = spec.dim();
  if (start == "center") return spec.domain().center();
  if (start == "saddle") {
    const auto* dw = dynamic_cast<const DoubleWellProblem*>(&spec);
    if (!dw) throw UsageError("--start saddle is only defined for double_well");
    // Origin for d = 1; otherwise (a, 0, ..., 0), a critical point with one
    // descent direction.
    ParamVector w = ParamVector::Zero(d);
    if (d > 1) w[0] = dw->well_radius();
    return w;
  }
  ParamVector w(d);
  std::stringstream ss(start);
  std::string item;
  Eigen::Index i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= d) throw UsageError("--start has more than d coordinates");
    try {
      w[i++] = std::stod(item);
    } catch (const std::exception&) {
      throw UsageError("--start: cannot parse '" + item + "'");
    }
  }
  if (i != d) throw UsageError("--start needs exactly d comma-separated coordinates");
  if (!spec.domain().contains(w)) throw UsageError("--start lies outside the domain");
  return w;
}

int cmd_pgd_demo(const std::string& problem, const std::string& params, std::size_t n, std::uint64_t seed,
                 const std::string& start, double eps, std::size_t max_steps, const std::string& out_path) {
  const auto spec = make_problem(problem, parse_params(params));
  PgdConfig cfg;
  cfg.constants = spec->constants();
  cfg.epsilon = eps > 0.0 ? eps : pgd_max_epsilon(cfg.constants);
  cfg.max_steps = max_steps;
  validate_pgd_config(cfg);
  const Dataset S = spec->sample(seed, n);
  const ParamVector w0 = parse_start(start, *spec);
  const Trace tr = run_pgd_sosp(*spec, S, w0, cfg);

  Sink sink(out_path);
  auto cols = point_columns("w", spec->dim());
  cols.insert(cols.begin(), "step");
  cols.insert(cols.end(), {"emp_risk", "grad_norm", "branch"});
  write_csv_row(sink.out(), cols);
  for (std::size_t j = 0; j < tr.iterates.size(); ++j) {
    const std::size_t step = tr.recorded_steps[j];
    std::vector<std::string> row{std::to_string(step)};
    append_point(row, tr.iterates[j]);
    row.push_back(format_double(tr.empirical_risks[j]));
    row.push_back(format_double(tr.grad_norms[j]));
    // Branch taken to leave this iterate; empty at the terminal.
    row.push_back(step < tr.branches.size() ? std::string(1, static_cast<char>(tr.branches[step])) : "");
    write_csv_row(sink.out(), row);
  }
  const SospCheck chk = check_sosp(*spec, S, tr.terminal, cfg.epsilon, std::cbrt(cfg.epsilon));
  const IterationBound ib = pgd_iteration_bound(cfg.constants, cfg.epsilon);
  std::cerr << "pgd-demo: eps=" << format_double(cfg.epsilon) << " steps=" << tr.step_count
            << " halt=" << to_string(tr.halt) << " proof_step_bound=" << format_double(ib.proof)
            << " terminal=[" << join_point(tr.terminal) << "] grad_norm=" << format_double(chk.grad_norm)
            << " sigma_min=" << format_double(chk.sigma_min) << " sosp=" << (chk.is_sosp ? "yes" : "no") << "\n";
  return chk.is_sosp && tr.halt == HaltReason::sosp_found ? 0 : kExitCheckFailed;
}

// ---- stability ----

std::vector<std::size_t> parse_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 1) throw UsageError(flag + ": '" + item + "' is not a positive integer");
    if (!out.empty() && static_cast<std::size_t>(v) <= out.back())
      throw UsageError(flag + ": values must be strictly ascending");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError(flag + " is empty");
  return out;
}

int cmd_stability(const std::string& problem, const std::string& params, const std::string& algorithm,
                  const std::string& n_list, std::size_t t, std::size_t replicates, std::size_t probes,
                  std::uint64_t seed, const std::string& out_path) {
  const auto spec = make_problem(problem, parse_params(params));
  const auto ns = parse_list(n_list, "--n");
  AlgorithmSpec algo;
  algo.kind = parse_algorithm(algorithm);
  algo.t = t;
  const ReplicateOptions opt{1, probes};

  Sink sink(out_path);
  write_csv_preamble(sink.out(), "stablab.stability v1", false);
  write_csv_row(sink.out(), {"problem", "n", "t", "replicates", "stability_mean", "stability_se", "gap_mean",
                             "gap_se"});
  std::vector<double> xs;
  std::vector<std::vector<double>> per_n;
  for (std::size_t n : ns) {
    const auto rs = run_replicates(*spec, algo, n, replicates, seed, opt);
    const StabilityEstimate st = stability_from_records(rs, probes);
    const MeanEstimate gap = gap_from_records(rs);
    write_csv_row(sink.out(), {problem, std::to_string(n), std::to_string(t), std::to_string(replicates),
                               format_double(st.value), format_double(st.std_error), format_double(gap.mean),
                               format_double(gap.std_error)});
    xs.push_back(static_cast<double>(n));
    std::vector<double> vals;
    for (const auto& r : rs) vals.push_back(r.stability_pair_diff);
    per_n.push_back(std::move(vals));
  }
  const ScalingFit fit = fit_scaling(xs, per_n, 1000, seed);
  std::cerr << "stability: log-log slope=" << format_double(fit.slope) << " ci=[" << format_double(fit.ci_low)
            << ", " << format_double(fit.ci_high) << "] points=" << fit.points_used << "\n";
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stablab: stability and excess-risk bound laboratory"};
  app.require_subcommand(1);

  BoundFlags bf;
  auto* bounds = app.add_subcommand("bounds", "Evaluate a bound from explicit constants");
  bounds->add_option("--theorem", bf.theorem,
                     "convex_stability | convex_excess | gd_opt | sgd_opt | good_event | local_minima_gen | xi | "
                     "nonconvex_gen | nonconvex_excess | pgd_iterations | tail | grad_moment | hess_moment | "
                     "minima_distance | error_bound")
      ->required();
  bounds->add_option("--problem", bf.problem, "Take constants from a certified problem instead of flags");
  bounds->add_option("--params", bf.params, "Problem parameters as a JSON object");
  bounds->add_option("--L0", bf.L0);
  bounds->add_option("--L1", bf.L1);
  bounds->add_option("--L2", bf.L2);
  bounds->add_option("--lambda", bf.lambda);
  bounds->add_option("--alpha", bf.alpha);
  bounds->add_option("--M", bf.M);
  bounds->add_option("--D", bf.D);
  bounds->add_option("--K", bf.K);
  bounds->add_option("--n", bf.n);
  bounds->add_option("--d", bf.d);
  bounds->add_option("--t", bf.t);
  bounds->add_option("--eps", bf.eps, "eps_t for convex bounds, epsilon for pgd_iterations");
  bounds->add_option("--zeta", bf.zeta);
  bounds->add_option("--delta", bf.delta);
  bounds->add_option("--delta-prime", bf.delta_prime);
  bounds->add_option("--opt-gap", bf.opt_gap);
  bounds->add_option("--dev", bf.dev, "Deviation for --theorem tail");
  bounds->add_option("--variant", bf.variant, "with_spurious | no_spurious");
  bounds->add_option("--kind", bf.kind, "gradient_inner | hessian");

  std::string problem, params, out_path;
  std::uint64_t seed = 0;
  std::size_t n = 0;

  double cert_res = 0.0;
  auto* certify = app.add_subcommand("certify", "Certify the constant bundle of a problem");
  certify->add_option("--problem", problem)->required();
  certify->add_option("--params", params);
  certify->add_option("--resolution", cert_res, "Re-run certification at this grid step");

  std::string config_path, run_out;
  bool no_timestamp = false;
  auto* run = app.add_subcommand("run", "Run an experiment suite from a JSON config");
  run->add_option("--config", config_path)->required();
  run->add_option("--output-dir", run_out, "Overrides the config and the environment");
  run->add_flag("--no-timestamp", no_timestamp, "Omit the generated-at line from CSV headers");

  std::size_t starts = 400;
  bool population = false;
  auto* census = app.add_subcommand("census", "Enumerate empirical local minima");
  census->add_option("--problem", problem)->required();
  census->add_option("--params", params);
  census->add_option("--n", n, "Sample size")->default_val(500);
  census->add_option("--seed", seed);
  census->add_option("--starts", starts);
  census->add_flag("--population", population, "Use the population risk instead of a sample");
  census->add_option("--out", out_path);

  double field_res = 0.02;
  auto* field = app.add_subcommand("field", "Gradient norm and smallest Hessian eigenvalue on a grid");
  field->add_option("--problem", problem)->required();
  field->add_option("--params", params);
  field->add_option("--resolution", field_res);
  field->add_option("--n", n, "Sample size; 0 uses the population risk")->default_val(0);
  field->add_option("--seed", seed);
  field->add_option("--out", out_path);

  std::string start = "saddle";
  double eps = 0.0;
  std::size_t max_steps = 1'000'000;
  auto* pgd = app.add_subcommand("pgd-demo", "Dump one saddle-escaping PGD trajectory");
  pgd->add_option("--problem", problem)->default_val("double_well");
  pgd->add_option("--params", params);
  pgd->add_option("--n", n)->default_val(500);
  pgd->add_option("--seed", seed);
  pgd->add_option("--start", start, "saddle | center | comma-separated point");
  pgd->add_option("--eps", eps, "Defaults to the largest admissible value");
  pgd->add_option("--max-steps", max_steps);
  pgd->add_option("--out", out_path);

  std::string algorithm = "gd", n_list = "50,100,200,400";
  std::size_t t = 100, replicates = 50, probes = 512;
  auto* stab = app.add_subcommand("stability", "Stability sweep over n with a log-log slope fit");
  stab->add_option("--problem", problem)->required();
  stab->add_option("--params", params);
  stab->add_option("--algorithm", algorithm);
  stab->add_option("--n", n_list, "Comma-separated ascending sample sizes");
  stab->add_option("--t", t);
  stab->add_option("--replicates", replicates);
  stab->add_option("--probes", probes);
  stab->add_option("--seed", seed);
  stab->add_option("--out", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*bounds) return cmd_bounds(bf);
    if (*certify) return cmd_certify(problem, params, cert_res);
    if (*run) {
      SuiteOptions opt;
      opt.timestamp = !no_timestamp;
      if (!run_out.empty()) opt.output_dir = run_out;
      const SuiteResult res = run_suite(parse_config_file(config_path), opt);
      std::size_t failed = 0;
      for (const auto& a : res.assertions) failed += a.pass ? 0 : 1;
      std::cerr << "run: cells=" << res.cells.size() << " assertions=" << res.assertions.size()
                << " failed=" << failed << " output=" << res.output_dir.string() << "\n";
      return res.exit_code;
    }
    if (*census) return cmd_census(problem, params, n, seed, starts, population, out_path);
    if (*field) return cmd_field(problem, params, field_res, n, seed, out_path);
    if (*pgd) return cmd_pgd_demo(problem, params, n, seed, start, eps, max_steps, out_path);
    if (*stab) return cmd_stability(problem, params, algorithm, n_list, t, replicates, probes, seed, out_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CertificationError& e) {
    std::cerr << "certification failed: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return 0;
}
