#include "stablab/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace stablab {

using nlohmann::json;

json constants_to_json(const ConstantsBundle& c) {
  json j = {{"L0", c.L0},   {"L1", c.L1}, {"L2", c.L2}, {"lambda", c.lambda}, {"saddle_curvature", c.saddle_curvature},
            {"alpha", c.alpha}, {"M", c.M},   {"D", c.D},   {"K", c.K},           {"provenance", c.provenance}};
  j["beta"] = c.beta ? json(*c.beta) : json(nullptr);
  return j;
}

json bound_report_to_json(const BoundReport& r) {
  json j;
  j["name"] = r.name;
  j["total"] = r.total;
  j["inputs"] = json::object();
  for (const auto& [k, v] : r.inputs) j["inputs"][k] = v;
  j["terms"] = json::object();
  for (const auto& [k, v] : r.terms) j["terms"][k] = v;
  j["flags"] = r.flags;
  return j;
}

namespace {

json mean_json(const MeanEstimate& m) { return {{"mean", m.mean}, {"std_error", m.std_error}, {"count", m.count}}; }

std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const SuiteOptions& options) {
  if (options.output_dir) return *options.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return config.output_dir;
}

double combined_se(std::initializer_list<double> ses) {
  double s = 0.0;
  for (double v : ses) s += v * v;
  return std::sqrt(s);
}

MeanEstimate field_mean(const std::vector<ReplicateRecord>& rs, double ReplicateRecord::*field) {
  std::vector<double> v;
  v.reserve(rs.size());
  for (const auto& r : rs) v.push_back(r.*field);
  return mean_and_error(v);
}

void add_assertion(SuiteResult& res, const std::string& name, const CellAggregate& cell, double measured, double bound,
                   bool pass) {
  res.assertions.push_back({name, cell.n, cell.t, measured, bound, pass});
}

CellAggregate aggregate_cell(const std::vector<ReplicateRecord>& rs, std::size_t n, std::size_t t) {
  CellAggregate a;
  a.n = n;
  a.t = t;
  a.emp_risk = field_mean(rs, &ReplicateRecord::emp_risk);
  a.pop_risk = field_mean(rs, &ReplicateRecord::pop_risk);
  a.gap = field_mean(rs, &ReplicateRecord::gap);
  a.stability = field_mean(rs, &ReplicateRecord::stability_pair_diff);
  a.excess = field_mean(rs, &ReplicateRecord::excess);
  a.grad_norm = field_mean(rs, &ReplicateRecord::grad_norm);
  std::vector<double> opt;
  for (const auto& r : rs)
    if (r.opt_gap) opt.push_back(*r.opt_gap);
  if (opt.size() == rs.size() && !rs.empty()) a.opt_gap = mean_and_error(opt);
  return a;
}

const BoundReport* find_bound(const CellAggregate& cell, const std::string& name) {
  for (const auto& b : cell.bounds)
    if (b.name == name) return &b;
  return nullptr;
}

std::string optional_cell(const BoundReport* b) { return b ? format_double(b->total) : ""; }

}  // namespace

SuiteResult run_suite(const ExperimentConfig& config, const SuiteOptions& options) {
  const auto spec = make_problem(config.problem_name, config.problem_params);
  validate_config_against_problem(config, *spec);

  SuiteResult res;
  res.constants = spec->constants();
  res.output_dir = resolve_output_dir(config, options);
  const ConstantsBundle& c = res.constants;
  const bool convex = is_convex_family(config.problem_name);
  const int d = static_cast<int>(spec->dim());

  const ReplicateOptions ropt{config.algo_seeds_per_replicate, config.probe_count};
  for (std::size_t n : config.n_values) {
    for (std::size_t t : config.t_values) {
      AlgorithmSpec algo;
      algo.kind = config.algorithm;
      algo.t = t;
      algo.pgd_epsilon = config.pgd_epsilon;
      algo.record_stride = config.record_stride;
      const auto rs = run_replicates(*spec, algo, n, config.replicates, config.base_seed, ropt);
      CellAggregate cell = aggregate_cell(rs, n, t);
      const double nd = static_cast<double>(n);
      const double td = static_cast<double>(t);

      if (config.algorithm == AlgorithmKind::gd) cell.opt_bound = gd_opt_bound(c, td);
      if (config.algorithm == AlgorithmKind::sgd) cell.opt_bound = sgd_opt_bound(c, td);
      if (d >= 2) {
        if (convex) {
          const double eps_t = cell.opt_gap ? std::max(0.0, cell.opt_gap->mean) : 0.0;
          cell.bounds.push_back(convex_stability_bound(c, nd, d, eps_t));
          cell.bounds.push_back(convex_excess_bound(c, nd, d, eps_t));
        } else {
          std::size_t not_sosp = 0;
          for (const auto& r : rs) not_sosp += r.halt == HaltReason::sosp_found ? 0 : 1;
          const double delta = static_cast<double>(not_sosp) / static_cast<double>(rs.size());
          const double opt = cell.opt_gap ? std::max(0.0, cell.opt_gap->mean) : 0.0;
          cell.bounds.push_back(nonconvex_gen_bound(c, nd, d, cell.grad_norm.mean, delta,
                                                    SpuriousVariant::with_spurious, 0.0));
          cell.bounds.push_back(nonconvex_excess_bound(c, nd, d, cell.grad_norm.mean, delta,
                                                       SpuriousVariant::with_spurious, 0.0, opt));
        }
        cell.bounds.push_back(local_minima_gen_bound(c, nd, d));
      }

      // In-suite assertions.
      double lo = 0.0, hi = 0.0;
      for (const auto& r : rs) {
        lo = std::min(lo, r.min_loss);
        hi = std::max(hi, r.max_loss);
      }
      add_assertion(res, "loss_upper_le_M", cell, hi, c.M, hi <= c.M);
      add_assertion(res, "loss_lower_ge_0", cell, lo, 0.0, lo >= -1e-12);
      if (convex) {
        // The probe estimate of stability is only trusted where the output
        // depends smoothly on S; a basin switch makes it a heavy-tailed
        // quantity that a few replicates rarely observe.
        const double gap_margin = 3.0 * combined_se({cell.gap.std_error, cell.stability.std_error});
        add_assertion(res, "gap_le_stability", cell, std::abs(cell.gap.mean), cell.stability.mean + gap_margin,
                      std::abs(cell.gap.mean) <= cell.stability.mean + gap_margin);
        if (const BoundReport* b = find_bound(cell, "convex_stability"))
          add_assertion(res, "stability_le_convex_bound", cell, cell.stability.mean, b->total,
                        cell.stability.mean <= b->total);
        if (const BoundReport* b = find_bound(cell, "convex_excess")) {
          const double m = cell.excess.mean - 3.0 * cell.excess.std_error;
          add_assertion(res, "excess_le_convex_bound", cell, cell.excess.mean, b->total, m <= b->total);
        }
        if (cell.opt_gap && cell.opt_bound) {
          if (config.algorithm == AlgorithmKind::gd) {
            double worst = 0.0;
            for (const auto& r : rs) worst = std::max(worst, *r.opt_gap);
            add_assertion(res, "gd_opt_rate", cell, worst, *cell.opt_bound, worst <= *cell.opt_bound * (1 + 1e-12));
          } else {
            const double m = cell.opt_gap->mean - 3.0 * cell.opt_gap->std_error;
            add_assertion(res, "sgd_opt_rate", cell, cell.opt_gap->mean, *cell.opt_bound, m <= *cell.opt_bound);
          }
        }
      }
      const ExcessRiskReport ex = excess_from_records(rs);
      if (ex.decomposition_holds)
        add_assertion(res, "excess_decomposition", cell, ex.excess.mean,
                      ex.opt_error->mean + std::abs(ex.gen_gap.mean), *ex.decomposition_holds);
      if (config.algorithm == AlgorithmKind::pgd) {
        std::size_t bad = 0;
        for (const auto& r : rs) bad += r.halt == HaltReason::sosp_found ? 0 : 1;
        add_assertion(res, "pgd_sosp_halt", cell, static_cast<double>(bad), 0.0, bad == 0);
      }

      res.records.insert(res.records.end(), rs.begin(), rs.end());
      res.cells.push_back(std::move(cell));
    }
  }

  bool all_pass = true;
  for (const auto& a : res.assertions) all_pass = all_pass && a.pass;
  res.exit_code = all_pass ? 0 : 2;

  std::filesystem::create_directories(res.output_dir);
  {
    std::ofstream out(res.output_dir / "replicates.csv");
    write_csv_preamble(out, kReplicateSchema, options.timestamp);
    write_csv_row(out, replicate_columns());
    for (const auto& r : res.records) write_csv_row(out, replicate_cells(config.problem_name, r));
  }
  {
    std::ofstream out(res.output_dir / "aggregate.csv");
    write_csv_preamble(out, kAggregateSchema, options.timestamp);
    write_csv_row(out, {"problem", "n", "t", "replicates", "emp_risk_mean", "emp_risk_se", "pop_risk_mean",
                        "pop_risk_se", "gap_mean", "gap_se", "stability_mean", "stability_se", "excess_mean",
                        "excess_se", "opt_gap_mean", "opt_gap_se", "grad_norm_mean", "grad_norm_se", "opt_bound",
                        "stability_bound", "excess_bound"});
    for (const auto& cell : res.cells) {
      const BoundReport* sb = find_bound(cell, convex ? "convex_stability" : "nonconvex_gen");
      const BoundReport* eb = find_bound(cell, convex ? "convex_excess" : "nonconvex_excess");
      write_csv_row(out, {config.problem_name, std::to_string(cell.n), std::to_string(cell.t),
                          std::to_string(cell.gap.count), format_double(cell.emp_risk.mean),
                          format_double(cell.emp_risk.std_error), format_double(cell.pop_risk.mean),
                          format_double(cell.pop_risk.std_error), format_double(cell.gap.mean),
                          format_double(cell.gap.std_error), format_double(cell.stability.mean),
                          format_double(cell.stability.std_error), format_double(cell.excess.mean),
                          format_double(cell.excess.std_error),
                          cell.opt_gap ? format_double(cell.opt_gap->mean) : "",
                          cell.opt_gap ? format_double(cell.opt_gap->std_error) : "",
                          format_double(cell.grad_norm.mean), format_double(cell.grad_norm.std_error),
                          cell.opt_bound ? format_double(*cell.opt_bound) : "", optional_cell(sb), optional_cell(eb)});
    }
  }
  {
    std::ofstream out(res.output_dir / "bounds.csv");
    write_csv_preamble(out, kBoundsSchema, options.timestamp);
    write_csv_row(out, {"problem", "n", "t", "bound", "term", "value"});
    for (const auto& cell : res.cells)
      for (const auto& b : cell.bounds) {
        for (const auto& [k, v] : b.terms)
          write_csv_row(out, {config.problem_name, std::to_string(cell.n), std::to_string(cell.t), b.name, k,
                              format_double(v)});
        write_csv_row(out, {config.problem_name, std::to_string(cell.n), std::to_string(cell.t), b.name, "total",
                            format_double(b.total)});
      }
  }

  json assertions = json::array();
  for (const auto& a : res.assertions)
    assertions.push_back({{"name", a.name}, {"n", a.n}, {"t", a.t}, {"measured", a.measured}, {"bound", a.bound},
                          {"pass", a.pass}});
  json summary;
  summary["schema"] = "stablab.summary v1";
  summary["rng_algorithm"] = std::string(kRngAlgorithm);
  summary["config"] = config_to_json(config);
  summary["constants"] = constants_to_json(c);
  summary["cells"] = json::array();
  for (const auto& cell : res.cells) {
    json jc = {{"n", cell.n},
               {"t", cell.t},
               {"emp_risk", mean_json(cell.emp_risk)},
               {"pop_risk", mean_json(cell.pop_risk)},
               {"gap", mean_json(cell.gap)},
               {"stability", mean_json(cell.stability)},
               {"excess", mean_json(cell.excess)},
               {"grad_norm", mean_json(cell.grad_norm)}};
    jc["opt_gap"] = cell.opt_gap ? mean_json(*cell.opt_gap) : json(nullptr);
    jc["opt_bound"] = cell.opt_bound ? json(*cell.opt_bound) : json(nullptr);
    jc["stability_is_lower_estimate"] = true;
    jc["bounds"] = json::array();
    for (const auto& b : cell.bounds) jc["bounds"].push_back(bound_report_to_json(b));
    summary["cells"].push_back(std::move(jc));
  }
  summary["assertions"] = assertions;
  summary["pass"] = all_pass;
  std::ofstream(res.output_dir / "summary.json") << summary.dump(2) << "\n";

  const auto failures_path = res.output_dir / "failures.json";
  if (!all_pass) {
    json failed = json::array();
    for (const auto& a : assertions)
      if (!a["pass"].get<bool>()) failed.push_back(a);
    std::ofstream(failures_path) << failed.dump(2) << "\n";
  } else {
    std::filesystem::remove(failures_path);
  }
  return res;
}

}  // namespace stablab
