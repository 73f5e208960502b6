#pragma once

#include "stablab/bounds.hpp"
#include "stablab/problems.hpp"
#include "stablab/stability.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stablab {

// ---- problem registry ----

/// Builds a problem family by name from a JSON object of parameters.
/// Unknown parameter names are rejected.
std::shared_ptr<ProblemSpec> make_problem(const std::string& name, const nlohmann::json& params);
std::vector<std::string> problem_names();
/// Families satisfying the convexity assumption (convex bounds apply).
bool is_convex_family(const std::string& name);

// ---- configuration ----

/// Config rejection; `where` is a JSON pointer to the offending field.
class ConfigError : public UsageError {
 public:
  ConfigError(const std::string& where, const std::string& what);
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct ExperimentConfig {
  std::string problem_name;
  nlohmann::json problem_params = nlohmann::json::object();
  AlgorithmKind algorithm = AlgorithmKind::gd;
  std::vector<std::size_t> n_values;
  std::vector<std::size_t> t_values;
  std::size_t replicates = 50;
  std::size_t algo_seeds_per_replicate = 1;
  std::size_t probe_count = 512;
  std::uint64_t base_seed = 0;
  std::string output_dir = "results";
  std::size_t record_stride = 1;
  /// <= 0 means "largest admissible".
  double pgd_epsilon = 0.0;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Environment variable that overrides `output_dir`.
inline constexpr const char* kOutputDirEnv = "STABLAB_OUTPUT_DIR";

// ---- CSV ----

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Writes `# schema: <schema>` and, unless disabled, `# generated: <utc time>`.
/// The timestamp line is the only non-deterministic output.
void write_csv_preamble(std::ostream& out, const std::string& schema, bool timestamp);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

inline constexpr const char* kReplicateSchema = "stablab.replicates v1";
inline constexpr const char* kAggregateSchema = "stablab.aggregate v1";
inline constexpr const char* kBoundsSchema = "stablab.bounds v1";

std::vector<std::string> replicate_columns();
std::vector<std::string> replicate_cells(const std::string& problem, const ReplicateRecord& r);

// ---- suite ----

struct AssertionResult {
  std::string name;
  std::size_t n = 0;
  std::size_t t = 0;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct CellAggregate {
  std::size_t n = 0;
  std::size_t t = 0;
  MeanEstimate emp_risk, pop_risk, gap, stability, excess, grad_norm;
  std::optional<MeanEstimate> opt_gap;
  std::vector<BoundReport> bounds;
  std::optional<double> opt_bound;  // gd or sgd optimization-error bound at t
};

struct SuiteResult {
  int exit_code = 0;
  std::filesystem::path output_dir;
  std::vector<ReplicateRecord> records;
  std::vector<CellAggregate> cells;
  std::vector<AssertionResult> assertions;
  ConstantsBundle constants;
};

struct SuiteOptions {
  bool timestamp = true;
  /// Takes precedence over both the config and the environment.
  std::optional<std::filesystem::path> output_dir;
};

/// Runs the (n x t x replicate) grid, writes replicates.csv, aggregate.csv,
/// bounds.csv and summary.json (plus failures.json on assertion failure).
/// Exit code 0 when every assertion passes, 2 otherwise.
SuiteResult run_suite(const ExperimentConfig& config, const SuiteOptions& options = {});

/// Checks that need the problem instance, e.g. PGD admissibility. Throws
/// ConfigError.
void validate_config_against_problem(const ExperimentConfig& config, const ProblemSpec& spec);

nlohmann::json constants_to_json(const ConstantsBundle& c);
nlohmann::json bound_report_to_json(const BoundReport& r);

}  // namespace stablab
