#include "stablab/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace stablab {

using nlohmann::json;

ConfigError::ConfigError(const std::string& where, const std::string& what)
    : UsageError(where + ": " + what), where_(where) {}

namespace {

const std::set<std::string> kTopKeys = {"problem",       "algorithm",   "n_values",
                                        "t_values",      "replicates",  "algo_seeds_per_replicate",
                                        "probe_count",   "base_seed",   "output_dir",
                                        "record_stride", "pgd_epsilon"};

std::size_t positive_count(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where, "expected a positive integer");
  const long long x = v.get<long long>();
  if (x < 1) throw ConfigError(where, "expected a positive integer, got " + std::to_string(x));
  return static_cast<std::size_t>(x);
}

std::vector<std::size_t> ascending_counts(const json& doc, const std::string& key) {
  const std::string where = "/" + key;
  if (!doc.contains(key)) throw ConfigError(where, "required field is missing (array of positive integers)");
  const json& arr = doc.at(key);
  if (!arr.is_array() || arr.empty()) throw ConfigError(where, "expected a non-empty array of positive integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(positive_count(arr[i], where + "/" + std::to_string(i)));
    if (i > 0 && out[i] <= out[i - 1]) throw ConfigError(where, "values must be strictly ascending");
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!kTopKeys.count(key)) throw ConfigError("/" + key, "unknown key");

  ExperimentConfig cfg;
  if (!doc.contains("problem")) throw ConfigError("/problem", "required field is missing (object with name, params)");
  const json& prob = doc.at("problem");
  if (!prob.is_object()) throw ConfigError("/problem", "expected an object");
  for (const auto& [key, value] : prob.items())
    if (key != "name" && key != "params") throw ConfigError("/problem/" + key, "unknown key");
  if (!prob.contains("name") || !prob.at("name").is_string())
    throw ConfigError("/problem/name", "expected a string naming the problem family");
  cfg.problem_name = prob.at("name").get<std::string>();
  const auto names = problem_names();
  if (std::find(names.begin(), names.end(), cfg.problem_name) == names.end())
    throw ConfigError("/problem/name", "unknown problem family '" + cfg.problem_name + "'");
  if (prob.contains("params")) {
    if (!prob.at("params").is_object()) throw ConfigError("/problem/params", "expected an object");
    cfg.problem_params = prob.at("params");
  }

  if (!doc.contains("algorithm") || !doc.at("algorithm").is_string())
    throw ConfigError("/algorithm", "expected one of \"gd\", \"sgd\", \"pgd\"");
  try {
    cfg.algorithm = parse_algorithm(doc.at("algorithm").get<std::string>());
  } catch (const UsageError& e) {
    throw ConfigError("/algorithm", e.what());
  }
  cfg.n_values = ascending_counts(doc, "n_values");
  cfg.t_values = ascending_counts(doc, "t_values");

  if (doc.contains("replicates")) cfg.replicates = positive_count(doc.at("replicates"), "/replicates");
  if (doc.contains("algo_seeds_per_replicate"))
    cfg.algo_seeds_per_replicate = positive_count(doc.at("algo_seeds_per_replicate"), "/algo_seeds_per_replicate");
  if (doc.contains("probe_count")) cfg.probe_count = positive_count(doc.at("probe_count"), "/probe_count");
  if (doc.contains("record_stride")) cfg.record_stride = positive_count(doc.at("record_stride"), "/record_stride");
  if (doc.contains("base_seed")) {
    const json& s = doc.at("base_seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("/base_seed", "expected a nonnegative integer");
    cfg.base_seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string()) throw ConfigError("/output_dir", "expected a string path");
    cfg.output_dir = doc.at("output_dir").get<std::string>();
  }
  if (doc.contains("pgd_epsilon")) {
    const json& e = doc.at("pgd_epsilon");
    if (e.is_string() && e.get<std::string>() == "max") {
      cfg.pgd_epsilon = 0.0;
    } else if (e.is_number() && e.get<double>() > 0.0) {
      cfg.pgd_epsilon = e.get<double>();
    } else {
      throw ConfigError("/pgd_epsilon", "expected a positive number or \"max\"");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON in ") + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = {{"name", c.problem_name}, {"params", c.problem_params}};
  j["algorithm"] = to_string(c.algorithm);
  j["n_values"] = c.n_values;
  j["t_values"] = c.t_values;
  j["replicates"] = c.replicates;
  j["algo_seeds_per_replicate"] = c.algo_seeds_per_replicate;
  j["probe_count"] = c.probe_count;
  j["base_seed"] = c.base_seed;
  j["output_dir"] = c.output_dir;
  j["record_stride"] = c.record_stride;
  if (c.pgd_epsilon > 0.0)
    j["pgd_epsilon"] = c.pgd_epsilon;
  else
    j["pgd_epsilon"] = "max";
  return j;
}

void validate_config_against_problem(const ExperimentConfig& config, const ProblemSpec& spec) {
  if (config.algorithm != AlgorithmKind::pgd) return;
  const ConstantsBundle& c = spec.constants();
  const BallDomain& dom = spec.domain();
  if (dom.center().norm() != 0.0 || dom.radius() != 1.0)
    throw ConfigError("/algorithm", "pgd runs on the unit ball; " + spec.name() + " has a different domain");
  double cap = 0.0;
  try {
    cap = pgd_max_epsilon(c);
  } catch (const UsageError& e) {
    throw ConfigError("/algorithm", e.what());
  }
  if (config.pgd_epsilon > cap)
    throw ConfigError("/pgd_epsilon", "exceeds the admissible maximum " + format_double(cap));
}

}  // namespace stablab
