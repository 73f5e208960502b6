#include "stablab/experiment.hpp"

#include <set>
#include <type_traits>

namespace stablab {

namespace {

using nlohmann::json;

class ParamReader {
 public:
  ParamReader(const std::string& family, const json& params) : family_(family), params_(params) {
    if (!params_.is_object()) throw ConfigError("/problem/params", family + " parameters must be an object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!params_.contains(key)) return fallback;
    const json& v = params_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw ConfigError(where(key), "expected a nonnegative integer");
        }
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key), e.what());
    }
  }

  bool has(const std::string& key) const { return params_.contains(key); }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return params_.at(key);
  }
  std::string where(const std::string& key) const { return "/problem/params/" + key; }

  void reject_unknown() const {
    for (const auto& [key, value] : params_.items())
      if (!seen_.count(key)) throw ConfigError(where(key), "unknown parameter for " + family_);
  }

 private:
  std::string family_;
  json params_;
  std::set<std::string> seen_;
};

std::shared_ptr<ProblemSpec> build_quadratic(ParamReader& p) {
  const auto d = p.get<long>("d", 2);
  const double rho = p.get<double>("noise_radius", 1.0);
  if (d < 1) throw ConfigError(p.where("d"), "must be at least 1");
  ParamVector mu = ParamVector::Zero(d);
  if (p.has("mu")) {
    const json& m = p.raw("mu");
    if (m.is_number()) {
      mu.setConstant(m.get<double>());
    } else if (m.is_array() && static_cast<long>(m.size()) == d) {
      for (long i = 0; i < d; ++i) {
        if (!m[i].is_number()) throw ConfigError(p.where("mu") + "/" + std::to_string(i), "expected a number");
        mu[i] = m[i].get<double>();
      }
    } else {
      throw ConfigError(p.where("mu"), "expected a number or an array of length d");
    }
  }
  p.reject_unknown();
  return make_quadratic_mean(d, mu, rho);
}

std::shared_ptr<ProblemSpec> build_double_well(ParamReader& p) {
  DoubleWellParams dp;
  dp.d = p.get<long>("d", dp.d);
  dp.well_radius = p.get<double>("well_radius", dp.well_radius);
  dp.noise_scale = p.get<double>("noise_scale", dp.noise_scale);
  dp.curvature_noise = p.get<double>("curvature_noise", dp.curvature_noise);
  dp.seed = p.get<std::uint64_t>("seed", dp.seed);
  dp.certify_resolution = p.get<double>("certify_resolution", dp.certify_resolution);
  p.reject_unknown();
  return make_double_well(dp);
}

std::shared_ptr<ProblemSpec> build_logistic(ParamReader& p) {
  LogisticBlobsParams lp;
  lp.classes = p.get<int>("classes", lp.classes);
  lp.d = p.get<long>("d", lp.d);
  lp.n_population_oracle = p.get<std::size_t>("n_population_oracle", lp.n_population_oracle);
  lp.seed = p.get<std::uint64_t>("seed", lp.seed);
  lp.separation = p.get<double>("separation", lp.separation);
  lp.domain_radius = p.get<double>("domain_radius", lp.domain_radius);
  lp.certify_points = p.get<std::size_t>("certify_points", lp.certify_points);
  p.reject_unknown();
  return make_logistic_blobs(lp);
}

}  // namespace

std::vector<std::string> problem_names() { return {"quadratic_mean", "double_well", "logistic_blobs"}; }

bool is_convex_family(const std::string& name) { return name == "quadratic_mean" || name == "logistic_blobs"; }

std::shared_ptr<ProblemSpec> make_problem(const std::string& name, const nlohmann::json& params) {
  ParamReader reader(name, params.is_null() ? nlohmann::json::object() : params);
  if (name == "quadratic_mean") return build_quadratic(reader);
  if (name == "double_well") return build_double_well(reader);
  if (name == "logistic_blobs") return build_logistic(reader);
  throw ConfigError("/problem/name", "unknown problem family '" + name + "'");
}

}  // namespace stablab
