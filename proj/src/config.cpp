#include "sispersist/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sispersist/error.hpp"

namespace sispersist {

using nlohmann::json;

namespace {

json parse(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

std::vector<double> vec_or(const json& j, const char* key, std::size_t k, double fill) {
  if (!j.contains(key)) return std::vector<double>(k, fill);
  try {
    return j.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("'") + key + "' must be an array of numbers");
  }
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("missing or mistyped key '") + key + "'");
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool is_degree_config(std::string_view json_text) { return parse(json_text).contains("degrees"); }

ModelSpec parse_model(std::string_view json_text) {
  const json j = parse(json_text);
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  if (!j.contains("f")) throw ConfigError("model config needs 'f'");
  ModelSpec raw;
  raw.groups.f = vec_or(j, "f", 0, 0.0);
  const std::size_t k = raw.groups.f.size();
  if (j.contains("k") && get<std::size_t>(j, "k") != k) throw ConfigError("'k' disagrees with the length of 'f'");
  raw.groups.lambda = vec_or(j, "lambda", k, 1.0);
  raw.groups.mu = vec_or(j, "mu", k, 1.0);
  raw.gamma = j.contains("gamma") ? get<double>(j, "gamma") : 1.0;
  raw.stages = j.contains("stages") ? get<int>(j, "stages") : 1;
  if (j.contains("population")) raw.population = get<int>(j, "population");

  const bool has_beta = j.contains("beta");
  const bool has_r0 = j.contains("target_r0");
  if (has_beta == has_r0) throw ConfigError("give exactly one of 'beta' and 'target_r0'");
  if (has_beta) {
    raw.beta = get<double>(j, "beta");
    return validate(std::move(raw));
  }
  const double target = get<double>(j, "target_r0");
  ModelSpec spec = spec_for_r0(std::move(raw.groups), raw.gamma, target, raw.stages, raw.population);
  return spec;
}

DegreeDistribution parse_degrees(std::string_view json_text) {
  const json j = parse(json_text);
  DegreeDistribution d;
  d.kappa = get<double>(j, "kappa");
  d.gamma = j.contains("gamma") ? get<double>(j, "gamma") : 1.0;
  d.d_max = j.contains("d_max") ? get<int>(j, "d_max") : 0;
  const json& rows = j.at("degrees");
  if (!rows.is_array()) throw ConfigError("'degrees' must be an array of [d_in, d_out, prob]");
  for (const auto& r : rows) {
    if (!r.is_array() || r.size() != 3) throw ConfigError("each degree row is [d_in, d_out, prob]");
    d.support.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<double>()});
  }
  validate_degrees(d);
  return d;
}

ModelSpec load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  if (is_degree_config(text)) return from_degree_distribution(parse_degrees(text));
  return parse_model(text);
}

std::string to_json(const ModelSpec& spec) {
  json j;
  j["k"] = spec.k();
  j["f"] = spec.groups.f;
  j["lambda"] = spec.groups.lambda;
  j["mu"] = spec.groups.mu;
  j["beta"] = spec.beta;
  j["gamma"] = spec.gamma;
  j["stages"] = spec.stages;
  if (spec.population) j["population"] = *spec.population;
  return j.dump();
}

std::string to_json(const DegreeDistribution& d) {
  json j;
  j["kappa"] = d.kappa;
  j["gamma"] = d.gamma;
  j["d_max"] = d.d_max;
  json rows = json::array();
  for (const auto& p : d.support) rows.push_back({p.d_in, p.d_out, p.prob});
  j["degrees"] = rows;
  return j.dump();
}

}  // namespace sispersist
