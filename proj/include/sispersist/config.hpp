#pragma once

// JSON model and degree-law configs.
//
// Model:   {"f": [...], "lambda": [...], "mu": [...], "beta": b | "target_r0": r,
//           "gamma": g, "stages": s, "population": N, "k": k}
// Degrees: {"kappa": c, "gamma": g, "d_max": d, "degrees": [[d_in, d_out, p], ...]}

#include <string>
#include <string_view>

#include "sispersist/model.hpp"

namespace sispersist {

std::string read_text_file(const std::string& path);

/// True if the document carries a "degrees" table.
bool is_degree_config(std::string_view json_text);

/// Parses and validates a model. lambda and mu default to all ones, gamma
/// to 1, stages to 1. Throws ConfigError on syntax or schema problems and
/// InvalidModel on invariant violations.
ModelSpec parse_model(std::string_view json_text);
DegreeDistribution parse_degrees(std::string_view json_text);

/// Either form of config; degree laws go through the network mapping.
ModelSpec load_model(const std::string& path);

std::string to_json(const ModelSpec& spec);
std::string to_json(const DegreeDistribution& d);

}  // namespace sispersist
