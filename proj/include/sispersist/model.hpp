#pragma once

// k-group, s-stage SIS model: group structure, rates, population sizes and
// the annealed directed-network mapping.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sispersist {

inline constexpr double kNormalizationTol = 1e-12;

/// Fractions f, infectivities lambda and susceptibilities mu of k groups.
/// After validation: all entries > 0, sum f = sum lambda*f = sum mu*f = 1.
struct GroupStructure {
  std::vector<double> f;
  std::vector<double> lambda;
  std::vector<double> mu;

  std::size_t size() const noexcept { return f.size(); }
};

/// Multipliers that validate() divided the raw vectors by.
struct ScaleFactors {
  double f = 1.0;
  double lambda = 1.0;
  double mu = 1.0;
};

struct ModelSpec {
  GroupStructure groups;
  double beta = 0.0;   // contact-rate scale
  double gamma = 1.0;  // recovery-rate scale; mean infectious period 1/gamma
  int stages = 1;      // Erlang shape, 1 = exponential
  std::optional<int> population;
  ScaleFactors applied_scale;

  std::size_t k() const noexcept { return groups.size(); }
};

/// Normalizes a raw spec. f is divided by its sum, then lambda and mu are
/// divided by sum(lambda*f) and sum(mu*f); beta absorbs both factors so the
/// per-pair contact rates beta*lambda_i*mu_j are unchanged. Sums already
/// within kNormalizationTol of 1 are left untouched, so validate is
/// idempotent bit for bit.
/// Throws InvalidModel on empty or mismatched vectors, nonpositive entries,
/// beta <= 0, gamma <= 0, stages < 1, or an infeasible population.
ModelSpec validate(ModelSpec raw);

/// Per-group counts N_i = round(N f_i) with largest-remainder correction so
/// that they sum to N. Throws InvalidModel if some N_i would be 0.
std::vector<int> group_counts(std::span<const double> f, int population);
std::vector<int> group_counts(const ModelSpec& spec);

/// R0 = (beta/gamma) sum lambda_i mu_i f_i. Independent of the stage count.
double r0(const ModelSpec& spec);

/// beta giving the requested R0 for the given (normalized) group structure.
double beta_for_r0(const GroupStructure& groups, double gamma, double target_r0);

/// Convenience: validated spec with beta chosen to hit target_r0.
ModelSpec spec_for_r0(GroupStructure groups, double gamma, double target_r0,
                      int stages = 1, std::optional<int> population = {});

bool all_ones(std::span<const double> v, double tol = kNormalizationTol);

/// Interchanges lambda and mu (the network-duality partner).
ModelSpec swap_infectivity_susceptibility(const ModelSpec& spec);

/// Fuses groups whose (lambda, mu) coincide within tol, adding fractions.
ModelSpec merge_equal_groups(const ModelSpec& spec, double tol = kNormalizationTol);

ModelSpec with_population(ModelSpec spec, int population);

// ---------------------------------------------------------------------------
// Annealed directed networks

struct DegreePoint {
  int d_in = 0;
  int d_out = 0;
  double prob = 0.0;
};

struct DegreeDistribution {
  std::vector<DegreePoint> support;
  double kappa = 1.0;  // per-link transmission rate
  double gamma = 1.0;
  int d_max = 0;       // 0: take the largest degree present

  double mean_in() const;
  double mean_out() const;
};

/// Checks probabilities, the E[d_in] = E[d_out] balance and the degree cap.
void validate_degrees(const DegreeDistribution& d);

struct NetworkMapping {
  ModelSpec spec;
  std::vector<DegreePoint> groups;    // support point behind each group
  std::vector<DegreePoint> excluded;  // points with d_in = 0
  double excluded_mass = 0.0;
};

/// Annealed approximation: one group per support point with d_in > 0,
/// beta = kappa E[d_out], f_j = p_j, mu_j = d_in(j)/E[d_in],
/// lambda_j = d_out(j)/E[d_out]. Points with d_in = 0 can never be infected
/// and are dropped; the law is conditioned on the rest, which leaves the
/// process unchanged on the remaining (1 - excluded_mass) N individuals.
/// Points with d_in > 0 and d_out = 0 would need lambda_j = 0 and are
/// rejected with InvalidModel.
NetworkMapping map_degree_distribution(const DegreeDistribution& d);
ModelSpec from_degree_distribution(const DegreeDistribution& d);

}  // namespace sispersist
