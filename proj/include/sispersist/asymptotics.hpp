#pragma once

// Closed-form large-population quantities for the heterogeneous SIS model:
// the D and Q root equations, endemic equilibrium, the momentum-space
// equilibrium theta*, explicit actions and the U/V potentials that solve the
// two Hamilton-Jacobi equations when one heterogeneity is absent.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sispersist/model.hpp"
#include "sispersist/roots.hpp"

namespace sispersist {

enum class ActionVariant {
  hetero_infectivity,
  hetero_susceptibility,
  homogeneous,
  erlang_susceptibility,
  network_out,
  network_in,
};

std::string_view to_string(ActionVariant v);

struct ActionResult {
  double action = 0.0;    // lim (ln tau)/N
  double d_value = 0.0;   // the root D the closed form was evaluated at
  std::vector<double> y_star;
  std::vector<double> theta_star;  // k entries, or k*s row-major for Erlang
  ActionVariant variant = ActionVariant::homogeneous;
};

/// Dense k-by-s array (group-major) for stage-resolved states and momenta.
struct StageMatrix {
  std::size_t groups = 0;
  std::size_t stages = 0;
  std::vector<double> values;

  StageMatrix() = default;
  StageMatrix(std::size_t k, std::size_t s, double fill = 0.0)
      : groups(k), stages(s), values(k * s, fill) {}
  double& operator()(std::size_t i, std::size_t v) { return values[i * stages + v]; }
  double operator()(std::size_t i, std::size_t v) const { return values[i * stages + v]; }
  double group_total(std::size_t i) const;
};

struct PotentialPoint {
  std::vector<double> location;
  double value = 0.0;
  double q_value = 0.0;  // Q or Q_s at this point, 0 for V
};

/// Unique positive D with (beta/gamma) sum_j a_j b_j f_j / (1 + b_j D) = 1.
/// The second vector multiplies D. Throws Subcritical when the left side
/// at D = 0 is <= 1.
RootResult solve_D(std::span<const double> a, std::span<const double> b,
                   std::span<const double> f, double beta, double gamma);

/// Right side of the deterministic ODE dy/dt.
std::vector<double> deterministic_rhs(const ModelSpec& spec, std::span<const double> y);

/// y*_i = mu_i f_i D(lambda,mu) / (1 + mu_i D(lambda,mu)).
std::vector<double> endemic_equilibrium(const ModelSpec& spec);

/// theta*_i = -ln(1 + lambda_i D(mu,lambda)).
std::vector<double> theta_star(const ModelSpec& spec);

/// Left side of the theta* equilibrium condition, one entry per group:
/// beta lambda_i sum_j mu_j f_j (e^theta_j - 1) + gamma (e^-theta_i - 1).
std::vector<double> theta_equilibrium_residual(const ModelSpec& spec,
                                               std::span<const double> theta);

/// Explicit action when mu = 1 (infectivity form) or lambda = 1
/// (susceptibility form); both all-ones gives the homogeneous value.
/// Throws MixedHeterogeneity otherwise, Subcritical when R0 <= 1.
ActionResult action_closed_form(const ModelSpec& spec);

/// A0 = 1/R0 - 1 + ln R0. Throws Subcritical for R0 < 1; 0 at R0 = 1.
double action_homogeneous(double r0);

// --- susceptibility-only potentials (lambda = 1) ---------------------------

/// V(y) with the y ln y = 0 convention. Throws InvalidModel unless lambda = 1
/// and 0 <= y_i <= f_i.
PotentialPoint potential_V_susceptibility(const ModelSpec& spec, std::span<const double> y);
std::vector<double> gradient_V_susceptibility(const ModelSpec& spec, std::span<const double> y);

/// Q(mu, theta) >= 0 with (beta/gamma) sum mu_j f_j / (e^-theta_j + mu_j Q) = 1.
/// Returns 0 when theta sits on theta*; throws NoRoot if no nonnegative root.
RootResult solve_Q(const ModelSpec& spec, std::span<const double> theta);
PotentialPoint potential_U_susceptibility(const ModelSpec& spec, std::span<const double> theta);

// --- Erlang stages ---------------------------------------------------------

/// D_s(mu, lambda): (beta/(s gamma)) sum mu_j f_j lambda_j sum_v (1+lambda_j D)^-v = 1.
RootResult solve_Ds(const ModelSpec& spec);

/// theta*_{iv} = -(s+1-v) ln(1 + lambda_i D_s), v = 1..s.
StageMatrix theta_star_erlang(const ModelSpec& spec);

/// Erlang y*_{iv} = y*_i / s.
StageMatrix endemic_equilibrium_erlang(const ModelSpec& spec);

/// Hamiltonian of the k-group, s-stage model.
double hamiltonian_erlang(const ModelSpec& spec, const StageMatrix& y, const StageMatrix& theta);

/// -dH/dy at y = 0 evaluated at theta (zero at theta*).
StageMatrix erlang_theta_residual(const ModelSpec& spec, const StageMatrix& theta);

PotentialPoint potential_V_erlang_susceptibility(const ModelSpec& spec, const StageMatrix& y);
StageMatrix gradient_V_erlang_susceptibility(const ModelSpec& spec, const StageMatrix& y);

RootResult solve_Qs(const ModelSpec& spec, const StageMatrix& theta);
PotentialPoint potential_U_erlang(const ModelSpec& spec, const StageMatrix& theta);

/// Action of the s-stage susceptibility model from the potentials,
/// V(0) - V(y*). Requires lambda = 1.
ActionResult action_erlang_susceptibility(const ModelSpec& spec);

// --- networks --------------------------------------------------------------

/// Fixed in-degree networks: A_out from the out-degree law. Throws
/// InvalidModel if in-degrees differ. Value is per total population.
ActionResult action_network_out(const DegreeDistribution& d);
/// Fixed out-degree networks: A_in from the in-degree law.
ActionResult action_network_in(const DegreeDistribution& d);

}  // namespace sispersist
