#pragma once

// Hamiltonian dynamics of the WKB limit and the heteroclinic orbit from
// (y*, 0) to (0, theta*) whose action gives the persistence exponent when
// both infectivity and susceptibility vary.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "sispersist/model.hpp"

namespace sispersist {

struct PhasePoint {
  std::vector<double> y;
  std::vector<double> theta;
};

/// H(y, theta) = beta (sum lambda_j y_j) sum_i mu_i (f_i - y_i)(e^theta_i - 1)
///             + gamma sum_i y_i (e^-theta_i - 1)
double hamiltonian(const ModelSpec& spec, const PhasePoint& p);

struct EomRhs {
  std::vector<double> dy;
  std::vector<double> dtheta;
};

/// dy/dt = dH/dtheta, dtheta/dt = -dH/dy.
EomRhs eom_rhs(const ModelSpec& spec, const PhasePoint& p);

/// Jacobian of (dy/dt, dtheta/dt) with respect to (y, theta), 2k x 2k.
Eigen::MatrixXd eom_jacobian(const ModelSpec& spec, const PhasePoint& p);

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  double h_residual_max = 0.0;
  double action_forward = 0.0;   // integral of theta . dy/dt
  double action_backward = 0.0;  // minus integral of y . dtheta/dt
  double unfolding = 0.0;        // vanishes on a true connection
  double left_distance = 0.0;    // |z(t_0) - (y*, 0)|_inf
  double right_distance = 0.0;   // |z(t_M) - (0, theta*)|_inf
  int newton_iterations = 0;
  int continuation_steps = 0;
  bool converged = false;

  double action() const { return action_forward; }
};

struct BvpOptions {
  double endpoint_offset = 1e-6;  // target distance of the end nodes from the equilibria
  double max_endpoint_distance = 1e-5;
  double initial_step = 0.25;     // time step of the starting mesh, in units of 1/gamma
  double h_tol = 1e-9;            // mesh refinement target for max |H|
  double newton_tol = 1e-12;
  int max_newton = 40;
  int max_refinements = 14;
  std::size_t max_nodes = 60000;
  double min_continuation_step = 1e-4;
};

/// Solves for the connecting orbit by continuation from the homogeneous
/// model with the same f, gamma and R0, whose orbit is known in closed form.
/// Throws Subcritical for R0 <= 1 and ConvergenceFailure when Newton or the
/// continuation stalls.
Trajectory solve_heteroclinic(const ModelSpec& spec, const BvpOptions& opts = {});

/// Continues an already solved orbit of `from` to the model `to` along the
/// straight line between their parameters (R0 interpolated as well).
Trajectory continue_heteroclinic(const ModelSpec& from, const Trajectory& orbit, const ModelSpec& to,
                                 const BvpOptions& opts = {});

/// Cell of the two-group action surface with f = (1/2, 1/2),
/// lambda = (lambda1, 2 - lambda1), mu = (mu1, 2 - mu1).
struct GridCell {
  double lambda1 = 0.0;
  double mu1 = 0.0;
  double beta = 0.0;
  double action = 0.0;
  double h_residual_max = 0.0;
  bool converged = false;
  std::string message;
};

ModelSpec two_group_spec(double lambda1, double mu1, double r0, double gamma = 1.0);

/// Actions on the tensor grid lambda1_values x mu1_values (row-major by
/// lambda1). Cells are solved in rings of growing Chebyshev distance from
/// the cell closest to (1, 1), each continued from an already solved
/// neighbour. Failed cells are marked, not fatal.
std::vector<GridCell> action_grid(std::span<const double> lambda1_values,
                                  std::span<const double> mu1_values, double r0, double gamma = 1.0,
                                  const BvpOptions& opts = {});

}  // namespace sispersist
