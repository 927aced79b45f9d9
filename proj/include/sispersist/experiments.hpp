#pragma once

// Figure reproductions and sweeps shared by the CLI and the acceptance
// runner. Each returns the CSV table it would write; rows come out in a
// fixed order whatever the thread count.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sispersist/csv.hpp"
#include "sispersist/exact.hpp"
#include "sispersist/hamiltonian.hpp"
#include "sispersist/model.hpp"
#include "sispersist/montecarlo.hpp"

namespace sispersist {

inline constexpr const char* kVersion = "1.0.0";

/// k = 2, f = (1/2, 1/2), lambda = (100/51, 2/51), mu = 1, R0 = 1.5.
ModelSpec figure1_spec();
/// k = 2, f = (1/2, 1/2), lambda = (5/3, 1/3), mu = 1, R0 = 1.2.
ModelSpec figure3_spec();

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Provenance lines shared by every artifact.
void add_provenance(CsvTable& t, const std::string& command);

struct ExactSweepOptions {
  ModelSpec spec = figure1_spec();
  std::vector<int> n_values;  // empty: 100, 150, ..., 650
  ExactOptions exact;
  unsigned threads = 1;
};

/// Columns N, tau, ln_tau_over_N, action, action_homog, residual, iterations,
/// converged. `action` is the closed form when it exists and empty otherwise.
CsvTable figure1(const ExactSweepOptions& opts);

std::vector<double> figure2_axis(int resolution);  // 0.1 .. 1.9, evenly spaced

struct Figure2Options {
  double r0 = 1.2;
  double gamma = 1.0;
  int resolution = 11;
  BvpOptions bvp;
  int n1 = 400;
  int n2 = 500;
  std::vector<std::pair<double, double>> finite_cells;  // empty: every grid cell
  ExactOptions exact;
  unsigned threads = 1;
};

/// Columns lambda1, mu1, beta, action, h_residual_max, converged.
CsvTable figure2_bvp(const Figure2Options& opts);

/// Columns lambda1, mu1, beta, action_finite_n, tau_n1, tau_n2, converged.
CsvTable figure2_finite(const Figure2Options& opts);

struct Figure3Options {
  ModelSpec spec = figure3_spec();  // the mu-heterogeneous twin is derived by swapping
  std::vector<int> n_values;        // empty: 200, 300, ..., 600
  PeriodKind period = PeriodKind::constant;
  std::size_t replicates = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double tmax_cap = 1e6;
  int exact_n_max = 600;  // exact exponential tau for N up to this, 0 to skip
};

struct Figure3Row {
  int n = 0;
  std::string variant;  // "lambda" or "mu"
  SimEstimate estimate;
  double exact_tau = 0.0;  // 0 when not computed
};

struct Figure3Result {
  std::vector<Figure3Row> rows;  // lambda rows then mu rows, N ascending
  CsvTable table;
};

/// Columns N, variant, period_kind, tau_hat, r, m, discarded, stderr, seed,
/// half_ln_N_plus_ln_tau, tau_exact_exponential.
Figure3Result figure3(const Figure3Options& opts);

/// Ordinary least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct OrderCheckOptions {
  std::vector<std::vector<double>> family;  // candidate lambda (or mu) vectors
  std::vector<double> f;
  bool susceptibility = false;  // vary mu instead of lambda
  double r0 = 1.5;
  double gamma = 1.0;
};

/// Every ordered pair (i, j), i != j: columns i, j, precedes, action_i,
/// action_j, action_ge, consistent. `precedes` is x_i p-majorized by x_j and
/// `consistent` is false only when precedes holds but A_i < A_j - 1e-12.
CsvTable order_check(const OrderCheckOptions& opts);

}  // namespace sispersist
