#pragma once

// Exact finite-N quantities for the exponential-period model: state
// enumeration, the transient generator, the quasi-stationary distribution
// and the mean persistence time tau, plus transient probabilities by
// uniformization.

#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sispersist/kernels.hpp"
#include "sispersist/model.hpp"

namespace sispersist {

inline constexpr std::size_t kDefaultStateCap = 5'000'000;

/// Mixed-radix encoding of x = (I_1, ..., I_k), 0 <= I_j <= N_j, with the
/// last group varying fastest. Index 0 is the absorbing all-zero state; the
/// transient class C is indices 1..total-1 and is addressed as index - 1.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<int> group_sizes);

  std::size_t encode(std::span<const int> x) const;
  std::vector<int> decode(std::size_t index) const;
  int digit(std::size_t index, std::size_t group) const {
    return static_cast<int>((index / strides_[group]) % (static_cast<std::size_t>(sizes_[group]) + 1));
  }

  const std::vector<int>& group_sizes() const { return sizes_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  std::size_t total_states() const { return total_; }
  std::size_t transient_count() const { return total_ - 1; }
  std::size_t groups() const { return sizes_.size(); }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

/// Table 1 rates at state x (group counts): infection in j is
/// (beta/N) (sum_m lambda_m I_m) mu_j (N_j - I_j), recovery in j is gamma I_j.
double infection_rate(const ModelSpec& spec, std::span<const int> counts, std::span<const int> x,
                      std::size_t j);
double recovery_rate(const ModelSpec& spec, std::span<const int> x, std::size_t j);

/// Generator restricted to C (row = from, column = to), transient index
/// convention of StateSpace. Row sums are minus the rate of jumping to the
/// absorbing state. Throws StateSpaceTooLarge above state_cap and
/// InvalidModel for stages != 1 or a missing population.
Eigen::SparseMatrix<double, Eigen::RowMajor> build_generator(const ModelSpec& spec,
                                                             std::size_t state_cap = kDefaultStateCap);

/// Rate of jumping from each transient state straight to extinction.
std::vector<double> absorption_rates(const ModelSpec& spec, std::size_t state_cap = kDefaultStateCap);

struct ExactOptions {
  double tol = 1e-10;      // infinity-norm residual of q Q_C + q / tau
  double rel_tol = 1e-12;  // relative change of 1/tau between checks
  std::size_t check_every = 100;
  std::size_t max_iters = 20'000'000;
  std::size_t state_cap = kDefaultStateCap;
  bool throw_on_failure = true;
  kernels::Isa isa = kernels::active();
  std::optional<std::vector<double>> initial;  // over C; e.g. a warm start
};

struct QsdResult {
  double tau = 0.0;
  std::vector<double> q;  // over C, sums to 1
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double uniformization_rate = 0.0;
  StateSpace space;
};

/// Left Perron pair of Q_C by power iteration on P = I + Q_C / Lambda,
/// Lambda = 1.01 * max exit rate. 1/tau is read off as the probability flux
/// into the absorbing state under q, which keeps full precision when tau is
/// astronomically large. Throws ConvergenceFailure (unless disabled in opts)
/// when max_iters is reached.
QsdResult quasi_stationary(const ModelSpec& spec, const ExactOptions& opts = {});

/// Slope (ln(tau_2 sqrt N2) - ln(tau_1 sqrt N1)) / (N2 - N1).
double finite_n_action_estimate(const ModelSpec& spec, int n1, int n2, const ExactOptions& opts = {});

struct ProfilePoint {
  std::vector<double> y;    // x / N
  double log_q_over_n = 0.0;
};

/// (ln q_x) / N for every transient state.
std::vector<ProfilePoint> log_qsd_profile(const ModelSpec& spec, const QsdResult& qsd);

/// Distribution at time t over all states (absorbing state included, index
/// 0) started from state x0, by uniformization with Poisson weights.
std::vector<double> transient_distribution(const ModelSpec& spec, std::span<const int> x0, double t,
                                           std::size_t state_cap = kDefaultStateCap);

/// CSV dump of q: one row per transient state with the group counts.
void write_qsd_csv(std::ostream& os, const QsdResult& qsd);

/// FNV-1a over the fields that determine tau.
std::uint64_t spec_hash(const ModelSpec& spec);

/// Binary file of (spec hash, tau, residual) records.
class TauCache {
 public:
  struct Entry {
    double tau = 0.0;
    double residual = 0.0;
  };

  explicit TauCache(std::string path);
  std::optional<Entry> find(const ModelSpec& spec) const;
  void store(const ModelSpec& spec, const Entry& e);
  void flush() const;

 private:
  std::string path_;
  std::unordered_map<std::uint64_t, Entry> entries_;
};

}  // namespace sispersist
