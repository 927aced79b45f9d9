#pragma once

// Stochastic simulation of the finite-N process with exponential, Erlang or
// constant infectious periods, and the censored maximum-likelihood estimate
// of the mean persistence time.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "sispersist/model.hpp"

namespace sispersist {

enum class PeriodKind { exponential, erlang, constant };

std::string_view to_string(PeriodKind k);
PeriodKind period_from_string(std::string_view s);

struct SimConfig {
  ModelSpec spec;  // population required; erlang uses spec.stages
  PeriodKind period = PeriodKind::exponential;
  double t0 = -1.0;    // burn-in; negative selects the default
  double tmax = -1.0;  // censoring time; negative selects the default
  double tmax_cap = 1e6;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<std::vector<int>> initial;  // infected per group
};

/// t0 = (10 / gamma) max(1, 1 / (R0 - 1)) above threshold, 10 / gamma otherwise.
double default_t0(const ModelSpec& spec);

/// t0 + (50 / gamma) e^{A N}, capped at cap. A is the closed-form action when
/// one exists and the homogeneous value otherwise.
double default_tmax(const ModelSpec& spec, double t0, double cap);

/// Per-replicate stream: counter-based split of the root seed.
std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index);

using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct TraceEvent {
  double time = 0.0;
  std::size_t group = 0;
  int delta = 0;  // +1 infection, -1 recovery, 0 stage progression
};

struct SimOutcome {
  bool extinct = false;
  double time = 0.0;  // extinction time, or the horizon when alive
  std::uint64_t events = 0;
  std::vector<int> final_state;  // infected per group at `time`
};

/// Initial infected counts: the override if set, else round(N y*_i) per
/// group (at least one infective overall; one per group below threshold).
std::vector<int> initial_state(const SimConfig& cfg);

/// One run from the initial state up to extinction or `horizon`.
SimOutcome simulate_one(const SimConfig& cfg, double horizon, Rng& rng,
                        std::vector<TraceEvent>* trace = nullptr);

struct SimEstimate {
  double tau_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t r = 0;          // extinct in (t0, tmax]
  std::size_t m = 0;          // alive at tmax
  std::size_t discarded = 0;  // extinct by t0
  std::size_t replicates = 0;
  double t0 = 0.0;
  double tmax = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> extinction_offsets;  // T_i - t0, replicate order
};

/// tau_hat = (m (tmax - t0) + sum offsets) / r with standard error tau_hat / sqrt(r).
/// Throws EstimatorUndefined when there are no extinctions.
SimEstimate tau_from_counts(std::span<const double> offsets, std::size_t m, double t0, double tmax);

/// Runs all replicates (in parallel if threads > 1) and applies the estimator.
SimEstimate estimate_tau(const SimConfig& cfg);

struct DualityProbe {
  SimEstimate original;
  SimEstimate swapped;  // lambda and mu interchanged
  double ratio = 0.0;   // original / swapped
  double ratio_stderr = 0.0;
};

DualityProbe duality_probe(const SimConfig& cfg);

}  // namespace sispersist
