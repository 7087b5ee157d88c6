#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffcon/basis.hpp"
#include "diffcon/model.hpp"
#include "diffcon/rng.hpp"

namespace diffcon {

// Per-event fatality mark generator. Default is a zero-inflated geometric
// calibrated so roughly 40% of events have no fatalities; an explicit pmf
// table can replace it.
struct FatalityDistribution {
  double zero_inflation = 0.25;
  double geometric_p = 0.2;  // geometric on {0, 1, ...}: P(k) = p (1-p)^k
  std::optional<std::vector<double>> table;

  void validate() const;
  std::int64_t sample(Rng& rng) const;
  // Expectation of h under the mark distribution (renormalised over the
  // enumerated support when the tail is truncated).
  double expected(const std::function<double(std::int64_t)>& h) const;
};

struct SimConfig {
  int days = 1000;
  ModelParams params;
  BasisSpec time_basis = BasisSpec::constant(0.0, 999.0);
  BasisSpec fatality_basis = BasisSpec::constant(0.0, 1.0);
  FatalityDistribution fatalities;
  std::uint64_t rng_seed = 1;
  bool record_truth = true;
  bool allow_explosive = false;
  std::chrono::sys_days start_date = std::chrono::sys_days{
      std::chrono::year{2000} / std::chrono::January / std::chrono::day{1}};
  std::string country_tag = "SIM";

  // Intercept-only configuration: constant diffusion rate and constant
  // volatility, the setting used throughout the recovery experiments.
  static SimConfig constant_rates(int days, double baseline_rate, double delta,
                                  const DecayKernel& kernel, double sigma2);

  void validate() const;
};

struct SimEvent {
  int day = 0;
  std::int64_t fatalities = 0;
};

struct SimTruth {
  std::vector<std::int64_t> yd;
  std::vector<std::int64_t> yc;
  Eigen::VectorXd lam_c;  // realized latent rates (hierarchical mode only)
  // Index into SimResult::events of each event's parent; -1 marks diffusion
  // events / immigrants. Filled by the branching generator.
  std::vector<std::int64_t> parent;
};

struct SimResult {
  EventSeries series;
  std::vector<SimEvent> events;
  SimTruth truth;
};

// Day-by-day generator following the hierarchical form: gamma-distributed
// latent contagion rates on top of the convolution mean.
SimResult simulate_hierarchical(const SimConfig& config);

// Cluster ("parents and children") generator: immigrants arrive at the
// diffusion rate, each event spawns a negative-binomial number of children
// with delays drawn from the decay kernel. Refuses branching ratio >= 1
// unless allow_explosive is set.
SimResult simulate_branching(const SimConfig& config);

// Mean offspring number E_f[delta(f)] under the fatality distribution;
// values >= 1 flag the non-stationary regime.
double branching_ratio(const ModelParams& params, const BasisSpec& fatality_basis,
                       const FatalityDistribution& dist);

}  // namespace diffcon
