#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "diffcon/basis.hpp"
#include "diffcon/distributions.hpp"
#include "diffcon/model.hpp"

namespace diffcon {

// Per-day partition of the observed counts and the latent contagion rates.
struct LatentState {
  std::vector<std::int64_t> yd;
  std::vector<std::int64_t> yc;
  Eigen::VectorXd lam_c;
};

struct ChainConfig {
  int n_iterations = 20000;
  int n_burnin = 5000;
  int thin_every = 5;
  std::uint64_t rng_seed = 1;
  // Resampling-step adaptation (burn-in only).
  int adapt_window = 50;
  double target_accept_lo = 0.20;
  double target_accept_hi = 0.40;
  double init_step = 0.1;
  // Gamma hyperprior for the smoothing parameters rho and gamma.
  double hyperprior_a = 1.0;
  double hyperprior_b = 0.005;
  // The printed scheme accepts on the likelihood ratio alone; this switch
  // adds the prior ratio for comparison runs.
  bool include_prior_in_resample = false;
  bool store_latents = true;
  int latent_thin = 10;  // extra thinning factor on stored latent states
  double slice_width = 1.0;

  void validate() const;
};

struct AcceptStats {
  std::int64_t beta_proposed = 0;
  std::int64_t beta_accepted = 0;
  std::int64_t eta_proposed = 0;
  std::int64_t eta_accepted = 0;
  double step_beta = 0.0;
  double step_eta = 0.0;

  double beta_rate() const {
    return beta_proposed ? static_cast<double>(beta_accepted) / static_cast<double>(beta_proposed) : 0.0;
  }
  double eta_rate() const {
    return eta_proposed ? static_cast<double>(eta_accepted) / static_cast<double>(eta_proposed) : 0.0;
  }
};

struct PosteriorDraws {
  std::vector<ModelParams> params;
  std::vector<LatentState> latents;  // possibly thinned further than params
  AcceptStats accept;
  ChainConfig config;
};

// Quadratic penalty with its rank (rank enters the smoothing conjugate draw).
struct PenaltySpec {
  Eigen::MatrixXd matrix;
  int rank = 0;

  // RW1 penalty of the given size; a single coefficient gets a zero penalty
  // (no differences to shrink).
  static PenaltySpec rw1(int n_basis);
};

// Binomial thinning of each day's total into diffusion and contagion parts.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> thin_counts(
    const EventSeries& series, const Eigen::VectorXd& lam_d, const Eigen::VectorXd& lam_c,
    Rng& rng);

// Conjugate draw of the latent contagion rates:
// lam_c_t ~ Ga(sigma2 + yc_t, sigma2 / mu_t + 1), zero where mu_t = 0.
Eigen::VectorXd update_lam_c(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu_c,
                             double sigma2, Rng& rng);

// Conjugate draw of a smoothing parameter:
// Ga(a + rank/2, b + coef' K coef / 2).
double update_smoothing(const Eigen::VectorXd& coef, const PenaltySpec& penalty, double hyper_a,
                        double hyper_b, Rng& rng);

// Multiplicative step-size tuner for the resampling move (burn-in only).
double adapt_step(double accept_frac, double step, double target_lo = 0.20,
                  double target_hi = 0.40);

class GibbsSampler {
 public:
  GibbsSampler(EventSeries series, DesignMatrix x, DesignMatrix w, ChainConfig config,
               std::optional<PenaltySpec> beta_penalty = {},
               std::optional<PenaltySpec> eta_penalty = {});

  struct State {
    ModelParams params;
    LatentState latent;
    // Caches consistent with params.
    Eigen::VectorXd xb;      // X beta
    Eigen::VectorXd lam_d;   // exp(X beta)
    Eigen::VectorXd weta;    // W eta
    Eigen::VectorXd mu_c;    // contagion mean under current eta, kernel
    std::vector<double> g;   // decay weights to the kernel horizon
    double step_beta = 0.1;
    double step_eta = 0.1;
  };

  State initial_state(std::optional<ModelParams> init = {}) const;

  void thin(State& state, Rng& rng) const;
  void update_beta(State& state, Rng& rng) const;
  void update_eta(State& state, Rng& rng) const;
  void update_phi(State& state, Rng& rng) const;
  void update_lam_c_state(State& state, Rng& rng) const;
  void update_sigma2(State& state, Rng& rng) const;
  void update_smoothing_params(State& state, Rng& rng) const;
  bool resample_identify_beta(State& state, Rng& rng) const;
  bool resample_identify_eta(State& state, Rng& rng) const;

  // One full sweep. Returns {beta accepted, eta accepted} from the
  // identifiability resampling moves.
  std::pair<bool, bool> sweep(State& state, Rng& rng) const;

  PosteriorDraws run(std::optional<ModelParams> init = {},
                     const std::function<void(int)>& progress = {}) const;

  const EventSeries& series() const { return series_; }
  const DesignMatrix& x() const { return x_; }
  const DesignMatrix& w() const { return w_; }
  const ChainConfig& config() const { return config_; }
  const PenaltySpec& beta_penalty() const { return beta_penalty_; }
  const PenaltySpec& eta_penalty() const { return eta_penalty_; }

 private:
  EventSeries series_;
  DesignMatrix x_;
  DesignMatrix w_;
  ChainConfig config_;
  PenaltySpec beta_penalty_;
  PenaltySpec eta_penalty_;
  std::vector<int> event_days_;
  std::vector<double> event_counts_;

  void scatter_contagion(std::span<const double> event_delta, std::span<const double> g,
                         Eigen::VectorXd& mu) const;
  void refresh_contagion(State& state) const;
};

// Runs the full Gibbs scheme on one chain. Deterministic given the seed.
PosteriorDraws run_chain(const EventSeries& series, const DesignMatrix& x, const DesignMatrix& w,
                         const ChainConfig& config, std::optional<ModelParams> init = {},
                         const std::function<void(int)>& progress = {});

// Runs n_chains chains concurrently with seeds seed, seed+1, ...
std::vector<PosteriorDraws> run_chains(const EventSeries& series, const DesignMatrix& x,
                                       const DesignMatrix& w, const ChainConfig& config,
                                       int n_chains);

}  // namespace diffcon
