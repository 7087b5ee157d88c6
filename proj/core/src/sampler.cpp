#include "diffcon/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "diffcon/errors.hpp"

namespace diffcon {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd random_unit_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd dir(n);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = rng.normal();
    norm = dir.norm();
  } while (norm == 0.0);
  return dir / norm;
}

// log prior 1/(1+x)^2 evaluated at x = exp(theta), including the Jacobian of
// the log transform.
double log_lomax_prior(double theta, double x) { return -2.0 * std::log1p(x) + theta; }

}  // namespace

void ChainConfig::validate() const {
  if (n_iterations <= 0) throw ConfigError("ChainConfig: n_iterations must be positive");
  if (n_burnin < 0 || n_burnin >= n_iterations)
    throw ConfigError("ChainConfig: need 0 <= n_burnin < n_iterations");
  if (thin_every < 1) throw ConfigError("ChainConfig: thin_every must be >= 1");
  if (adapt_window < 1) throw ConfigError("ChainConfig: adapt_window must be >= 1");
  if (!(target_accept_lo > 0.0 && target_accept_hi < 1.0 && target_accept_lo < target_accept_hi))
    throw ConfigError("ChainConfig: target acceptance range must sit inside (0, 1)");
  if (!(hyperprior_a > 0.0 && hyperprior_b > 0.0))
    throw ConfigError("ChainConfig: hyperprior constants must be positive");
  if (!(init_step > 0.0) || !(slice_width > 0.0))
    throw ConfigError("ChainConfig: step sizes must be positive");
  if (latent_thin < 1) throw ConfigError("ChainConfig: latent_thin must be >= 1");
}

PenaltySpec PenaltySpec::rw1(int n_basis) {
  if (n_basis < 1) throw ConfigError("PenaltySpec: empty coefficient block");
  if (n_basis == 1) return PenaltySpec{Eigen::MatrixXd::Zero(1, 1), 0};
  return PenaltySpec{rw1_penalty(n_basis), n_basis - 1};
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> thin_counts(
    const EventSeries& series, const Eigen::VectorXd& lam_d, const Eigen::VectorXd& lam_c,
    Rng& rng) {
  const int t_max = series.days();
  if (lam_d.size() != t_max || lam_c.size() != t_max)
    throw ConfigError("thin_counts: intensity length mismatch");
  std::vector<std::int64_t> yd(static_cast<std::size_t>(t_max));
  std::vector<std::int64_t> yc(static_cast<std::size_t>(t_max));
  for (int t = 0; t < t_max; ++t) {
    const std::int64_t y = series.counts[static_cast<std::size_t>(t)];
    if (y == 0) continue;
    const double total = lam_d[t] + lam_c[t];
    if (!(total > 0.0))
      throw NumericError("thin_counts: zero total intensity with events at day " +
                         std::to_string(t));
    const std::int64_t d = binomial_sample(y, lam_d[t] / total, rng);
    yd[static_cast<std::size_t>(t)] = d;
    yc[static_cast<std::size_t>(t)] = y - d;
  }
  return {std::move(yd), std::move(yc)};
}

Eigen::VectorXd update_lam_c(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu_c,
                             double sigma2, Rng& rng) {
  if (static_cast<Eigen::Index>(yc.size()) != mu_c.size())
    throw ConfigError("update_lam_c: length mismatch");
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(mu_c.size());
  for (Eigen::Index t = 0; t < mu_c.size(); ++t) {
    const double mu = mu_c[t];
    if (mu == 0.0) {
      if (yc[static_cast<std::size_t>(t)] != 0)
        throw NumericError("update_lam_c: contagion events with zero mean at day " +
                           std::to_string(t));
      continue;
    }
    const double shape = sigma2 + static_cast<double>(yc[static_cast<std::size_t>(t)]);
    const double rate = sigma2 / mu + 1.0;
    // mu below ~1e-306 overflows the rate; the draw is then indistinguishable
    // from zero but must stay positive to keep the state consistent.
    lam[t] = std::isfinite(rate) ? gamma_sample(shape, rate, rng) : 1e-300;
  }
  return lam;
}

double update_smoothing(const Eigen::VectorXd& coef, const PenaltySpec& penalty, double hyper_a,
                        double hyper_b, Rng& rng) {
  const double quad = coef.dot(penalty.matrix * coef);
  return gamma_sample(hyper_a + 0.5 * static_cast<double>(penalty.rank),
                      hyper_b + 0.5 * std::max(quad, 0.0), rng);
}

double adapt_step(double accept_frac, double step, double target_lo, double target_hi) {
  if (accept_frac > target_hi) return step * 1.25;
  if (accept_frac < target_lo) return step * 0.8;
  return step;
}

GibbsSampler::GibbsSampler(EventSeries series, DesignMatrix x, DesignMatrix w, ChainConfig config,
                           std::optional<PenaltySpec> beta_penalty,
                           std::optional<PenaltySpec> eta_penalty)
    : series_(std::move(series)),
      x_(std::move(x)),
      w_(std::move(w)),
      config_(std::move(config)),
      beta_penalty_(beta_penalty ? std::move(*beta_penalty)
                                 : PenaltySpec::rw1(static_cast<int>(x_.cols()))),
      eta_penalty_(eta_penalty ? std::move(*eta_penalty)
                               : PenaltySpec::rw1(static_cast<int>(w_.cols()))) {
  series_.validate();
  config_.validate();
  const int t_max = series_.days();
  if (t_max == 0) throw ConfigError("GibbsSampler: empty series");
  if (x_.rows() != t_max || w_.rows() != t_max)
    throw ConfigError("GibbsSampler: design matrix rows must match series length");
  if (beta_penalty_.matrix.rows() != x_.cols() || eta_penalty_.matrix.rows() != w_.cols())
    throw ConfigError("GibbsSampler: penalty size must match basis size");
  for (int t = 0; t < t_max; ++t) {
    if (series_.counts[static_cast<std::size_t>(t)] > 0) {
      event_days_.push_back(t);
      event_counts_.push_back(static_cast<double>(series_.counts[static_cast<std::size_t>(t)]));
    }
  }
}

void GibbsSampler::scatter_contagion(std::span<const double> event_delta,
                                     std::span<const double> g, Eigen::VectorXd& mu) const {
  mu.setZero();
  const std::int64_t t_max = series_.days();
  const std::int64_t horizon = static_cast<std::int64_t>(g.size());
  for (std::size_t i = 0; i < event_days_.size(); ++i) {
    const std::int64_t s = event_days_[i];
    const double w = event_delta[i] * event_counts_[i];
    const std::int64_t u_max = std::min(horizon, t_max - 1 - s);
    for (std::int64_t u = 1; u <= u_max; ++u)
      mu[s + u] += w * g[static_cast<std::size_t>(u - 1)];
  }
}

void GibbsSampler::refresh_contagion(State& state) const {
  std::vector<double> event_delta(event_days_.size());
  for (std::size_t i = 0; i < event_days_.size(); ++i)
    event_delta[i] = std::exp(state.weta[event_days_[i]]);
  state.mu_c.resize(series_.days());
  scatter_contagion(event_delta, state.g, state.mu_c);
}

GibbsSampler::State GibbsSampler::initial_state(std::optional<ModelParams> init) const {
  State st;
  if (init) {
    init->validate();
    if (init->beta.size() != x_.cols() || init->eta.size() != w_.cols())
      throw ConfigError("initial_state: init parameter dimensions do not match bases");
    st.params = *init;
  } else {
    // Moment fit: log of a smoothed daily mean projected onto the time basis.
    const int t_max = series_.days();
    const int window = std::min(91, t_max);
    Eigen::VectorXd target(t_max);
    double running = 0.0;
    int lo = 0, hi = -1;  // inclusive window bounds
    for (int t = 0; t < t_max; ++t) {
      const int want_lo = std::max(0, t - window / 2);
      const int want_hi = std::min(t_max - 1, t + window / 2);
      while (hi < want_hi) running += static_cast<double>(series_.counts[static_cast<std::size_t>(++hi)]);
      while (lo < want_lo) running -= static_cast<double>(series_.counts[static_cast<std::size_t>(lo++)]);
      const double mean = running / static_cast<double>(want_hi - want_lo + 1);
      target[t] = std::log(std::max(mean, 1e-3));
    }
    const Eigen::MatrixXd& xm = x_.values;
    Eigen::MatrixXd gram = xm.transpose() * xm;
    gram.diagonal().array() += 1e-8;
    st.params.beta = gram.ldlt().solve(xm.transpose() * target);
    st.params.eta = Eigen::VectorXd::Zero(w_.cols());
    st.params.kernel = DecayKernel{2.0, 1.0};
    st.params.sigma2 = 1.0;
    st.params.rho = 1.0;
    st.params.gamma = 1.0;
  }
  st.xb = x_.values * st.params.beta;
  st.lam_d = st.xb.array().exp();
  st.weta = w_.values * st.params.eta;
  st.g = decay_weights(st.params.kernel);
  refresh_contagion(st);
  st.latent.yd = series_.counts;
  st.latent.yc.assign(static_cast<std::size_t>(series_.days()), 0);
  st.latent.lam_c = st.mu_c;
  st.step_beta = config_.init_step;
  st.step_eta = config_.init_step;
  return st;
}

void GibbsSampler::thin(State& state, Rng& rng) const {
  auto [yd, yc] = thin_counts(series_, state.lam_d, state.latent.lam_c, rng);
  state.latent.yd = std::move(yd);
  state.latent.yc = std::move(yc);
}

void GibbsSampler::update_beta(State& state, Rng& rng) const {
  const Eigen::Index dim = state.params.beta.size();
  const std::vector<std::int64_t>& yd = state.latent.yd;
  const Eigen::Index t_max = state.xb.size();
  const double rho = state.params.rho;
  for (Eigen::Index rep = 0; rep < dim; ++rep) {
    const Eigen::VectorXd dir = random_unit_vector(dim, rng);
    const Eigen::VectorXd xd = x_.values * dir;
    const Eigen::VectorXd kb = beta_penalty_.matrix * state.params.beta;
    const double q0 = state.params.beta.dot(kb);
    const double q1 = dir.dot(kb);
    const double q2 = dir.dot(beta_penalty_.matrix * dir);
    const auto line = [&](double t) {
      double ll = 0.0;
      for (Eigen::Index i = 0; i < t_max; ++i) {
        const double lx = state.xb[i] + t * xd[i];
        if (lx > 700.0) return kNegInf;
        ll += static_cast<double>(yd[static_cast<std::size_t>(i)]) * lx - std::exp(lx);
      }
      return ll - 0.5 * rho * (q0 + t * (2.0 * q1 + t * q2));
    };
    const double t = slice_sample(line, 0.0, config_.slice_width, Interval{}, rng);
    state.params.beta += t * dir;
    state.xb += t * xd;
  }
  state.lam_d = state.xb.array().exp();
}

void GibbsSampler::update_eta(State& state, Rng& rng) const {
  const Eigen::Index dim = state.params.eta.size();
  const std::vector<std::int64_t>& yc = state.latent.yc;
  const double sigma2 = state.params.sigma2;
  const double gam = state.params.gamma;
  const std::size_t n_events = event_days_.size();
  std::vector<double> event_delta(n_events);
  Eigen::VectorXd mu_scratch(series_.days());
  for (Eigen::Index rep = 0; rep < dim; ++rep) {
    const Eigen::VectorXd dir = random_unit_vector(dim, rng);
    const Eigen::VectorXd wd = w_.values * dir;
    const Eigen::VectorXd kb = eta_penalty_.matrix * state.params.eta;
    const double q0 = state.params.eta.dot(kb);
    const double q1 = dir.dot(kb);
    const double q2 = dir.dot(eta_penalty_.matrix * dir);
    const auto line = [&](double t) {
      for (std::size_t i = 0; i < n_events; ++i) {
        const int day = event_days_[i];
        const double lx = state.weta[day] + t * wd[day];
        if (lx > 700.0) return kNegInf;
        event_delta[i] = std::exp(lx);
      }
      scatter_contagion(event_delta, state.g, mu_scratch);
      const double ll = detail::contagion_loglik_mean_part(yc, mu_scratch, sigma2);
      return ll - 0.5 * gam * (q0 + t * (2.0 * q1 + t * q2));
    };
    const double t = slice_sample(line, 0.0, config_.slice_width, Interval{}, rng);
    state.params.eta += t * dir;
    state.weta += t * wd;
  }
  refresh_contagion(state);
}

void GibbsSampler::update_phi(State& state, Rng& rng) const {
  const std::vector<std::int64_t>& yc = state.latent.yc;
  const double sigma2 = state.params.sigma2;
  const std::size_t n_events = event_days_.size();
  std::vector<double> event_delta(n_events);
  for (std::size_t i = 0; i < n_events; ++i)
    event_delta[i] = std::exp(state.weta[event_days_[i]]);
  Eigen::VectorXd mu_scratch(series_.days());

  // The prior 1/(1+phi_i)^2 applies to the unshifted kernel mean
  // (delay_mean - 1) and to the scale.
  const auto contagion_term = [&](const DecayKernel& kernel) {
    const std::vector<double> g = decay_weights(kernel);
    scatter_contagion(event_delta, g, mu_scratch);
    return detail::contagion_loglik_mean_part(yc, mu_scratch, sigma2);
  };

  const auto mean_target = [&](double theta) {
    const double phi1 = std::exp(theta);
    if (!std::isfinite(phi1) || phi1 <= 0.0) return kNegInf;
    return contagion_term(DecayKernel{1.0 + phi1, state.params.kernel.scale}) +
           log_lomax_prior(theta, phi1);
  };
  double theta = slice_sample(mean_target, std::log(state.params.kernel.delay_mean - 1.0),
                              config_.slice_width, Interval{}, rng);
  state.params.kernel = DecayKernel{1.0 + std::exp(theta), state.params.kernel.scale};

  const auto scale_target = [&](double log_scale) {
    const double scale = std::exp(log_scale);
    if (!std::isfinite(scale) || scale <= 0.0) return kNegInf;
    return contagion_term(DecayKernel{state.params.kernel.delay_mean, scale}) +
           log_lomax_prior(log_scale, scale);
  };
  theta = slice_sample(scale_target, std::log(state.params.kernel.scale), config_.slice_width,
                       Interval{}, rng);
  state.params.kernel = DecayKernel{state.params.kernel.delay_mean, std::exp(theta)};

  state.g = decay_weights(state.params.kernel);
  refresh_contagion(state);
}

void GibbsSampler::update_lam_c_state(State& state, Rng& rng) const {
  state.latent.lam_c = update_lam_c(state.latent.yc, state.mu_c, state.params.sigma2, rng);
}

void GibbsSampler::update_sigma2(State& state, Rng& rng) const {
  // The gamma layer is separable in sigma2; fold the data into four sums.
  int n_active = 0;
  double sum_log_mu = 0.0, sum_log_lam = 0.0, sum_ratio = 0.0;
  for (Eigen::Index t = 0; t < state.mu_c.size(); ++t) {
    const double mu = state.mu_c[t];
    if (mu <= 0.0) continue;
    const double lam = std::max(state.latent.lam_c[t], 1e-300);
    ++n_active;
    sum_log_mu += std::log(mu);
    sum_log_lam += std::log(lam);
    sum_ratio += lam / mu;
  }
  const auto target = [&](double theta) {
    const double s2 = std::exp(theta);
    if (!std::isfinite(s2) || s2 <= 0.0) return kNegInf;
    const double n = static_cast<double>(n_active);
    return n * (s2 * theta - std::lgamma(s2)) - s2 * sum_log_mu + (s2 - 1.0) * sum_log_lam -
           s2 * sum_ratio + log_lomax_prior(theta, s2);
  };
  const double theta =
      slice_sample(target, std::log(state.params.sigma2), config_.slice_width, Interval{}, rng);
  state.params.sigma2 = std::exp(theta);
}

void GibbsSampler::update_smoothing_params(State& state, Rng& rng) const {
  state.params.rho = update_smoothing(state.params.beta, beta_penalty_, config_.hyperprior_a,
                                      config_.hyperprior_b, rng);
  state.params.gamma = update_smoothing(state.params.eta, eta_penalty_, config_.hyperprior_a,
                                        config_.hyperprior_b, rng);
}

bool GibbsSampler::resample_identify_beta(State& state, Rng& rng) const {
  Eigen::VectorXd prop = state.params.beta;
  for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] += state.step_beta * rng.normal();
  const Eigen::VectorXd xb_prop = x_.values * prop;
  double log_accept = detail::diffusion_loglik_rate_part(state.latent.yd, xb_prop) -
                      detail::diffusion_loglik_rate_part(state.latent.yd, state.xb);
  if (config_.include_prior_in_resample) {
    const Eigen::MatrixXd& k = beta_penalty_.matrix;
    log_accept -= 0.5 * state.params.rho * (prop.dot(k * prop) - state.params.beta.dot(k * state.params.beta));
  }
  if (std::log(rng.uniform_pos()) < log_accept) {
    state.params.beta = prop;
    state.xb = xb_prop;
    state.lam_d = state.xb.array().exp();
    return true;
  }
  return false;
}

bool GibbsSampler::resample_identify_eta(State& state, Rng& rng) const {
  Eigen::VectorXd prop = state.params.eta;
  for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] += state.step_eta * rng.normal();
  const Eigen::VectorXd weta_prop = w_.values * prop;
  std::vector<double> event_delta(event_days_.size());
  bool overflow = false;
  for (std::size_t i = 0; i < event_days_.size(); ++i) {
    const double lx = weta_prop[event_days_[i]];
    if (lx > 700.0) {
      overflow = true;
      break;
    }
    event_delta[i] = std::exp(lx);
  }
  double log_accept = kNegInf;
  Eigen::VectorXd mu_prop;
  if (!overflow) {
    mu_prop.resize(series_.days());
    scatter_contagion(event_delta, state.g, mu_prop);
    log_accept =
        detail::contagion_loglik_mean_part(state.latent.yc, mu_prop, state.params.sigma2) -
        detail::contagion_loglik_mean_part(state.latent.yc, state.mu_c, state.params.sigma2);
    if (config_.include_prior_in_resample) {
      const Eigen::MatrixXd& k = eta_penalty_.matrix;
      log_accept -=
          0.5 * state.params.gamma * (prop.dot(k * prop) - state.params.eta.dot(k * state.params.eta));
    }
  }
  if (std::log(rng.uniform_pos()) < log_accept) {
    state.params.eta = prop;
    state.weta = weta_prop;
    state.mu_c = mu_prop;
    return true;
  }
  return false;
}

std::pair<bool, bool> GibbsSampler::sweep(State& state, Rng& rng) const {
  // Thinning and the coefficient blocks run first; the latent contagion
  // rates are refreshed only after the collapsed eta / phi draws so that
  // every later step conditions on rates consistent with the new values.
  thin(state, rng);
  update_beta(state, rng);
  const bool beta_accepted = resample_identify_beta(state, rng);
  update_eta(state, rng);
  const bool eta_accepted = resample_identify_eta(state, rng);
  update_phi(state, rng);
  update_lam_c_state(state, rng);
  update_sigma2(state, rng);
  update_smoothing_params(state, rng);
  return {beta_accepted, eta_accepted};
}

PosteriorDraws GibbsSampler::run(std::optional<ModelParams> init,
                                 const std::function<void(int)>& progress) const {
  PosteriorDraws out;
  out.config = config_;
  Rng rng(config_.rng_seed);
  State state = initial_state(std::move(init));

  std::int64_t win_beta_acc = 0, win_eta_acc = 0;
  int win_n = 0;
  int stored = 0;
  for (int iter = 0; iter < config_.n_iterations; ++iter) {
    const bool burnin = iter < config_.n_burnin;
    const auto [beta_acc, eta_acc] = sweep(state, rng);
    if (burnin) {
      win_beta_acc += beta_acc;
      win_eta_acc += eta_acc;
      ++win_n;
      if (win_n == config_.adapt_window) {
        state.step_beta = adapt_step(static_cast<double>(win_beta_acc) / win_n, state.step_beta,
                                     config_.target_accept_lo, config_.target_accept_hi);
        state.step_eta = adapt_step(static_cast<double>(win_eta_acc) / win_n, state.step_eta,
                                    config_.target_accept_lo, config_.target_accept_hi);
        win_beta_acc = win_eta_acc = 0;
        win_n = 0;
      }
    } else {
      ++out.accept.beta_proposed;
      ++out.accept.eta_proposed;
      out.accept.beta_accepted += beta_acc;
      out.accept.eta_accepted += eta_acc;
      if ((iter - config_.n_burnin) % config_.thin_every == 0) {
        out.params.push_back(state.params);
        if (config_.store_latents && stored % config_.latent_thin == 0)
          out.latents.push_back(state.latent);
        ++stored;
      }
    }
    if (progress && (iter + 1) % 1000 == 0) progress(iter + 1);
  }
  out.accept.step_beta = state.step_beta;
  out.accept.step_eta = state.step_eta;
  return out;
}

PosteriorDraws run_chain(const EventSeries& series, const DesignMatrix& x, const DesignMatrix& w,
                         const ChainConfig& config, std::optional<ModelParams> init,
                         const std::function<void(int)>& progress) {
  GibbsSampler sampler(series, x, w, config);
  return sampler.run(std::move(init), progress);
}

std::vector<PosteriorDraws> run_chains(const EventSeries& series, const DesignMatrix& x,
                                       const DesignMatrix& w, const ChainConfig& config,
                                       int n_chains) {
  if (n_chains < 1) throw ConfigError("run_chains: need at least one chain");
  std::vector<PosteriorDraws> out(static_cast<std::size_t>(n_chains));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  for (int c = 0; c < n_chains; ++c) {
    workers.emplace_back([&, c] {
      try {
        ChainConfig chain_config = config;
        chain_config.rng_seed = config.rng_seed + static_cast<std::uint64_t>(c);
        out[static_cast<std::size_t>(c)] = run_chain(series, x, w, chain_config);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace diffcon
