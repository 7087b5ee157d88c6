#include "diffcon/simulate.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <utility>

#include "diffcon/distributions.hpp"
#include "diffcon/errors.hpp"

namespace diffcon {

namespace {

// Global sanity cap protecting against runaway (explosive) cascades.
constexpr std::int64_t kEventBudget = 100'000'000;

// Evaluates delta(f) = exp(w(log(f+1)) eta), clamping the point into the
// basis domain. The intercept-only case short-circuits to a constant.
class DeltaOfFatalities {
 public:
  DeltaOfFatalities(const BasisSpec& spec, const Eigen::VectorXd& eta) : spec_(spec), eta_(eta) {
    if (spec_.n_basis() != eta_.size())
      throw ConfigError("delta(f): eta length does not match fatality basis");
    if (spec_.n_basis() == 1) constant_ = std::exp(eta_[0]);
  }

  double operator()(std::int64_t fatalities) const {
    if (constant_) return *constant_;
    double point = std::log1p(static_cast<double>(fatalities));
    point = std::clamp(point, spec_.lo, spec_.hi);
    const DesignMatrix row = build_basis(spec_, std::span<const double>{&point, 1});
    return std::exp(row.values.row(0).dot(eta_));
  }

 private:
  BasisSpec spec_;
  Eigen::VectorXd eta_;
  std::optional<double> constant_;
};

std::int64_t geometric_sample(double p, Rng& rng) {
  // Inverse CDF of the geometric on {0, 1, ...}.
  if (p >= 1.0) return 0;
  return static_cast<std::int64_t>(std::floor(std::log(rng.uniform_pos()) / std::log1p(-p)));
}

}  // namespace

void FatalityDistribution::validate() const {
  if (table) {
    if (table->empty()) throw ConfigError("FatalityDistribution: empty table");
    double total = 0.0;
    for (double p : *table) {
      if (!(p >= 0.0)) throw ConfigError("FatalityDistribution: negative table entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw ConfigError("FatalityDistribution: table mass must sum to 1");
    return;
  }
  if (!(zero_inflation >= 0.0 && zero_inflation < 1.0))
    throw ConfigError("FatalityDistribution: zero_inflation must lie in [0, 1)");
  if (!(geometric_p > 0.0 && geometric_p <= 1.0))
    throw ConfigError("FatalityDistribution: geometric_p must lie in (0, 1]");
}

std::int64_t FatalityDistribution::sample(Rng& rng) const {
  if (table) {
    double u = rng.uniform();
    double total = std::accumulate(table->begin(), table->end(), 0.0);
    u *= total;
    for (std::size_t k = 0; k < table->size(); ++k) {
      u -= (*table)[k];
      if (u < 0.0) return static_cast<std::int64_t>(k);
    }
    return static_cast<std::int64_t>(table->size() - 1);
  }
  if (rng.uniform() < zero_inflation) return 0;
  return geometric_sample(geometric_p, rng);
}

double FatalityDistribution::expected(const std::function<double(std::int64_t)>& h) const {
  double mass = 0.0, acc = 0.0;
  if (table) {
    for (std::size_t k = 0; k < table->size(); ++k) {
      mass += (*table)[k];
      acc += (*table)[k] * h(static_cast<std::int64_t>(k));
    }
    return acc / mass;
  }
  double remaining = 1.0;
  for (std::int64_t k = 0;; ++k) {
    const double pk = (k == 0 ? zero_inflation : 0.0) +
                      (1.0 - zero_inflation) * geometric_p * std::pow(1.0 - geometric_p, static_cast<double>(k));
    mass += pk;
    acc += pk * h(k);
    remaining = 1.0 - mass;
    if (remaining < 1e-12) break;
  }
  return acc / mass;
}

SimConfig SimConfig::constant_rates(int days, double baseline_rate, double delta,
                                    const DecayKernel& kernel, double sigma2) {
  if (!(baseline_rate > 0.0)) throw ConfigError("constant_rates: baseline rate must be positive");
  if (!(delta > 0.0)) throw ConfigError("constant_rates: delta must be positive");
  SimConfig config;
  config.days = days;
  config.time_basis = BasisSpec::constant(0.0, std::max(1.0, static_cast<double>(days - 1)));
  config.fatality_basis = BasisSpec::constant(0.0, 1.0);
  config.params.beta = Eigen::VectorXd::Constant(1, std::log(baseline_rate));
  config.params.eta = Eigen::VectorXd::Constant(1, std::log(delta));
  config.params.kernel = kernel;
  config.params.sigma2 = sigma2;
  return config;
}

void SimConfig::validate() const {
  if (days < 1) throw ConfigError("SimConfig: days must be >= 1");
  params.validate();
  fatalities.validate();
  time_basis.validate();
  fatality_basis.validate();
  if (params.beta.size() != time_basis.n_basis())
    throw ConfigError("SimConfig: beta length does not match time basis");
  if (params.eta.size() != fatality_basis.n_basis())
    throw ConfigError("SimConfig: eta length does not match fatality basis");
  if (time_basis.lo > 0.0 || time_basis.hi < static_cast<double>(days - 1))
    throw ConfigError("SimConfig: time basis domain must cover [0, days-1]");
}

namespace {

Eigen::VectorXd daily_diffusion_rate(const SimConfig& config) {
  std::vector<double> points(static_cast<std::size_t>(config.days));
  for (int t = 0; t < config.days; ++t) points[static_cast<std::size_t>(t)] = static_cast<double>(t);
  const DesignMatrix x = build_basis(config.time_basis, points);
  return diffusion_rate(config.params.beta, x);
}

SimResult finalize(const SimConfig& config, std::vector<SimEvent> events, SimTruth truth) {
  SimResult out;
  out.series.start = config.start_date;
  out.series.counts.assign(static_cast<std::size_t>(config.days), 0);
  out.series.fatalities.assign(static_cast<std::size_t>(config.days), 0);
  for (const SimEvent& e : events) {
    ++out.series.counts[static_cast<std::size_t>(e.day)];
    out.series.fatalities[static_cast<std::size_t>(e.day)] += e.fatalities;
  }
  out.events = std::move(events);
  if (config.record_truth) out.truth = std::move(truth);
  out.series.validate();
  return out;
}

}  // namespace

SimResult simulate_hierarchical(const SimConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  const int t_max = config.days;
  const Eigen::VectorXd lam_d = daily_diffusion_rate(config);
  const DeltaOfFatalities delta(config.fatality_basis, config.params.eta);
  const std::vector<double> g = decay_weights(config.params.kernel);
  const std::int64_t horizon = static_cast<std::int64_t>(g.size());
  const double sigma2 = config.params.sigma2;

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(t_max);
  SimTruth truth;
  truth.yd.assign(static_cast<std::size_t>(t_max), 0);
  truth.yc.assign(static_cast<std::size_t>(t_max), 0);
  truth.lam_c = Eigen::VectorXd::Zero(t_max);
  std::vector<SimEvent> events;
  std::int64_t total = 0;

  for (int t = 0; t < t_max; ++t) {
    double lam_c = 0.0;
    if (mu[t] > 0.0) {
      const double rate = sigma2 / mu[t];
      // A non-finite rate means sigma2 dwarfs mu: the gamma collapses on mu.
      lam_c = std::isfinite(rate) ? gamma_sample(sigma2, rate, rng) : mu[t];
    }
    const std::int64_t yc = lam_c > 0.0 ? poisson_sample(lam_c, rng) : 0;
    const std::int64_t yd = poisson_sample(lam_d[t], rng);
    truth.yd[static_cast<std::size_t>(t)] = yd;
    truth.yc[static_cast<std::size_t>(t)] = yc;
    truth.lam_c[t] = lam_c;

    const std::int64_t y = yd + yc;
    total += y;
    if (total > kEventBudget)
      throw NumericError("simulate_hierarchical: event budget exceeded (runaway cascade)");
    std::int64_t day_fatalities = 0;
    for (std::int64_t e = 0; e < y; ++e) {
      const std::int64_t f = config.fatalities.sample(rng);
      day_fatalities += f;
      events.push_back(SimEvent{t, f});
    }
    if (y > 0) {
      const double w = delta(day_fatalities) * static_cast<double>(y);
      const std::int64_t u_max = std::min<std::int64_t>(horizon, t_max - 1 - t);
      for (std::int64_t u = 1; u <= u_max; ++u) mu[t + u] += w * g[static_cast<std::size_t>(u - 1)];
    }
  }
  return finalize(config, std::move(events), std::move(truth));
}

SimResult simulate_branching(const SimConfig& config) {
  config.validate();
  const double ratio = branching_ratio(config.params, config.fatality_basis, config.fatalities);
  if (ratio >= 1.0 && !config.allow_explosive)
    throw ExplosiveRegimeError(
        "simulate_branching: branching ratio " + std::to_string(ratio) +
        " >= 1 (non-stationary regime); pass allow_explosive to simulate anyway");

  Rng rng(config.rng_seed);
  const int t_max = config.days;
  const Eigen::VectorXd lam_d = daily_diffusion_rate(config);
  const DeltaOfFatalities delta(config.fatality_basis, config.params.eta);
  const NegBinomMeanScale delay_nb = config.params.kernel.underlying();
  const double sigma2 = config.params.sigma2;

  std::vector<SimEvent> events;
  SimTruth truth;
  truth.yd.assign(static_cast<std::size_t>(t_max), 0);
  truth.yc.assign(static_cast<std::size_t>(t_max), 0);
  truth.lam_c = Eigen::VectorXd::Zero(t_max);

  std::deque<std::int64_t> queue;
  for (int t = 0; t < t_max; ++t) {
    const std::int64_t n = poisson_sample(lam_d[t], rng);
    truth.yd[static_cast<std::size_t>(t)] += n;
    for (std::int64_t e = 0; e < n; ++e) {
      events.push_back(SimEvent{t, config.fatalities.sample(rng)});
      truth.parent.push_back(-1);
      queue.push_back(static_cast<std::int64_t>(events.size()) - 1);
    }
  }

  while (!queue.empty()) {
    const std::int64_t parent_idx = queue.front();
    queue.pop_front();
    const SimEvent parent = events[static_cast<std::size_t>(parent_idx)];
    const double mean_children = delta(parent.fatalities);
    if (!(mean_children > 0.0)) continue;
    const std::int64_t n_children = negbinom_sample(NegBinomMeanScale{mean_children, sigma2}, rng);
    for (std::int64_t c = 0; c < n_children; ++c) {
      const std::int64_t lag = 1 + negbinom_sample(delay_nb, rng);
      const std::int64_t day = parent.day + lag;
      if (day >= t_max) continue;  // beyond the horizon
      events.push_back(SimEvent{static_cast<int>(day), config.fatalities.sample(rng)});
      truth.parent.push_back(parent_idx);
      truth.yc[static_cast<std::size_t>(day)] += 1;
      queue.push_back(static_cast<std::int64_t>(events.size()) - 1);
      if (static_cast<std::int64_t>(events.size()) > kEventBudget)
        throw NumericError("simulate_branching: event budget exceeded (runaway cascade)");
    }
  }
  return finalize(config, std::move(events), std::move(truth));
}

double branching_ratio(const ModelParams& params, const BasisSpec& fatality_basis,
                       const FatalityDistribution& dist) {
  params.validate();
  dist.validate();
  const DeltaOfFatalities delta(fatality_basis, params.eta);
  return dist.expected([&](std::int64_t f) { return delta(f); });
}

}  // namespace diffcon
