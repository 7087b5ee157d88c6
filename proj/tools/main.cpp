// diffcon: simulate, fit, and summarize daily event-count series under the
// diffusion + contagion convolution model.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "diffcon/data.hpp"
#include "diffcon/errors.hpp"
#include "diffcon/sampler.hpp"
#include "diffcon/simulate.hpp"
#include "diffcon/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  // Shared
  std::uint64_t seed = 1;
  std::string input;
  std::string outdir = "out";
  std::string country;
  std::string window;  // "START:END" (ISO dates, inclusive)

  // fit
  int iters = 20000;
  int burnin = 5000;
  int thin = 5;
  int chains = 4;
  int fatality_knots = 7;
  double hyper_a = 1.0;
  double hyper_b = 0.005;
  bool include_prior_in_resample = false;
  bool store_latents = true;
  int latent_thin = 10;

  // simulate
  int days = 1000;
  double baseline_rate = 0.3;
  double delta = 0.6;
  double delay_mean = 2.0;
  double kernel_scale = 1.5;
  double sigma2 = 2.0;
  std::string mode = "hierarchical";  // or "branching"
  bool allow_explosive = false;
  bool record_truth = true;
  std::string start_date = "2000-01-01";
  std::string country_tag = "SIM";
  double zero_inflation = 0.25;
  double geometric_p = 0.2;

  // basis-dump
  std::string which = "time";
};

template <typename T>
void from_json_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw diffcon::ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw diffcon::ConfigError("config file " + path + ": " + e.what());
  }
  RunConfig c;
  from_json_if(j, "seed", c.seed);
  from_json_if(j, "input", c.input);
  from_json_if(j, "outdir", c.outdir);
  from_json_if(j, "country", c.country);
  from_json_if(j, "window", c.window);
  from_json_if(j, "iters", c.iters);
  from_json_if(j, "burnin", c.burnin);
  from_json_if(j, "thin", c.thin);
  from_json_if(j, "chains", c.chains);
  from_json_if(j, "fatality_knots", c.fatality_knots);
  from_json_if(j, "hyper_a", c.hyper_a);
  from_json_if(j, "hyper_b", c.hyper_b);
  from_json_if(j, "include_prior_in_resample", c.include_prior_in_resample);
  from_json_if(j, "store_latents", c.store_latents);
  from_json_if(j, "latent_thin", c.latent_thin);
  from_json_if(j, "days", c.days);
  from_json_if(j, "baseline_rate", c.baseline_rate);
  from_json_if(j, "delta", c.delta);
  from_json_if(j, "delay_mean", c.delay_mean);
  from_json_if(j, "kernel_scale", c.kernel_scale);
  from_json_if(j, "sigma2", c.sigma2);
  from_json_if(j, "mode", c.mode);
  from_json_if(j, "allow_explosive", c.allow_explosive);
  from_json_if(j, "record_truth", c.record_truth);
  from_json_if(j, "start_date", c.start_date);
  from_json_if(j, "country_tag", c.country_tag);
  from_json_if(j, "zero_inflation", c.zero_inflation);
  from_json_if(j, "geometric_p", c.geometric_p);
  from_json_if(j, "which", c.which);
  return c;
}

json config_echo(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["input"] = c.input;
  j["outdir"] = c.outdir;
  j["country"] = c.country;
  j["window"] = c.window;
  j["iters"] = c.iters;
  j["burnin"] = c.burnin;
  j["thin"] = c.thin;
  j["chains"] = c.chains;
  j["fatality_knots"] = c.fatality_knots;
  j["hyper_a"] = c.hyper_a;
  j["hyper_b"] = c.hyper_b;
  j["include_prior_in_resample"] = c.include_prior_in_resample;
  j["store_latents"] = c.store_latents;
  j["latent_thin"] = c.latent_thin;
  j["days"] = c.days;
  j["baseline_rate"] = c.baseline_rate;
  j["delta"] = c.delta;
  j["delay_mean"] = c.delay_mean;
  j["kernel_scale"] = c.kernel_scale;
  j["sigma2"] = c.sigma2;
  j["mode"] = c.mode;
  j["allow_explosive"] = c.allow_explosive;
  j["record_truth"] = c.record_truth;
  j["start_date"] = c.start_date;
  j["country_tag"] = c.country_tag;
  j["zero_inflation"] = c.zero_inflation;
  j["geometric_p"] = c.geometric_p;
  j["which"] = c.which;
  return j;
}

std::optional<diffcon::DateWindow> parse_window(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw diffcon::ConfigError("window must be START:END, got '" + spec + "'");
  const auto start = diffcon::parse_date(spec.substr(0, colon));
  const auto end = diffcon::parse_date(spec.substr(colon + 1));
  if (!start || !end)
    throw diffcon::ConfigError("window must hold ISO dates, got '" + spec + "'");
  if (*end < *start) throw diffcon::ConfigError("window end precedes start");
  return diffcon::DateWindow{*start, *end};
}

json basis_to_json(const diffcon::BasisSpec& spec) {
  json j;
  j["degree"] = spec.degree;
  j["lo"] = spec.lo;
  j["hi"] = spec.hi;
  j["interior_knots"] = spec.interior_knots;
  return j;
}

void write_metadata(const fs::path& path, const json& body) {
  std::ofstream out(path);
  if (!out) throw diffcon::DataError("cannot write " + path.string());
  out << body.dump(2) << "\n";
}

diffcon::SimConfig sim_config_from(const RunConfig& c) {
  diffcon::SimConfig sim = diffcon::SimConfig::constant_rates(
      c.days, c.baseline_rate, c.delta, diffcon::DecayKernel{c.delay_mean, c.kernel_scale},
      c.sigma2);
  sim.rng_seed = c.seed;
  sim.allow_explosive = c.allow_explosive;
  sim.record_truth = c.record_truth;
  sim.country_tag = c.country_tag;
  sim.fatalities.zero_inflation = c.zero_inflation;
  sim.fatalities.geometric_p = c.geometric_p;
  const auto start = diffcon::parse_date(c.start_date);
  if (!start) throw diffcon::ConfigError("bad start_date: " + c.start_date);
  sim.start_date = *start;
  return sim;
}

int cmd_simulate(const RunConfig& c) {
  const diffcon::SimConfig sim = sim_config_from(c);
  const double ratio = diffcon::branching_ratio(sim.params, sim.fatality_basis, sim.fatalities);
  const diffcon::SimResult result =
      c.mode == "branching" ? diffcon::simulate_branching(sim) : diffcon::simulate_hierarchical(sim);

  fs::create_directories(c.outdir);
  diffcon::write_events_csv((fs::path(c.outdir) / "events.csv").string(), result.events,
                            result.series.start, sim.country_tag);
  if (c.record_truth)
    diffcon::write_truth_csv((fs::path(c.outdir) / "truth.csv").string(), result);

  json meta;
  meta["version"] = diffcon::kVersion;
  meta["command"] = "simulate";
  meta["config"] = config_echo(c);
  meta["branching_ratio"] = ratio;
  meta["n_events"] = result.events.size();
  write_metadata(fs::path(c.outdir) / "run_metadata.json", meta);
  return 0;
}

int cmd_fit(const RunConfig& c) {
  if (c.input.empty()) throw diffcon::ConfigError("fit requires --input");
  if (c.chains < 1) throw diffcon::ConfigError("need at least one chain");

  diffcon::IngestReport report;
  const diffcon::EventSeries series =
      diffcon::ingest_csv(c.input, c.country, parse_window(c.window), &report);
  const auto [x, w] = diffcon::build_covariates(series, c.fatality_knots);

  diffcon::ChainConfig chain_config;
  chain_config.n_iterations = c.iters;
  chain_config.n_burnin = c.burnin;
  chain_config.thin_every = c.thin;
  chain_config.hyperprior_a = c.hyper_a;
  chain_config.hyperprior_b = c.hyper_b;
  chain_config.include_prior_in_resample = c.include_prior_in_resample;
  chain_config.store_latents = c.store_latents;
  chain_config.latent_thin = c.latent_thin;
  chain_config.validate();

  std::vector<diffcon::PosteriorDraws> chains(static_cast<std::size_t>(c.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(c.chains));
  std::vector<std::thread> workers;
  for (int i = 0; i < c.chains; ++i) {
    workers.emplace_back([&, i] {
      try {
        diffcon::ChainConfig cc = chain_config;
        cc.rng_seed = c.seed + static_cast<std::uint64_t>(i);
        std::function<void(int)> progress;
        if (i == 0)
          progress = [&cc](int iter) {
            std::fprintf(stderr, "chain 0: iteration %d/%d\n", iter, cc.n_iterations);
          };
        chains[static_cast<std::size_t>(i)] = diffcon::run_chain(series, x, w, cc, {}, progress);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  fs::create_directories(c.outdir);
  const fs::path out(c.outdir);
  for (int i = 0; i < c.chains; ++i)
    diffcon::write_draws_csv((out / ("chain_" + std::to_string(i) + "_draws.csv")).string(),
                             chains[static_cast<std::size_t>(i)]);

  std::vector<diffcon::ModelParams> pooled;
  for (const auto& chain : chains)
    pooled.insert(pooled.end(), chain.params.begin(), chain.params.end());
  const std::vector<double> grid = diffcon::default_fatality_grid(series);
  const diffcon::PosteriorSummary summary = diffcon::summarize(pooled, series, x, w, grid);
  diffcon::write_curve_csv((out / "lambda_d_curve.csv").string(), summary.lambda_d);
  diffcon::write_curve_csv((out / "delta_curve.csv").string(), summary.delta);
  diffcon::write_curve_csv((out / "decay_curve.csv").string(), summary.decay);
  diffcon::write_decay_summary_csv((out / "decay_summary.csv").string(), summary);

  if (c.store_latents) {
    const std::vector<double> fractions = diffcon::attribution_summary(chains, series);
    diffcon::write_attribution_csv((out / "attribution.csv").string(), series, fractions);
  }

  json meta;
  meta["version"] = diffcon::kVersion;
  meta["command"] = "fit";
  meta["config"] = config_echo(c);
  meta["time_basis"] = basis_to_json(x.spec);
  meta["fatality_basis"] = basis_to_json(w.spec);
  meta["series_days"] = series.days();
  meta["series_start"] = diffcon::format_date(series.start);
  json seeds = json::array();
  for (int i = 0; i < c.chains; ++i) seeds.push_back(c.seed + static_cast<std::uint64_t>(i));
  meta["chain_seeds"] = seeds;
  json ingest;
  ingest["rows_parsed"] = report.rows_parsed;
  ingest["events_in_window"] = report.events_in_window;
  ingest["dropped_by_filter"] = report.dropped_by_filter;
  ingest["dropped_outside_window"] = report.dropped_outside_window;
  ingest["dropped_unknown_date"] = report.dropped_unknown_date;
  ingest["imputed_fatalities"] = report.imputed_fatalities;
  meta["ingest_report"] = ingest;
  json accept = json::array();
  for (const auto& chain : chains) {
    json a;
    a["beta_rate"] = chain.accept.beta_rate();
    a["eta_rate"] = chain.accept.eta_rate();
    a["step_beta"] = chain.accept.step_beta;
    a["step_eta"] = chain.accept.step_eta;
    accept.push_back(a);
  }
  meta["acceptance"] = accept;
  meta["explosive_flag"] = summary.explosive_flag;
  meta["notes"] = json::array(
      {"contagion history before the first observed day is zero, so early days lean toward diffusion",
       "fatality-basis domain fitted to the observed log(fatalities+1) range"});
  write_metadata(out / "run_metadata.json", meta);

  if (c.chains >= 2) {
    const diffcon::Diagnostics diag = diffcon::ess_and_diagnostics(chains);
    diffcon::write_diagnostics_report((out / "diagnostics.txt").string(), diag);
  } else {
    std::ofstream d(out / "diagnostics.txt");
    d << "single chain: R-hat unavailable (rerun with --chains >= 2)\n";
  }
  return 0;
}

int cmd_summarize(const RunConfig& c) {
  const fs::path out(c.outdir);
  const fs::path meta_path = out / "run_metadata.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw diffcon::DataError("missing " + meta_path.string() + " (run fit first)");
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw diffcon::DataError(meta_path.string() + ": " + e.what());
  }

  RunConfig fit_config = c;
  if (meta.contains("config")) {
    const json& j = meta["config"];
    if (c.input.empty()) from_json_if(j, "input", fit_config.input);
    if (c.country.empty()) from_json_if(j, "country", fit_config.country);
    if (c.window.empty()) from_json_if(j, "window", fit_config.window);
    from_json_if(j, "fatality_knots", fit_config.fatality_knots);
    from_json_if(j, "chains", fit_config.chains);
  }
  if (fit_config.input.empty()) throw diffcon::ConfigError("summarize requires --input");

  const diffcon::EventSeries series =
      diffcon::ingest_csv(fit_config.input, fit_config.country, parse_window(fit_config.window));
  const auto [x, w] = diffcon::build_covariates(series, fit_config.fatality_knots);

  std::vector<diffcon::ModelParams> pooled;
  int n_chains = 0;
  for (int i = 0; i < fit_config.chains; ++i) {
    const fs::path p = out / ("chain_" + std::to_string(i) + "_draws.csv");
    if (!fs::exists(p)) break;
    const std::vector<diffcon::ModelParams> chain = diffcon::read_draws_csv(p.string());
    pooled.insert(pooled.end(), chain.begin(), chain.end());
    ++n_chains;
  }
  if (n_chains == 0) throw diffcon::DataError("no chain draw files under " + c.outdir);

  const std::vector<double> grid = diffcon::default_fatality_grid(series);
  const diffcon::PosteriorSummary summary = diffcon::summarize(pooled, series, x, w, grid);
  diffcon::write_curve_csv((out / "lambda_d_curve.csv").string(), summary.lambda_d);
  diffcon::write_curve_csv((out / "delta_curve.csv").string(), summary.delta);
  diffcon::write_curve_csv((out / "decay_curve.csv").string(), summary.decay);
  diffcon::write_decay_summary_csv((out / "decay_summary.csv").string(), summary);
  return 0;
}

int cmd_basis_dump(const RunConfig& c) {
  diffcon::BasisSpec spec;
  std::vector<double> points;
  if (c.which == "time") {
    spec = diffcon::default_time_spec(c.days);
    points.resize(static_cast<std::size_t>(c.days));
    for (int t = 0; t < c.days; ++t) points[static_cast<std::size_t>(t)] = t;
  } else if (c.which == "fatality") {
    if (c.input.empty())
      throw diffcon::ConfigError("basis-dump --which fatality requires --input");
    const diffcon::EventSeries series =
        diffcon::ingest_csv(c.input, c.country, parse_window(c.window));
    const auto [x, w] = diffcon::build_covariates(series, c.fatality_knots);
    spec = w.spec;
    for (std::int64_t f : series.fatalities) points.push_back(std::log1p(static_cast<double>(f)));
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
  } else {
    throw diffcon::ConfigError("basis-dump --which must be 'time' or 'fatality'");
  }

  const diffcon::DesignMatrix m = diffcon::build_basis(spec, points);
  fs::create_directories(c.outdir);
  const fs::path path = fs::path(c.outdir) / "basis.csv";
  std::ofstream out(path);
  if (!out) throw diffcon::DataError("cannot write " + path.string());
  out << "point";
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << "," << j;
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << diffcon::format_number(points[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << "," << diffcon::format_number(m.values(i, j));
    out << "\n";
  }
  return 0;
}

void bind_common(CLI::App* cmd, RunConfig& c) {
  static std::string config_path_sink;  // value consumed by the argv pre-scan
  cmd->add_option("--config", config_path_sink, "JSON config file (flags override it)");
  cmd->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--input", c.input, "Input events CSV (date,nkill,country)");
  cmd->add_option("--outdir", c.outdir, "Output directory")->capture_default_str();
  cmd->add_option("--country", c.country, "Country filter (exact match)");
  cmd->add_option("--window", c.window, "Analysis window START:END (ISO dates, inclusive)");
}

}  // namespace

int main(int argc, char** argv) {
  // A config file supplies defaults; explicit flags override it.
  RunConfig c;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        c = load_config_file(argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }

  CLI::App app{"Bayesian diffusion + contagion model for daily event counts"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic event series");
  bind_common(sim, c);
  sim->add_option("--days", c.days, "Series length in days")->capture_default_str();
  sim->add_option("--baseline-rate", c.baseline_rate, "Constant diffusion rate per day")
      ->capture_default_str();
  sim->add_option("--delta", c.delta, "Constant volatility (expected children per event)")
      ->capture_default_str();
  sim->add_option("--delay-mean", c.delay_mean, "Decay kernel expected delay (days)")
      ->capture_default_str();
  sim->add_option("--kernel-scale", c.kernel_scale, "Decay kernel scale")->capture_default_str();
  sim->add_option("--sigma2", c.sigma2, "Contagion scale sigma^2")->capture_default_str();
  sim->add_option("--mode", c.mode, "Generator: hierarchical or branching")->capture_default_str();
  sim->add_flag("--allow-explosive", c.allow_explosive, "Permit branching ratio >= 1");
  sim->add_flag(
      "--no-truth", [&c](std::int64_t) { c.record_truth = false; }, "Skip the ground-truth CSV");
  sim->add_option("--start-date", c.start_date, "First day (ISO date)")->capture_default_str();
  sim->add_option("--country-tag", c.country_tag, "Country column value")->capture_default_str();

  CLI::App* fit = app.add_subcommand("fit", "Run the MCMC sampler on an event series");
  bind_common(fit, c);
  fit->add_option("--iters", c.iters, "Iterations per chain")->capture_default_str();
  fit->add_option("--burnin", c.burnin, "Burn-in iterations")->capture_default_str();
  fit->add_option("--thin", c.thin, "Thinning interval")->capture_default_str();
  fit->add_option("--chains", c.chains, "Number of chains (seeds seed, seed+1, ...)")
      ->capture_default_str();
  fit->add_option("--fatality-knots", c.fatality_knots, "Interior knots of the fatality basis")
      ->capture_default_str();
  fit->add_flag("--prior-in-resample", c.include_prior_in_resample,
                "Include the prior ratio in the resampling accept step");
  fit->add_flag(
      "--no-latents", [&c](std::int64_t) { c.store_latents = false; },
      "Do not store latent states (saves memory; skips attribution.csv)");

  CLI::App* summ = app.add_subcommand("summarize", "Rebuild posterior summaries from stored draws");
  bind_common(summ, c);

  CLI::App* dump = app.add_subcommand("basis-dump", "Write an evaluated design matrix as CSV");
  bind_common(dump, c);
  dump->add_option("--days", c.days, "Days for the time basis")->capture_default_str();
  dump->add_option("--which", c.which, "Basis to dump: time or fatality")->capture_default_str();
  dump->add_option("--fatality-knots", c.fatality_knots, "Interior knots of the fatality basis")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(c);
    if (fit->parsed()) return cmd_fit(c);
    if (summ->parsed()) return cmd_summarize(c);
    if (dump->parsed()) return cmd_basis_dump(c);
  } catch (const diffcon::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const diffcon::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
