#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

#include "diffcon/data.hpp"
#include "diffcon/errors.hpp"
#include "support/stats.hpp"

using namespace diffcon;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("data");

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("diffcon_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const TempDir& dir, const std::string& name, const std::string& body) {
  const std::string p = dir.file(name);
  std::ofstream out(p);
  out << body;
  return p;
}

DesignMatrix intercept_design(int t_max) {
  std::vector<double> pts(static_cast<std::size_t>(t_max));
  for (int t = 0; t < t_max; ++t) pts[static_cast<std::size_t>(t)] = static_cast<double>(t);
  return build_basis(BasisSpec::constant(0.0, static_cast<double>(std::max(1, t_max - 1))), pts);
}

ModelParams constant_params(double lam, double delta, DecayKernel kern, double sigma2) {
  ModelParams p;
  p.beta = Eigen::VectorXd::Constant(1, std::log(lam));
  p.eta = Eigen::VectorXd::Constant(1, std::log(delta));
  p.kernel = kern;
  p.sigma2 = sigma2;
  return p;
}

}  // namespace

TEST_CASE("date round trip") {
  const auto d = parse_date("2004-05-01");
  REQUIRE(d.has_value());
  CHECK(format_date(*d) == "2004-05-01");
  CHECK(!parse_date("2004-13-01").has_value());
  CHECK(!parse_date("garbage").has_value());
}

TEST_CASE("ingest aggregates events onto a daily grid") {
  TempDir dir;
  const std::string path = write_file(dir, "events.csv",
                                      "date,nkill,country\n"
                                      "2004-05-01,3,Testland\n"
                                      "2004-05-01,0,Testland\n"
                                      "2004-05-03,2,Testland\n"
                                      "2004-05-03,1,Elsewhere\n");
  IngestReport report;
  const EventSeries s = ingest_csv(path, "Testland", {}, &report);
  CHECK(s.days() == 3);
  CHECK(s.counts[0] == 2);
  CHECK(s.fatalities[0] == 3);
  CHECK(s.counts[1] == 0);  // empty day zero-filled
  CHECK(s.fatalities[1] == 0);
  CHECK(s.counts[2] == 1);
  CHECK(report.events_in_window == 3);
  CHECK(report.dropped_by_filter == 1);

  SUBCASE("an explicit window pads with zero days") {
    const auto start = *parse_date("2004-04-29");
    const auto end = *parse_date("2004-05-05");
    const EventSeries w = ingest_csv(path, "Testland", DateWindow{start, end});
    CHECK(w.days() == 7);
    CHECK(w.counts[0] == 0);
    CHECK(w.counts[2] == 2);
  }
  SUBCASE("window filtering counts exclusions") {
    const auto start = *parse_date("2004-05-02");
    const auto end = *parse_date("2004-05-31");
    IngestReport r2;
    const EventSeries w = ingest_csv(path, "Testland", DateWindow{start, end}, &r2);
    CHECK(r2.dropped_outside_window == 2);
    CHECK(w.counts[1] == 1);
  }
}

TEST_CASE("ingest error paths") {
  TempDir dir;
  SUBCASE("bad row reports its line number") {
    const std::string path = write_file(dir, "bad.csv",
                                        "date,nkill,country\n"
                                        "2004-05-01,3,A\n"
                                        "not-a-date,1,A\n");
    try {
      ingest_csv(path);
      CHECK(false);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("empty result is an error") {
    const std::string path = write_file(dir, "empty.csv", "date,nkill,country\n");
    CHECK_THROWS_AS(ingest_csv(path), DataError);
    const std::string path2 = write_file(dir, "filtered.csv",
                                         "date,nkill,country\n2004-05-01,1,A\n");
    CHECK_THROWS_AS(ingest_csv(path2, "B"), DataError);
  }
  SUBCASE("missing header is an error") {
    const std::string path = write_file(dir, "nohdr.csv", "2004-05-01,1,A\n");
    CHECK_THROWS_AS(ingest_csv(path), DataError);
  }
  SUBCASE("missing file is an error") { CHECK_THROWS_AS(ingest_csv(dir.file("nope.csv")), DataError); }
}

TEST_CASE("ingest understands raw GTD headers") {
  TempDir dir;
  const std::string path = write_file(dir, "gtd.csv",
                                      "eventid,iyear,imonth,iday,country_txt,nkill\n"
                                      "1,2004,5,1,Testland,3\n"
                                      "2,2004,5,0,Testland,1\n"   // unknown day: dropped
                                      "3,2004,5,2,Testland,\n"    // blank nkill: imputed 0
                                      "4,2004,5,2,Testland,2.0\n");
  IngestReport report;
  const EventSeries s = ingest_csv(path, "", {}, &report);
  CHECK(report.dropped_unknown_date == 1);
  CHECK(report.imputed_fatalities == 1);
  CHECK(s.days() == 2);
  CHECK(s.counts[0] == 1);
  CHECK(s.counts[1] == 2);
  CHECK(s.fatalities[1] == 2);
}

TEST_CASE("simulate, write, ingest round trip is lossless") {
  TempDir dir;
  SimConfig config = SimConfig::constant_rates(300, 1.2, 0.5, DecayKernel{2.0, 1.5}, 2.0);
  config.rng_seed = 5;
  const SimResult r = simulate_hierarchical(config);
  const std::string path = dir.file("sim.csv");
  write_events_csv(path, r.events, r.series.start, "SIM");
  const DateWindow window{r.series.start, r.series.start + std::chrono::days{config.days - 1}};
  const EventSeries back = ingest_csv(path, "SIM", window);
  CHECK(back.days() == r.series.days());
  CHECK(back.counts == r.series.counts);
  CHECK(back.fatalities == r.series.fatalities);
  CHECK(back.start == r.series.start);

  SUBCASE("totals are conserved") {
    std::int64_t total = 0;
    for (std::int64_t c : back.counts) total += c;
    CHECK(total == static_cast<std::int64_t>(r.events.size()));
  }
}

TEST_CASE("covariates") {
  SimConfig config = SimConfig::constant_rates(400, 1.0, 0.5, DecayKernel{2.0, 1.5}, 2.0);
  config.rng_seed = 6;
  const EventSeries s = simulate_hierarchical(config).series;
  const auto [x, w] = build_covariates(s);
  CHECK(x.rows() == s.days());
  CHECK(w.rows() == s.days());
  CHECK(x.cols() == default_time_spec(s.days()).n_basis());
  CHECK(w.cols() == 11);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    CHECK(x.values.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.values.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("fatality domain and grid endpoints are data driven") {
    double lo = 1e300, hi = -1e300;
    for (std::int64_t f : s.fatalities) {
      lo = std::min(lo, std::log1p(static_cast<double>(f)));
      hi = std::max(hi, std::log1p(static_cast<double>(f)));
    }
    CHECK(w.spec.lo == lo);
    CHECK(w.spec.hi == hi);
    const std::vector<double> grid = default_fatality_grid(s);
    CHECK(grid.front() == lo);
    CHECK(grid.back() == hi);
  }
  SUBCASE("zero-fatality days evaluate the basis at zero") {
    CHECK(w.spec.lo == 0.0);  // the simulation always has zero-fatality days
  }
}

TEST_CASE("quantiles match order statistics") {
  const std::vector<double> toy{4.0, 1.0, 2.5};
  CHECK(quantile(toy, 0.5) == 2.5);
  // (n-1)p = 0.05: interpolate between the first two order statistics.
  CHECK(quantile(toy, 0.025) == doctest::Approx(1.0 + 0.05 * 1.5).epsilon(1e-14));
  CHECK(quantile(toy, 0.975) == doctest::Approx(2.5 + 0.95 * 1.5).epsilon(1e-14));
  CHECK(quantile({3.0}, 0.9) == 3.0);
}

TEST_CASE("summarize") {
  SimConfig config = SimConfig::constant_rates(200, 1.0, 0.5, DecayKernel{2.0, 1.5}, 2.0);
  config.rng_seed = 7;
  const EventSeries s = simulate_hierarchical(config).series;
  const DesignMatrix x = intercept_design(s.days());
  const DesignMatrix w = intercept_design(s.days());
  const std::vector<double> grid = default_fatality_grid(s, 21);

  SUBCASE("constant chain gives degenerate intervals") {
    const std::vector<ModelParams> draws(150, constant_params(0.8, 0.6, DecayKernel{1.6, 5.0}, 2.0));
    const PosteriorSummary sum = summarize(draws, s, x, w, grid);
    for (std::size_t t = 0; t < sum.lambda_d.grid.size(); ++t) {
      CHECK(sum.lambda_d.lower[t] == sum.lambda_d.upper[t]);
      CHECK(sum.lambda_d.median[t] == doctest::Approx(0.8).epsilon(1e-12));
    }
    CHECK(sum.expected_delay.median == 1.6);
    CHECK(sum.expected_delay.lower == sum.expected_delay.upper);
    CHECK(sum.explosive_flag == false);
    CHECK(sum.max_median_delta == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("stationarity flag raised when the median volatility exceeds one") {
    const std::vector<ModelParams> draws(150, constant_params(0.8, 1.4, DecayKernel{1.6, 5.0}, 2.0));
    const PosteriorSummary sum = summarize(draws, s, x, w, grid);
    CHECK(sum.explosive_flag);
  }
  SUBCASE("quantiles of a mixed chain match direct order statistics") {
    std::vector<ModelParams> draws;
    for (int i = 0; i < 120; ++i)
      draws.push_back(constant_params(0.5 + 0.01 * i, 0.5, DecayKernel{2.0, 1.0}, 1.0));
    const PosteriorSummary sum = summarize(draws, s, x, w, grid);
    std::vector<double> lam(120);
    for (int i = 0; i < 120; ++i) lam[static_cast<std::size_t>(i)] = 0.5 + 0.01 * i;
    CHECK(sum.lambda_d.median[0] == doctest::Approx(quantile(lam, 0.5)).epsilon(1e-12));
    CHECK(sum.lambda_d.lower[0] == doctest::Approx(quantile(lam, 0.025)).epsilon(1e-12));
    CHECK(sum.lambda_d.upper[0] == doctest::Approx(quantile(lam, 0.975)).epsilon(1e-12));
  }
  SUBCASE("too few draws is an error") {
    const std::vector<ModelParams> draws(99, constant_params(1.0, 0.5, DecayKernel{2.0, 1.0}, 1.0));
    CHECK_THROWS_AS(summarize(draws, s, x, w, grid), ConfigError);
  }
}

TEST_CASE("attribution summary") {
  SUBCASE("fractions vanish when contagion is off") {
    SimConfig config = SimConfig::constant_rates(400, 1.2, 1e-9, DecayKernel{2.0, 1.5}, 2.0);
    config.rng_seed = 9;
    const EventSeries s = simulate_hierarchical(config).series;
    ChainConfig cc;
    cc.n_iterations = 900;
    cc.n_burnin = 300;
    cc.thin_every = 2;
    cc.latent_thin = 1;
    cc.rng_seed = 10;
    const DesignMatrix x = intercept_design(s.days());
    const std::vector<PosteriorDraws> chains{run_chain(s, x, x, cc)};
    const std::vector<double> frac = attribution_summary(chains, s);
    double mean_frac = 0.0;
    for (double f : frac) {
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      mean_frac += f;
    }
    mean_frac /= static_cast<double>(frac.size());
    CHECK(mean_frac < 0.1);
  }
  SUBCASE("all-zero series yields zero fractions") {
    EventSeries s;
    s.start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 1};
    s.counts.assign(50, 0);
    s.fatalities.assign(50, 0);
    PosteriorDraws fake;
    LatentState latent;
    latent.yd.assign(50, 0);
    latent.yc.assign(50, 0);
    latent.lam_c = Eigen::VectorXd::Zero(50);
    fake.latents.push_back(latent);
    const std::vector<PosteriorDraws> chains{fake};
    for (double f : attribution_summary(chains, s)) CHECK(f == 0.0);
  }
  SUBCASE("no stored latents is an error") {
    EventSeries s;
    s.start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 1};
    s.counts.assign(10, 0);
    s.fatalities.assign(10, 0);
    const std::vector<PosteriorDraws> chains{PosteriorDraws{}};
    CHECK_THROWS_AS(attribution_summary(chains, s), ConfigError);
  }
}

TEST_CASE("effective sample size") {
  Rng rng(1);
  SUBCASE("iid draws keep their nominal size") {
    std::vector<double> draws(10000);
    for (double& d : draws) d = rng.normal();
    const double ess = ess_batch_means(draws);
    CHECK(ess > 8000.0);
    CHECK(ess <= 10000.0);
  }
  SUBCASE("a constant chain collapses to one") {
    const std::vector<double> draws(1000, 3.14);
    CHECK(ess_batch_means(draws) == 1.0);
  }
  SUBCASE("strong autocorrelation shrinks the size") {
    std::vector<double> draws(10000);
    double x = 0.0;
    for (double& d : draws) {
      x = 0.99 * x + 0.1 * rng.normal();
      d = x;
    }
    CHECK(ess_batch_means(draws) < 2000.0);
  }
}

TEST_CASE("split R-hat") {
  Rng rng(2);
  SUBCASE("well-mixed chains sit near one") {
    std::vector<std::vector<double>> chains(4, std::vector<double>(2000));
    for (auto& c : chains)
      for (double& d : c) d = rng.normal();
    CHECK(split_rhat(chains) == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("shifted chains are flagged large") {
    std::vector<std::vector<double>> chains(2, std::vector<double>(2000));
    for (std::size_t c = 0; c < 2; ++c)
      for (double& d : chains[c]) d = rng.normal() + (c == 0 ? 0.0 : 3.0);
    CHECK(split_rhat(chains) > 1.5);
  }
}

TEST_CASE("chain diagnostics") {
  SimConfig config = SimConfig::constant_rates(200, 1.0, 0.4, DecayKernel{2.0, 1.5}, 2.0);
  config.rng_seed = 3;
  const EventSeries s = simulate_hierarchical(config).series;
  const DesignMatrix x = intercept_design(s.days());
  ChainConfig cc;
  cc.n_iterations = 700;
  cc.n_burnin = 200;
  cc.thin_every = 1;
  cc.store_latents = false;

  SUBCASE("duplicate seeds are flagged") {
    cc.rng_seed = 42;
    const PosteriorDraws a = run_chain(s, x, x, cc);
    const PosteriorDraws b = run_chain(s, x, x, cc);
    const std::vector<PosteriorDraws> chains{a, b};
    const Diagnostics d = ess_and_diagnostics(chains);
    CHECK(d.duplicate_chains);
    // Split R-hat still reflects within-chain drift, so only near one.
    for (const ParamDiagnostic& pd : d.params) CHECK(pd.rhat < 1.1);
  }
  SUBCASE("independent seeds give a full report") {
    cc.rng_seed = 42;
    const PosteriorDraws a = run_chain(s, x, x, cc);
    cc.rng_seed = 43;
    const PosteriorDraws b = run_chain(s, x, x, cc);
    const std::vector<PosteriorDraws> chains{a, b};
    const Diagnostics d = ess_and_diagnostics(chains);
    CHECK(!d.duplicate_chains);
    CHECK(d.params.size() == 7);  // beta.0, eta.0, phi.mean, phi.scale, sigma2, rho, gamma
    CHECK(d.params[0].name == "beta.0");
    CHECK(d.acceptance.size() == 2);
    for (const ParamDiagnostic& pd : d.params) CHECK(pd.ess > 1.0);
  }
  SUBCASE("a single chain is rejected") {
    cc.rng_seed = 44;
    const std::vector<PosteriorDraws> chains{run_chain(s, x, x, cc)};
    CHECK_THROWS_AS(ess_and_diagnostics(chains), ConfigError);
  }
}

TEST_CASE("draws CSV round trip") {
  TempDir dir;
  PosteriorDraws draws;
  draws.params.push_back(constant_params(0.7, 0.5, DecayKernel{1.8, 2.0}, 1.5));
  draws.params.push_back(constant_params(0.9, 0.6, DecayKernel{2.2, 0.7}, 2.5));
  draws.params[1].rho = 17.25;
  draws.params[1].gamma = 0.125;
  const std::string path = dir.file("draws.csv");
  write_draws_csv(path, draws);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "beta.0,eta.0,phi.mean,phi.scale,sigma2,rho,gamma");

  const std::vector<ModelParams> back = read_draws_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].beta[0] == draws.params[0].beta[0]);
  CHECK(back[1].kernel.scale == draws.params[1].kernel.scale);
  CHECK(back[1].rho == 17.25);
  CHECK(back[1].gamma == 0.125);
}

TEST_CASE("curve CSV schema") {
  TempDir dir;
  CurveSummary curve;
  curve.grid = {1.0, 2.0};
  curve.lower = {0.1, 0.2};
  curve.median = {0.5, 0.6};
  curve.upper = {0.9, 1.0};
  const std::string path = dir.file("curve.csv");
  write_curve_csv(path, curve);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "grid,lower,median,upper");
  std::string row;
  std::getline(in, row);
  CHECK(row.substr(0, 2) == "1,");
}

TEST_SUITE_END();
