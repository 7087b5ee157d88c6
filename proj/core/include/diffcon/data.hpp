#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffcon/model.hpp"
#include "diffcon/sampler.hpp"
#include "diffcon/simulate.hpp"

namespace diffcon {

struct EventRecord {
  std::chrono::sys_days date;
  std::int64_t fatalities = 0;
  std::string country;
};

struct DateWindow {
  std::chrono::sys_days start;
  std::chrono::sys_days end;  // inclusive
};

struct IngestReport {
  std::int64_t rows_parsed = 0;
  std::int64_t events_in_window = 0;
  std::int64_t dropped_by_filter = 0;
  std::int64_t dropped_outside_window = 0;
  std::int64_t dropped_unknown_date = 0;  // GTD rows with imonth or iday = 0
  std::int64_t imputed_fatalities = 0;    // blank fatality fields treated as 0
};

std::string format_date(std::chrono::sys_days d);
std::optional<std::chrono::sys_days> parse_date(const std::string& text);

// Reads an event CSV into a daily grid spanning the window (every day
// present, zero-count days included). Accepts either the minimal schema
// (date,nkill,country) or raw GTD headers (iyear,imonth,iday,nkill,
// country_txt); GTD rows with unknown month or day are dropped and counted.
// With no window, the span of the filtered events is used.
EventSeries ingest_csv(const std::string& path, const std::string& country_filter = "",
                       std::optional<DateWindow> window = {}, IngestReport* report = nullptr);

// Default covariates: quarterly-knot cubic time basis over the day index and
// a cubic basis over log(fatalities+1) with its domain fitted to the data.
std::pair<DesignMatrix, DesignMatrix> build_covariates(const EventSeries& series,
                                                       int fatality_interior_knots = 7);

// Evaluation grid for the volatility curve, in log(fatalities+1) space, with
// endpoints at the observed minimum and maximum.
std::vector<double> default_fatality_grid(const EventSeries& series, int n_points = 101);

struct CurveSummary {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> median;
  std::vector<double> upper;
};

struct ScalarSummary {
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
};

struct PosteriorSummary {
  CurveSummary lambda_d;  // grid: day index
  CurveSummary delta;     // grid: fatalities (raw counts)
  CurveSummary decay;     // grid: delay in days, 1..U
  ScalarSummary expected_delay;
  ScalarSummary tail_prob_3;
  ScalarSummary tail_prob_4;
  double max_median_delta = 0.0;
  bool explosive_flag = false;  // median delta exceeds 1 somewhere on the grid
};

// Pointwise (0.025, 0.5, 0.975) quantiles of the derived posterior curves.
// Requires at least 100 stored draws.
PosteriorSummary summarize(std::span<const ModelParams> draws, const EventSeries& series,
                           const DesignMatrix& x, const DesignMatrix& w,
                           std::span<const double> lnf_grid);

// Posterior mean fraction of each day's events attributed to contagion.
std::vector<double> attribution_summary(std::span<const PosteriorDraws> chains,
                                        const EventSeries& series);

struct ParamDiagnostic {
  std::string name;
  double ess = 0.0;
  double rhat = 0.0;
  bool flagged = false;  // rhat > 1.05 or degenerate chain
};

struct Diagnostics {
  std::vector<ParamDiagnostic> params;
  bool duplicate_chains = false;
  std::vector<AcceptStats> acceptance;
};

// Batch-means effective sample size and split-R-hat across chains.
Diagnostics ess_and_diagnostics(std::span<const PosteriorDraws> chains);

double ess_batch_means(std::span<const double> draws);
double split_rhat(const std::vector<std::vector<double>>& chains);

// Order-statistic quantile with linear interpolation.
double quantile(std::vector<double> values, double p);

// Stable flattening of a parameter vector; the column order of the draw CSVs.
std::vector<std::string> param_names(Eigen::Index n_beta, Eigen::Index n_eta);
Eigen::VectorXd flatten_params(const ModelParams& params);

// Numbers in output files carry 17 significant digits.
std::string format_number(double value);

void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
std::vector<ModelParams> read_draws_csv(const std::string& path);
void write_events_csv(const std::string& path, std::span<const SimEvent> events,
                      std::chrono::sys_days start, const std::string& country);
void write_truth_csv(const std::string& path, const SimResult& result);
void write_curve_csv(const std::string& path, const CurveSummary& curve);
void write_decay_summary_csv(const std::string& path, const PosteriorSummary& summary);
void write_attribution_csv(const std::string& path, const EventSeries& series,
                           std::span<const double> fractions);
void write_diagnostics_report(const std::string& path, const Diagnostics& diagnostics);

}  // namespace diffcon
