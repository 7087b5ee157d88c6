#include "diffcon/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "diffcon/errors.hpp"

namespace diffcon {

std::string format_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<std::chrono::sys_days> parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits one CSV line; handles double-quoted fields with embedded commas.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool is_missing(const std::string& s) {
  const std::string t = lower(trim(s));
  return t.empty() || t == "na" || t == "nan" || t == ".";
}

std::int64_t parse_fatalities(const std::string& raw, std::size_t line_no, IngestReport& report) {
  if (is_missing(raw)) {
    ++report.imputed_fatalities;
    return 0;
  }
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || !trim(end).empty() || !(v >= 0.0))
    throw DataError("line " + std::to_string(line_no) + ": bad fatality count '" + raw + "'");
  return std::llround(v);
}

std::int64_t parse_int_field(const std::string& raw, const char* what, std::size_t line_no) {
  char* end = nullptr;
  const long long v = std::strtoll(raw.c_str(), &end, 10);
  if (end == raw.c_str())
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + raw + "'");
  return v;
}

}  // namespace

EventSeries ingest_csv(const std::string& path, const std::string& country_filter,
                       std::optional<DateWindow> window, IngestReport* report_out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(trim(header[i]))] = i;

  const bool minimal = col.count("date") > 0;
  const bool gtd = col.count("iyear") && col.count("imonth") && col.count("iday");
  if (!minimal && !gtd)
    throw DataError(path + ": header must contain date,nkill,country or iyear,imonth,iday");
  if (minimal && (!col.count("nkill") || !col.count("country")))
    throw DataError(path + ": minimal schema requires columns date,nkill,country");
  const std::size_t country_col = minimal ? col["country"]
                                  : col.count("country_txt") ? col["country_txt"]
                                  : col.count("country")     ? col["country"]
                                                             : static_cast<std::size_t>(-1);

  IngestReport report;
  std::vector<EventRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    ++report.rows_parsed;
    const auto field = [&](std::size_t idx) -> std::string {
      return idx < fields.size() ? fields[idx] : "";
    };

    EventRecord rec;
    if (minimal) {
      const std::string raw_date = trim(field(col["date"]));
      const auto date = parse_date(raw_date);
      if (!date)
        throw DataError("line " + std::to_string(line_no) + ": bad date '" + raw_date + "'");
      rec.date = *date;
      rec.fatalities = parse_fatalities(field(col["nkill"]), line_no, report);
      rec.country = trim(field(country_col));
    } else {
      const std::int64_t y = parse_int_field(field(col["iyear"]), "iyear", line_no);
      const std::int64_t m = parse_int_field(field(col["imonth"]), "imonth", line_no);
      const std::int64_t d = parse_int_field(field(col["iday"]), "iday", line_no);
      if (m == 0 || d == 0) {
        ++report.dropped_unknown_date;
        continue;
      }
      const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                            std::chrono::month{static_cast<unsigned>(m)},
                                            std::chrono::day{static_cast<unsigned>(d)}};
      if (!ymd.ok())
        throw DataError("line " + std::to_string(line_no) + ": invalid date " + std::to_string(y) +
                        "-" + std::to_string(m) + "-" + std::to_string(d));
      rec.date = std::chrono::sys_days{ymd};
      rec.fatalities =
          col.count("nkill") ? parse_fatalities(field(col["nkill"]), line_no, report) : 0;
      if (country_col != static_cast<std::size_t>(-1)) rec.country = trim(field(country_col));
    }

    if (!country_filter.empty() && rec.country != country_filter) {
      ++report.dropped_by_filter;
      continue;
    }
    if (window && (rec.date < window->start || rec.date > window->end)) {
      ++report.dropped_outside_window;
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty())
    throw DataError(path + ": no events after filtering" +
                    (country_filter.empty() ? "" : " (country='" + country_filter + "')"));

  DateWindow w{};
  if (window) {
    w = *window;
  } else {
    w.start = w.end = records.front().date;
    for (const EventRecord& r : records) {
      w.start = std::min(w.start, r.date);
      w.end = std::max(w.end, r.date);
    }
  }
  if (w.end < w.start) throw ConfigError("ingest_csv: window end precedes start");

  EventSeries series;
  series.start = w.start;
  const auto days = (w.end - w.start).count() + 1;
  series.counts.assign(static_cast<std::size_t>(days), 0);
  series.fatalities.assign(static_cast<std::size_t>(days), 0);
  for (const EventRecord& r : records) {
    const auto t = (r.date - w.start).count();
    ++series.counts[static_cast<std::size_t>(t)];
    series.fatalities[static_cast<std::size_t>(t)] += r.fatalities;
  }
  report.events_in_window = static_cast<std::int64_t>(records.size());
  if (report_out) *report_out = report;
  series.validate();
  return series;
}

std::pair<DesignMatrix, DesignMatrix> build_covariates(const EventSeries& series,
                                                       int fatality_interior_knots) {
  series.validate();
  const int t_max = series.days();
  std::vector<double> day_points(static_cast<std::size_t>(t_max));
  std::vector<double> lnf_points(static_cast<std::size_t>(t_max));
  double lnf_lo = std::numeric_limits<double>::infinity();
  double lnf_hi = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < t_max; ++t) {
    day_points[static_cast<std::size_t>(t)] = static_cast<double>(t);
    const double lnf = std::log1p(static_cast<double>(series.fatalities[static_cast<std::size_t>(t)]));
    lnf_points[static_cast<std::size_t>(t)] = lnf;
    lnf_lo = std::min(lnf_lo, lnf);
    lnf_hi = std::max(lnf_hi, lnf);
  }
  const BasisSpec time_spec = default_time_spec(t_max);
  const BasisSpec fat_spec = default_fatality_spec(lnf_lo, lnf_hi, fatality_interior_knots);
  return {build_basis(time_spec, day_points), build_basis(fat_spec, lnf_points)};
}

std::vector<double> default_fatality_grid(const EventSeries& series, int n_points) {
  if (n_points < 2) throw ConfigError("default_fatality_grid: need at least 2 points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::int64_t f : series.fatalities) {
    const double lnf = std::log1p(static_cast<double>(f));
    lo = std::min(lo, lnf);
    hi = std::max(hi, lnf);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n_points - 1);
  return grid;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(i);
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

namespace {

void curve_quantiles(const Eigen::MatrixXd& values, CurveSummary& out) {
  // values: rows = grid points, cols = draws.
  const Eigen::Index n = values.rows();
  out.lower.resize(static_cast<std::size_t>(n));
  out.median.resize(static_cast<std::size_t>(n));
  out.upper.resize(static_cast<std::size_t>(n));
  std::vector<double> buf(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) buf[static_cast<std::size_t>(j)] = values(i, j);
    std::sort(buf.begin(), buf.end());
    const auto q = [&](double p) {
      const double h = p * static_cast<double>(buf.size() - 1);
      const std::size_t k = static_cast<std::size_t>(std::floor(h));
      if (k + 1 >= buf.size()) return buf.back();
      const double frac = h - static_cast<double>(k);
      return buf[k] * (1.0 - frac) + buf[k + 1] * frac;
    };
    out.lower[static_cast<std::size_t>(i)] = q(0.025);
    out.median[static_cast<std::size_t>(i)] = q(0.5);
    out.upper[static_cast<std::size_t>(i)] = q(0.975);
  }
}

ScalarSummary scalar_quantiles(std::vector<double> values) {
  ScalarSummary s;
  s.lower = quantile(values, 0.025);
  s.median = quantile(values, 0.5);
  s.upper = quantile(values, 0.975);
  return s;
}

}  // namespace

PosteriorSummary summarize(std::span<const ModelParams> draws, const EventSeries& series,
                           const DesignMatrix& x, const DesignMatrix& w,
                           std::span<const double> lnf_grid) {
  if (draws.size() < 100)
    throw ConfigError("summarize: need at least 100 stored draws, have " +
                      std::to_string(draws.size()));
  if (lnf_grid.empty()) throw ConfigError("summarize: empty fatality grid");
  if (x.rows() != series.days() || w.rows() != series.days())
    throw ConfigError("summarize: design matrices do not match the series");
  const Eigen::Index n_draws = static_cast<Eigen::Index>(draws.size());
  const Eigen::Index t_max = x.rows();
  const Eigen::Index kb = x.cols();
  const Eigen::Index ke = w.cols();

  PosteriorSummary out;

  // Diffusion-rate curve via blocked matrix products.
  Eigen::MatrixXd betas(kb, n_draws);
  Eigen::MatrixXd etas(ke, n_draws);
  for (Eigen::Index j = 0; j < n_draws; ++j) {
    const ModelParams& p = draws[static_cast<std::size_t>(j)];
    if (p.beta.size() != kb || p.eta.size() != ke)
      throw ConfigError("summarize: draw dimensions do not match design matrices");
    betas.col(j) = p.beta;
    etas.col(j) = p.eta;
  }
  out.lambda_d.grid.resize(static_cast<std::size_t>(t_max));
  for (Eigen::Index t = 0; t < t_max; ++t) out.lambda_d.grid[static_cast<std::size_t>(t)] = static_cast<double>(t);
  {
    out.lambda_d.lower.resize(static_cast<std::size_t>(t_max));
    out.lambda_d.median.resize(static_cast<std::size_t>(t_max));
    out.lambda_d.upper.resize(static_cast<std::size_t>(t_max));
    const Eigen::Index block = 512;
    CurveSummary chunk;
    for (Eigen::Index t0 = 0; t0 < t_max; t0 += block) {
      const Eigen::Index rows = std::min(block, t_max - t0);
      Eigen::MatrixXd vals = (x.values.middleRows(t0, rows) * betas).array().exp();
      curve_quantiles(vals, chunk);
      std::copy(chunk.lower.begin(), chunk.lower.end(), out.lambda_d.lower.begin() + t0);
      std::copy(chunk.median.begin(), chunk.median.end(), out.lambda_d.median.begin() + t0);
      std::copy(chunk.upper.begin(), chunk.upper.end(), out.lambda_d.upper.begin() + t0);
    }
  }

  // Volatility vs fatalities on the grid (grid reported in raw fatalities).
  {
    const DesignMatrix wg = build_basis(w.spec, lnf_grid);
    Eigen::MatrixXd vals = (wg.values * etas).array().exp();
    curve_quantiles(vals, out.delta);
    out.delta.grid.resize(lnf_grid.size());
    for (std::size_t i = 0; i < lnf_grid.size(); ++i) out.delta.grid[i] = std::expm1(lnf_grid[i]);
    out.max_median_delta = *std::max_element(out.delta.median.begin(), out.delta.median.end());
    out.explosive_flag = out.max_median_delta > 1.0;
  }

  // Decay curve, expected delay, tail probabilities.
  {
    int u_max = 1;
    for (const ModelParams& p : draws) u_max = std::max(u_max, decay_horizon(p.kernel));
    Eigen::MatrixXd vals(u_max, n_draws);
    std::vector<double> delays, tail3, tail4;
    delays.reserve(static_cast<std::size_t>(n_draws));
    tail3.reserve(static_cast<std::size_t>(n_draws));
    tail4.reserve(static_cast<std::size_t>(n_draws));
    for (Eigen::Index j = 0; j < n_draws; ++j) {
      const DecayKernel& kern = draws[static_cast<std::size_t>(j)].kernel;
      for (int u = 1; u <= u_max; ++u) vals(u - 1, j) = decay_pmf(u, kern);
      delays.push_back(decay_expected_delay(kern));
      tail3.push_back(decay_tail_prob(3, kern));
      tail4.push_back(decay_tail_prob(4, kern));
    }
    curve_quantiles(vals, out.decay);
    out.decay.grid.resize(static_cast<std::size_t>(u_max));
    for (int u = 1; u <= u_max; ++u) out.decay.grid[static_cast<std::size_t>(u - 1)] = u;
    out.expected_delay = scalar_quantiles(std::move(delays));
    out.tail_prob_3 = scalar_quantiles(std::move(tail3));
    out.tail_prob_4 = scalar_quantiles(std::move(tail4));
  }

  return out;
}

std::vector<double> attribution_summary(std::span<const PosteriorDraws> chains,
                                        const EventSeries& series) {
  const std::size_t t_max = static_cast<std::size_t>(series.days());
  std::vector<double> acc(t_max, 0.0);
  std::int64_t n_latents = 0;
  for (const PosteriorDraws& chain : chains) {
    for (const LatentState& latent : chain.latents) {
      if (latent.yc.size() != t_max)
        throw ConfigError("attribution_summary: latent length mismatch");
      for (std::size_t t = 0; t < t_max; ++t) {
        const double denom = static_cast<double>(std::max<std::int64_t>(series.counts[t], 1));
        acc[t] += static_cast<double>(latent.yc[t]) / denom;
      }
      ++n_latents;
    }
  }
  if (n_latents == 0) throw ConfigError("attribution_summary: no stored latent states");
  for (double& v : acc) v /= static_cast<double>(n_latents);
  return acc;
}

double ess_batch_means(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 8) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : draws) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (var <= 1e-20 * (mean * mean + 1.0)) return 1.0;  // constant chain

  const std::size_t batch = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t k = n / batch;
  double bm_mean = 0.0;
  std::vector<double> means(k);
  for (std::size_t b = 0; b < k; ++b) {
    double s = 0.0;
    for (std::size_t i = b * batch; i < (b + 1) * batch; ++i) s += draws[i];
    means[b] = s / static_cast<double>(batch);
    bm_mean += means[b];
  }
  bm_mean /= static_cast<double>(k);
  double bm_var = 0.0;
  for (double v : means) bm_var += (v - bm_mean) * (v - bm_mean);
  bm_var /= static_cast<double>(k - 1);
  const double tau = static_cast<double>(batch) * bm_var / var;
  const double ess = static_cast<double>(n) / std::max(tau, 1e-12);
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) min_len = std::min(min_len, c.size());
  if (chains.size() < 2 || min_len < 4)
    throw ConfigError("split_rhat: need at least 2 chains of length >= 4");
  const std::size_t half = min_len / 2;
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(half),
                        c.begin() + static_cast<std::ptrdiff_t>(2 * half));
  }
  const std::size_t m = halves.size();
  const double n = static_cast<double>(half);
  std::vector<double> means(m), vars(m);
  double grand = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double v : halves[j]) s += v;
    means[j] = s / n;
    grand += means[j];
    double sv = 0.0;
    for (double v : halves[j]) sv += (v - means[j]) * (v - means[j]);
    vars[j] = sv / (n - 1.0);
  }
  grand /= static_cast<double>(m);
  double b = 0.0, w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    b += (means[j] - grand) * (means[j] - grand);
    w += vars[j];
  }
  b *= n / (static_cast<double>(m) - 1.0);
  w /= static_cast<double>(m);
  if (w <= 1e-300) return 1.0;  // all sequences constant
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

Diagnostics ess_and_diagnostics(std::span<const PosteriorDraws> chains) {
  if (chains.size() < 2)
    throw ConfigError("ess_and_diagnostics: split-R-hat needs at least 2 chains");
  const std::size_t n_chains = chains.size();
  const Eigen::Index n_beta = chains[0].params.at(0).beta.size();
  const Eigen::Index n_eta = chains[0].params.at(0).eta.size();
  const std::vector<std::string> names = param_names(n_beta, n_eta);
  const std::size_t n_params = names.size();

  // chains x params x draws
  std::vector<std::vector<std::vector<double>>> series(n_chains);
  for (std::size_t c = 0; c < n_chains; ++c) {
    series[c].assign(n_params, {});
    for (const ModelParams& p : chains[c].params) {
      const Eigen::VectorXd flat = flatten_params(p);
      if (static_cast<std::size_t>(flat.size()) != n_params)
        throw ConfigError("ess_and_diagnostics: inconsistent parameter dimensions across chains");
      for (std::size_t j = 0; j < n_params; ++j) series[c][j].push_back(flat[static_cast<Eigen::Index>(j)]);
    }
  }

  Diagnostics out;
  bool all_duplicate = true;
  for (std::size_t c = 1; c < n_chains; ++c)
    if (series[c][0] != series[0][0]) all_duplicate = false;
  out.duplicate_chains = all_duplicate;

  for (std::size_t j = 0; j < n_params; ++j) {
    ParamDiagnostic d;
    d.name = names[j];
    double ess = 0.0;
    bool degenerate = false;
    std::vector<std::vector<double>> per_chain;
    for (std::size_t c = 0; c < n_chains; ++c) {
      const double e = ess_batch_means(series[c][j]);
      ess += e;
      if (e <= 1.0 && series[c][j].size() > 8) degenerate = true;
      per_chain.push_back(series[c][j]);
    }
    d.ess = ess;
    d.rhat = split_rhat(per_chain);
    d.flagged = d.rhat > 1.05 || degenerate;
    out.params.push_back(std::move(d));
  }
  for (const PosteriorDraws& chain : chains) out.acceptance.push_back(chain.accept);
  return out;
}

std::vector<std::string> param_names(Eigen::Index n_beta, Eigen::Index n_eta) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_beta + n_eta + 5));
  for (Eigen::Index i = 0; i < n_beta; ++i) names.push_back("beta." + std::to_string(i));
  for (Eigen::Index i = 0; i < n_eta; ++i) names.push_back("eta." + std::to_string(i));
  names.emplace_back("phi.mean");
  names.emplace_back("phi.scale");
  names.emplace_back("sigma2");
  names.emplace_back("rho");
  names.emplace_back("gamma");
  return names;
}

Eigen::VectorXd flatten_params(const ModelParams& params) {
  Eigen::VectorXd flat(params.beta.size() + params.eta.size() + 5);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < params.beta.size(); ++i) flat[k++] = params.beta[i];
  for (Eigen::Index i = 0; i < params.eta.size(); ++i) flat[k++] = params.eta[i];
  flat[k++] = params.kernel.delay_mean;
  flat[k++] = params.kernel.scale;
  flat[k++] = params.sigma2;
  flat[k++] = params.rho;
  flat[k++] = params.gamma;
  return flat;
}

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

}  // namespace

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out = open_out(path);
  if (draws.params.empty()) throw ConfigError("write_draws_csv: no draws");
  const Eigen::Index n_beta = draws.params.front().beta.size();
  const Eigen::Index n_eta = draws.params.front().eta.size();
  const std::vector<std::string> names = param_names(n_beta, n_eta);
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << "\n";
  for (const ModelParams& p : draws.params) {
    const Eigen::VectorXd flat = flatten_params(p);
    for (Eigen::Index j = 0; j < flat.size(); ++j)
      out << (j ? "," : "") << format_number(flat[j]);
    out << "\n";
  }
}

std::vector<ModelParams> read_draws_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open draws file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty draws file");
  const std::vector<std::string> header = split_csv_line(line);
  Eigen::Index n_beta = 0, n_eta = 0;
  for (const std::string& h : header) {
    if (h.rfind("beta.", 0) == 0) ++n_beta;
    if (h.rfind("eta.", 0) == 0) ++n_eta;
  }
  const std::vector<std::string> expect = param_names(n_beta, n_eta);
  if (header != expect) throw DataError(path + ": unexpected draws header");

  std::vector<ModelParams> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != expect.size())
      throw DataError(path + " line " + std::to_string(line_no) + ": wrong field count");
    std::vector<double> vals(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      char* end = nullptr;
      vals[j] = std::strtod(fields[j].c_str(), &end);
      if (end == fields[j].c_str())
        throw DataError(path + " line " + std::to_string(line_no) + ": bad number '" + fields[j] + "'");
    }
    ModelParams p;
    p.beta = Eigen::Map<const Eigen::VectorXd>(vals.data(), n_beta);
    p.eta = Eigen::Map<const Eigen::VectorXd>(vals.data() + n_beta, n_eta);
    const std::size_t k = static_cast<std::size_t>(n_beta + n_eta);
    p.kernel = DecayKernel{vals[k], vals[k + 1]};
    p.sigma2 = vals[k + 2];
    p.rho = vals[k + 3];
    p.gamma = vals[k + 4];
    out.push_back(std::move(p));
  }
  if (out.empty()) throw DataError(path + ": no draws");
  return out;
}

void write_events_csv(const std::string& path, std::span<const SimEvent> events,
                      std::chrono::sys_days start, const std::string& country) {
  std::ofstream out = open_out(path);
  out << "date,nkill,country\n";
  std::vector<SimEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SimEvent& a, const SimEvent& b) { return a.day < b.day; });
  for (const SimEvent& e : sorted)
    out << format_date(start + std::chrono::days{e.day}) << "," << e.fatalities << "," << country
        << "\n";
}

void write_truth_csv(const std::string& path, const SimResult& result) {
  std::ofstream out = open_out(path);
  out << "t,date,count,count_diffusion,count_contagion,fatalities,lam_c\n";
  const int t_max = result.series.days();
  for (int t = 0; t < t_max; ++t) {
    const std::size_t i = static_cast<std::size_t>(t);
    out << t << "," << format_date(result.series.date(t)) << "," << result.series.counts[i] << ","
        << result.truth.yd[i] << "," << result.truth.yc[i] << "," << result.series.fatalities[i]
        << "," << format_number(result.truth.lam_c.size() > t ? result.truth.lam_c[t] : 0.0)
        << "\n";
  }
}

void write_curve_csv(const std::string& path, const CurveSummary& curve) {
  std::ofstream out = open_out(path);
  out << "grid,lower,median,upper\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i)
    out << format_number(curve.grid[i]) << "," << format_number(curve.lower[i]) << ","
        << format_number(curve.median[i]) << "," << format_number(curve.upper[i]) << "\n";
}

void write_decay_summary_csv(const std::string& path, const PosteriorSummary& summary) {
  std::ofstream out = open_out(path);
  out << "quantity,lower,median,upper\n";
  const auto row = [&](const char* name, const ScalarSummary& s) {
    out << name << "," << format_number(s.lower) << "," << format_number(s.median) << ","
        << format_number(s.upper) << "\n";
  };
  row("expected_delay", summary.expected_delay);
  row("tail_prob_3", summary.tail_prob_3);
  row("tail_prob_4", summary.tail_prob_4);
  out << "max_median_delta," << format_number(summary.max_median_delta) << ","
      << format_number(summary.max_median_delta) << "," << format_number(summary.max_median_delta)
      << "\n";
  out << "explosive_flag," << (summary.explosive_flag ? 1 : 0) << ","
      << (summary.explosive_flag ? 1 : 0) << "," << (summary.explosive_flag ? 1 : 0) << "\n";
}

void write_attribution_csv(const std::string& path, const EventSeries& series,
                           std::span<const double> fractions) {
  if (fractions.size() != static_cast<std::size_t>(series.days()))
    throw ConfigError("write_attribution_csv: length mismatch");
  std::ofstream out = open_out(path);
  out << "t,date,contagion_fraction\n";
  for (std::size_t t = 0; t < fractions.size(); ++t)
    out << t << "," << format_date(series.date(static_cast<int>(t))) << ","
        << format_number(fractions[t]) << "\n";
}

void write_diagnostics_report(const std::string& path, const Diagnostics& diagnostics) {
  std::ofstream out = open_out(path);
  out << "parameter ess rhat flag\n";
  for (const ParamDiagnostic& d : diagnostics.params)
    out << d.name << " " << format_number(d.ess) << " " << format_number(d.rhat) << " "
        << (d.flagged ? "FLAG" : "ok") << "\n";
  if (diagnostics.duplicate_chains)
    out << "warning: chains are identical (duplicate seeds?); R-hat is uninformative\n";
  for (std::size_t c = 0; c < diagnostics.acceptance.size(); ++c) {
    const AcceptStats& a = diagnostics.acceptance[c];
    out << "chain " << c << " accept beta " << format_number(a.beta_rate()) << " eta "
        << format_number(a.eta_rate()) << " step beta " << format_number(a.step_beta) << " eta "
        << format_number(a.step_eta) << "\n";
  }
}

}  // namespace diffcon
