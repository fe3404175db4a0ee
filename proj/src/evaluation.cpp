#include "reactor/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace reactor {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<double>> delta_T(const StateField& T,
                                         std::span<const std::size_t> levels) {
  if (levels.size() < 2)
    throw std::invalid_argument("delta_T: need at least two levels");
  for (std::size_t l : levels)
    if (l >= T.n_z)
      throw std::invalid_argument("delta_T: level index out of range");
  std::vector<std::vector<double>> out(levels.size() - 1);
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    out[k].resize(T.n_t);
    for (std::size_t t = 0; t < T.n_t; ++t)
      out[k][t] = T.at(t, levels[k + 1]) - T.at(t, levels[k]);
  }
  return out;
}

double population_std(std::span<const double> xs) {
  if (xs.empty())
    throw std::invalid_argument("population_std: empty input");
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("rmse: size mismatch or empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double nrmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.size() < 2)
    throw std::invalid_argument("nrmse: need two equal-length series");
  const double sd = population_std(target);
  if (sd == 0.0)
    throw NumericError("nrmse: target series is constant, metric undefined");
  return rmse(pred, target) / sd;
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.empty())
    throw std::invalid_argument("r2: size mismatch or empty input");
  const double mu = mean(truth);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    ss_tot += (truth[i] - mu) * (truth[i] - mu);
  }
  if (ss_tot == 0.0)
    throw NumericError("r2: truth series is constant, metric undefined");
  return 1.0 - ss_res / ss_tot;
}

double r2_avg(const StateFields& pred, const StateFields& truth) {
  return (r2(pred.xa.v, truth.xa.v) + r2(pred.xp.v, truth.xp.v) +
          r2(pred.T.v, truth.T.v) + r2(pred.theta.v, truth.theta.v)) /
         4.0;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need two equal-length series");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0)
    throw NumericError("pearson: constant series, metric undefined");
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> min_max_scale(std::span<const double> xs) {
  if (xs.empty()) return {};
  double lo = xs[0], hi = xs[0];
  for (double x : xs) {
    lo = std::fmin(lo, x);
    hi = std::fmax(hi, x);
  }
  std::vector<double> out(xs.size(), 0.0);
  if (hi > lo)
    for (std::size_t i = 0; i < xs.size(); ++i)
      out[i] = (xs[i] - lo) / (hi - lo);
  return out;
}

std::vector<double> gather_levels(const StateField& f,
                                  std::span<const std::size_t> levels) {
  std::vector<double> out;
  out.reserve(levels.size() * f.n_t);
  for (std::size_t l : levels) {
    if (l >= f.n_z)
      throw std::invalid_argument("gather_levels: level index out of range");
    for (std::size_t t = 0; t < f.n_t; ++t) out.push_back(f.at(t, l));
  }
  return out;
}

std::vector<double> gather_delta_T(const StateField& T,
                                   std::span<const std::size_t> levels) {
  std::vector<double> out;
  for (const std::vector<double>& s : delta_T(T, levels))
    out.insert(out.end(), s.begin(), s.end());
  return out;
}

double delta_T_nrmse(const StateField& pred_T, const StateField& truth_T,
                     std::span<const std::size_t> levels) {
  return nrmse(gather_delta_T(pred_T, levels),
               gather_delta_T(truth_T, levels));
}

SplitMetrics::SplitMetrics()
    : t_nrmse(kNan), dt_nrmse(kNan), pearson_T(kNan) {}

SplitMetrics eval_split(const std::string& name, const StateField& pred_T,
                        const StateField& truth_T,
                        std::span<const std::size_t> levels) {
  SplitMetrics m;
  m.split = name;
  if (levels.empty()) return m;
  const std::vector<double> pred = gather_levels(pred_T, levels);
  const std::vector<double> truth = gather_levels(truth_T, levels);
  m.t_nrmse = nrmse(pred, truth);
  m.pearson_T = pearson(pred, truth);
  if (levels.size() >= 2) m.dt_nrmse = delta_T_nrmse(pred_T, truth_T, levels);
  return m;
}

MetricReport::MetricReport() : r2_average(kNan) {}

namespace {

nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  j["r2_average"] = num_or_null(r.r2_average);
  nlohmann::json splits = nlohmann::json::array();
  for (const SplitMetrics& s : r.splits) {
    nlohmann::json e;
    e["split"] = s.split;
    e["t_nrmse"] = num_or_null(s.t_nrmse);
    e["dt_nrmse"] = num_or_null(s.dt_nrmse);
    e["pearson_T"] = num_or_null(s.pearson_T);
    splits.push_back(std::move(e));
  }
  j["splits"] = std::move(splits);
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "variant,dataset,split,t_nrmse,dt_nrmse,pearson_T,r2_avg";
}

std::vector<std::string> report_csv_rows(const MetricReport& r) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt_g(v); };
  std::vector<std::string> rows;
  for (const SplitMetrics& s : r.splits) {
    rows.push_back(r.variant + "," + r.dataset + "," + s.split + "," +
                   cell(s.t_nrmse) + "," + cell(s.dt_nrmse) + "," +
                   cell(s.pearson_T) + "," + cell(r.r2_average));
  }
  return rows;
}

std::vector<SensitivityCase> default_sensitivity_cases() {
  return {{"inlet_T_x1.10", 1.10, 1.0, 1.0},
          {"inlet_xp_x1.25", 1.0, 1.0, 1.25},
          {"inlet_xa_x1.25", 1.0, 1.25, 1.0}};
}

double outlet_crossing(const StateField& theta, double level) {
  const std::size_t z = theta.n_z - 1;
  if (theta.at(0, z) < level) return 0.0;
  for (std::size_t t = 1; t < theta.n_t; ++t) {
    const double prev = theta.at(t - 1, z);
    const double cur = theta.at(t, z);
    if (cur < level) {
      const double frac = (prev - level) / (prev - cur);
      return static_cast<double>(t - 1) + frac;
    }
  }
  return static_cast<double>(theta.n_t);
}

SensitivityResponse sensitivity_sweep(const GridModel& m, const Grid& baseline,
                                      std::span<const std::size_t> levels,
                                      const SensitivityCase& c) {
  if (!(c.mult_T > 0.0) || !(c.mult_xa > 0.0) || !(c.mult_xp > 0.0))
    throw ConfigError("sensitivity multipliers must be positive");
  Grid pert = baseline;
  for (double& v : pert.inlet_T) v *= c.mult_T;
  for (double& v : pert.inlet_xa) v *= c.mult_xa;
  for (double& v : pert.inlet_xp) v *= c.mult_xp;

  const StateFields base_f = grid_forward(m, baseline);
  const StateFields pert_f = grid_forward(m, pert);

  SensitivityResponse r;
  r.name = c.name;
  r.levels.assign(levels.begin(), levels.end());
  for (const std::vector<double>& s : delta_T(base_f.T, levels))
    r.base.push_back(min_max_scale(s));
  for (const std::vector<double>& s : delta_T(pert_f.T, levels))
    r.pert.push_back(min_max_scale(s));
  r.base_cross = outlet_crossing(base_f.theta, 0.5);
  r.pert_cross = outlet_crossing(pert_f.theta, 0.5);
  return r;
}

}  // namespace reactor
