#pragma once

// Metrics for judging reconstructions against simulator ground truth:
// temperature differences between successive sensors, normalized RMSE,
// averaged R^2, Pearson correlation, and the operating-condition
// sensitivity sweep of a trained model.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reactor/domain.hpp"
#include "reactor/grid_model.hpp"

namespace reactor {

// temperature differences between successive listed levels;
// out[k][t] = T(levels[k+1], t) - T(levels[k], t), one series per pair
std::vector<std::vector<double>> delta_T(const StateField& T,
                                         std::span<const std::size_t> levels);

double population_std(std::span<const double> xs);
double rmse(std::span<const double> pred, std::span<const double> target);

// RMSE divided by the population std of the target values; the std is
// always taken over the evaluated set itself. Constant targets leave the
// metric undefined (NumericError).
double nrmse(std::span<const double> pred, std::span<const double> target);

double r2(std::span<const double> pred, std::span<const double> truth);
// mean R^2 over the four states; undefined when any truth state is constant
double r2_avg(const StateFields& pred, const StateFields& truth);
// sample correlation; undefined for constant series
double pearson(std::span<const double> a, std::span<const double> b);

// (x - min)/(max - min); a constant input maps to all zeros
std::vector<double> min_max_scale(std::span<const double> xs);

// gathers T(level, t) for every listed level and time, level-major
std::vector<double> gather_levels(const StateField& f,
                                  std::span<const std::size_t> levels);
// all successive-pair difference series concatenated, pair-major
std::vector<double> gather_delta_T(const StateField& T,
                                   std::span<const std::size_t> levels);

// NRMSE of the pooled successive-pair differences (one std per split)
double delta_T_nrmse(const StateField& pred_T, const StateField& truth_T,
                     std::span<const std::size_t> levels);

// metrics of one sensor split; entries stay NaN when undefined for the
// split (too few levels, or a baseline that cannot predict there)
struct SplitMetrics {
  std::string split;
  double t_nrmse;
  double dt_nrmse;
  double pearson_T;
  SplitMetrics();
};

SplitMetrics eval_split(const std::string& name, const StateField& pred_T,
                        const StateField& truth_T,
                        std::span<const std::size_t> levels);

struct MetricReport {
  std::string variant;
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<SplitMetrics> splits;
  double r2_average;  // over the four reconstructed states; NaN if unset
  MetricReport();
};

// JSON document; NaN metrics serialize as null
std::string report_to_json(const MetricReport& r);
// flat rows "variant,dataset,split,t_nrmse,dt_nrmse,pearson_T,r2_avg"
// with %.12g numbers and empty cells for NaN
std::string report_csv_header();
std::vector<std::string> report_csv_rows(const MetricReport& r);

// one perturbation of the operating conditions
struct SensitivityCase {
  std::string name;
  double mult_T = 1.0, mult_xa = 1.0, mult_xp = 1.0;
};

// the three perturbations studied: inlet T x1.10, poison x1.25,
// reactant x1.25
std::vector<SensitivityCase> default_sensitivity_cases();

struct SensitivityResponse {
  std::string name;
  std::vector<std::size_t> levels;
  // min-max scaled series per successive level pair
  std::vector<std::vector<double>> base, pert;
  // interpolated time for the outlet activity channel to cross 0.5, in
  // coarse steps; n_t means "did not cross inside the window"
  double base_cross = 0.0, pert_cross = 0.0;
};

// forward the model on the baseline grid and on a copy with scaled inlet
// series, then compare the responses
SensitivityResponse sensitivity_sweep(const GridModel& m, const Grid& baseline,
                                      std::span<const std::size_t> levels,
                                      const SensitivityCase& c);

// interpolated first crossing of theta(t, outlet) below `level`; 0 when
// already below at t=0, n_t when never below
double outlet_crossing(const StateField& theta, double level);

}  // namespace reactor
