#pragma once

// Loss assembly, concentration penalties, Adam, training schedules and the
// two data augmentations. A training run records its computational graph
// once; every iteration only moves leaf values (parameters, targets,
// sensor-selection weights) and replays, so augmentation never re-records.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "reactor/domain.hpp"
#include "reactor/grid_model.hpp"

namespace reactor {

struct LossConfig {
  double lambda_a = 1.0;
  double lambda_p = 100.0;
  std::size_t t_prime = 46;  // penalty C2 covers time columns before this
  bool enable_C1 = false;    // non-negativity of the concentration fields
  bool enable_C2 = false;    // near-zero outlet concentrations early on
};

// penalties are attached to the regularized MLP configuration only
LossConfig default_loss_config(ModelVariant v);

struct TrainPhase {
  std::size_t iterations = 0;
  double lr = 0.0;
};

struct TrainSchedule {
  std::vector<TrainPhase> phases;
  bool sensor_shift = false;    // resample sensor levels every iteration
  bool gaussian_noise = false;  // perturb measured channels every iteration
  double shift_prob = 0.25;     // per direction, applied independently
  double noise_factor = 0.002;  // noise std as a fraction of the channel mean
};

// mechanistic cell trains with ten-fold larger rates than the MLP cell;
// the recurrent baselines run longer at the MLP rates
TrainSchedule default_schedule(ModelVariant v);

// mean squared error of the predicted temperatures over the (level, time)
// index sets; empty sets are a usage error
double mse_loss(const StateField& pred_T, const StateField& target_T,
                std::span<const std::size_t> levels,
                std::span<const std::size_t> times);

// lambda_a * sum min(0,xa)^2 + lambda_p * sum min(0,xp)^2 over all (t,z)
double penalty_C1(const StateField& xa, const StateField& xp,
                  const LossConfig& cfg);
// same weights on the squared outlet concentrations before t_prime
double penalty_C2(const StateField& xa, const StateField& xp,
                  const LossConfig& cfg);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;  // first and second moment estimates
  std::size_t t = 0;         // completed steps
};

// standard bias-corrected update, in place; moments are lazily sized on
// first use and must keep their shape afterwards
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& st, const AdamHyper& h);

// each level independently moves one step down/up with the given
// probabilities; a level that cannot leave the grid stays put
std::vector<std::size_t> augment_sensor_shift(
    std::span<const std::size_t> levels, std::size_t n_z, double p_down,
    double p_up, std::mt19937_64& rng);

// additive zero-mean Gaussian noise with std = factor * channel_mean
std::vector<double> augment_gaussian_noise(std::span<const double> clean,
                                           double channel_mean, double factor,
                                           std::mt19937_64& rng);

// One recorded training graph. The loss reads predicted temperatures
// through per-sensor one-hot selection weights (grid variants), so sensor
// shifts are plain set_value calls; targets and inlet series are leaves for
// the same reason. The model copy lives behind a stable pointer because the
// recorded handles reference its network shapes.
struct TrainGraph {
  ad::Tape tape;
  ModelVariant variant = ModelVariant::pde_param;
  std::size_t n_t = 0, n_z = 0;
  std::unique_ptr<GridModel> model;
  GridForward grid;     // grid variants
  SequenceForward seq;  // sequence baseline
  std::vector<ad::Var> sensor_w;  // one-hot rows, grid variants only
  ad::Var targets;                // leaf, level-major (sensor, time)
  ad::Var fit;                    // measurement mean-squared error
  ad::Var loss;                   // fit plus enabled penalties
  std::vector<ad::Var> learnable;
  std::vector<std::size_t> levels;      // training sensor levels
  std::vector<double> clean_targets;    // level-major, noise-free
  double target_mean = 0.0;             // for the noise augmentation
};

// records the forward pass of a fresh model plus the loss subgraph;
// truth supplies the measurements at the layout's training levels
std::unique_ptr<TrainGraph> build_train_graph(ModelVariant v,
                                              std::uint64_t seed,
                                              const Grid& g,
                                              const StateFields& truth,
                                              const SensorLayout& layout,
                                              const LossConfig& cfg,
                                              std::size_t gru_hidden = 8);

// flattened learnable leaves, for gradient checking and optimizer state
std::vector<double> flat_params(const TrainGraph& tg);
void set_flat_params(TrainGraph& tg, std::span<const double> p);
std::vector<double> flat_grads(const TrainGraph& tg);

struct TrainRun {
  std::uint64_t seed = 0;
  std::vector<double> history;   // total loss per iteration
  double train_fit_mse = 0.0;    // clean-measurement fit at the end
  double selection_mse = 0.0;    // value of the model-selection metric
  std::string selection_metric;  // "val2_dt_mse" or "train_mse"
  bool descent = true;           // loss at end of first phase below start
  GridModel model;
};

struct TrainResult {
  std::vector<TrainRun> runs;
  std::size_t selected = 0;  // argmin of selection_mse
};

// one seed: build, optimize through the schedule, evaluate the selection
// metric on clean inputs. Aborts with NumericError naming the iteration
// and parameter norms if the loss leaves the reals.
TrainRun train_single(ModelVariant v, std::uint64_t seed, const Grid& g,
                      const StateFields& truth, const SensorLayout& layout,
                      const LossConfig& cfg, const TrainSchedule& sched,
                      std::size_t gru_hidden = 8);

// the five-seed sweep with val2 delta-T model selection (training fit for
// the sequence baseline, which cannot predict off its own sensors)
TrainResult train_sweep(ModelVariant v, std::span<const std::uint64_t> seeds,
                        const Grid& g, const StateFields& truth,
                        const SensorLayout& layout, const LossConfig& cfg,
                        const TrainSchedule& sched,
                        std::size_t gru_hidden = 8);

// predicted temperature field of a trained graph after the latest replay;
// sequence baselines only fill their sensor levels (others stay zero)
StateField predicted_T(const TrainGraph& tg);

}  // namespace reactor
