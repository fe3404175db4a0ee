#include "reactor/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "reactor/evaluation.hpp"
#include "reactor/rng.hpp"

namespace reactor {

LossConfig default_loss_config(ModelVariant v) {
  LossConfig cfg;
  cfg.enable_C1 = cfg.enable_C2 = (v == ModelVariant::mlp_reg);
  return cfg;
}

TrainSchedule default_schedule(ModelVariant v) {
  TrainSchedule s;
  switch (v) {
    case ModelVariant::pde_param:
      // the loss valley is flat near the optimum, so most of the budget
      // goes into small-step polishing phases
      s.phases = {{4000, 1e-2}, {8000, 1e-3}, {10000, 1e-4}, {8000, 1e-5}};
      break;
    case ModelVariant::mlp:
    case ModelVariant::mlp_reg:
      s.phases = {{1000, 1e-3}, {200, 1e-4}};
      break;
    case ModelVariant::gru:
    case ModelVariant::grid_gru:
    case ModelVariant::grid_gru_augm:
      s.phases = {{6000, 1e-3}, {12000, 1e-4}, {6000, 1e-5}};
      break;
  }
  s.sensor_shift = (v == ModelVariant::grid_gru_augm);
  return s;
}

double mse_loss(const StateField& pred_T, const StateField& target_T,
                std::span<const std::size_t> levels,
                std::span<const std::size_t> times) {
  if (levels.empty() || times.empty())
    throw std::invalid_argument("mse_loss: empty index set");
  if (pred_T.n_t != target_T.n_t || pred_T.n_z != target_T.n_z)
    throw std::invalid_argument("mse_loss: field shapes differ");
  double acc = 0.0;
  for (std::size_t l : levels) {
    if (l >= pred_T.n_z)
      throw std::invalid_argument("mse_loss: level out of range");
    for (std::size_t t : times) {
      if (t >= pred_T.n_t)
        throw std::invalid_argument("mse_loss: time out of range");
      const double d = pred_T.at(t, l) - target_T.at(t, l);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(levels.size() * times.size());
}

double penalty_C1(const StateField& xa, const StateField& xp,
                  const LossConfig& cfg) {
  double sa = 0.0, sp = 0.0;
  for (double v : xa.v) {
    const double n = std::fmin(0.0, v);
    sa += n * n;
  }
  for (double v : xp.v) {
    const double n = std::fmin(0.0, v);
    sp += n * n;
  }
  return cfg.lambda_a * sa + cfg.lambda_p * sp;
}

double penalty_C2(const StateField& xa, const StateField& xp,
                  const LossConfig& cfg) {
  const std::size_t z = xa.n_z - 1;
  const std::size_t tmax = std::min(cfg.t_prime, xa.n_t);
  double sa = 0.0, sp = 0.0;
  for (std::size_t t = 0; t < tmax; ++t) {
    sa += xa.at(t, z) * xa.at(t, z);
    sp += xp.at(t, z) * xp.at(t, z);
  }
  return cfg.lambda_a * sa + cfg.lambda_p * sp;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& st, const AdamHyper& h) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  if (st.m.empty() && st.v.empty() && st.t == 0) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam_step: moment size mismatch");
  st.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * grads[i];
    st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

std::vector<std::size_t> augment_sensor_shift(
    std::span<const std::size_t> levels, std::size_t n_z, double p_down,
    double p_up, std::mt19937_64& rng) {
  if (p_down < 0.0 || p_up < 0.0 || p_down + p_up > 1.0)
    throw std::invalid_argument("augment_sensor_shift: bad probabilities");
  std::vector<std::size_t> out(levels.begin(), levels.end());
  for (std::size_t& l : out) {
    const double u = rng::unit(rng);
    if (u < p_down) {
      if (l > 0) l -= 1;  // a boundary level stays put
    } else if (u < p_down + p_up) {
      if (l + 1 < n_z) l += 1;
    }
  }
  return out;
}

std::vector<double> augment_gaussian_noise(std::span<const double> clean,
                                           double channel_mean, double factor,
                                           std::mt19937_64& rng) {
  std::vector<double> out(clean.begin(), clean.end());
  const double sd = factor * channel_mean;
  for (double& v : out) v += sd * rng::gaussian(rng);
  return out;
}

namespace {

std::vector<double> one_hot(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

// measured temperatures, level-major over (sensor, time)
std::vector<double> gather_targets(const StateFields& truth,
                                   std::span<const std::size_t> levels) {
  return gather_levels(truth.T, levels);
}

void check_layout(const SensorLayout& layout, std::size_t n_z) {
  if (layout.train_levels.empty())
    throw ConfigError("sensor layout has no training levels");
  for (std::size_t l : layout.train_levels)
    if (l >= n_z) throw ConfigError("training sensor level out of range");
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

std::unique_ptr<TrainGraph> build_train_graph(ModelVariant v,
                                              std::uint64_t seed,
                                              const Grid& g,
                                              const StateFields& truth,
                                              const SensorLayout& layout,
                                              const LossConfig& cfg,
                                              std::size_t gru_hidden) {
  check_layout(layout, g.n_z);
  if (truth.T.n_t != g.n_t || truth.T.n_z != g.n_z)
    throw ConfigError("truth fields do not match the grid dimensions");
  if (cfg.enable_C2 && cfg.t_prime > g.n_t)
    throw ConfigError("penalty cutoff t_prime exceeds the time horizon");

  auto tg = std::make_unique<TrainGraph>();
  tg->variant = v;
  tg->n_t = g.n_t;
  tg->n_z = g.n_z;
  tg->levels = layout.train_levels;
  tg->clean_targets = gather_targets(truth, tg->levels);
  tg->target_mean = mean_of(tg->clean_targets);

  const std::size_t S = tg->levels.size();
  tg->model = std::make_unique<GridModel>(
      make_grid_model(v, seed, gru_hidden, uses_grid(v) ? 3 : S));

  if (uses_mlp_cell(v)) {
    // normalization statistics come from deployable knowledge only: the
    // measured sensor temperatures and the inlet concentration ranges
    double t_lo = tg->clean_targets[0], t_hi = tg->clean_targets[0];
    for (double x : tg->clean_targets) {
      t_lo = std::fmin(t_lo, x);
      t_hi = std::fmax(t_hi, x);
    }
    double xa_hi = 0.0, xp_hi = 0.0;
    for (double x : g.inlet_xa) xa_hi = std::fmax(xa_hi, x);
    for (double x : g.inlet_xp) xp_hi = std::fmax(xp_hi, x);
    if (!(t_hi > t_lo) || !(xa_hi > 0.0) || !(xp_hi > 0.0))
      throw ConfigError("degenerate input range for the rate-shape networks");
    Mlp& a = tg->model->mlp.g_a_net;
    Mlp& p = tg->model->mlp.g_p_net;
    a.t_lo = p.t_lo = t_lo;
    a.t_hi = p.t_hi = t_hi;
    a.x_lo = p.x_lo = 0.0;
    a.x_hi = xa_hi;
    p.x_hi = xp_hi;
  }

  ad::Tape& t = tg->tape;
  std::vector<ad::Var> preds;
  preds.reserve(S * g.n_t);

  if (uses_grid(v)) {
    tg->grid = record_grid_forward(t, *tg->model, g);
    // one temperature vector per time column
    std::vector<ad::Var> tcol(g.n_t);
    std::vector<ad::Var> col(g.n_z);
    for (std::size_t j = 0; j < g.n_t; ++j) {
      for (std::size_t i = 0; i < g.n_z; ++i)
        col[i] = tg->grid.node(StateKind::T, j, i);
      tcol[j] = t.concat(col);
    }
    // selection weights start as the sensor one-hots; the shift
    // augmentation rewrites them in place
    tg->sensor_w.reserve(S);
    for (std::size_t s = 0; s < S; ++s)
      tg->sensor_w.push_back(t.leaf(one_hot(g.n_z, tg->levels[s]), g.n_z));
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t j = 0; j < g.n_t; ++j)
        preds.push_back(t.sum(t.mul(tg->sensor_w[s], tcol[j])));
    tg->learnable = tg->grid.learnable();
  } else {
    if (cfg.enable_C1 || cfg.enable_C2)
      throw ConfigError(
          "concentration penalties need the grid fields; the sequence "
          "baseline has none");
    tg->seq = record_sequence_forward(t, tg->model->gru, g);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t j = 0; j < g.n_t; ++j)
        preds.push_back(t.slice(tg->seq.y[j], s, 1));
    tg->learnable = tg->seq.learnable();
  }

  const ad::Var pred_vec = t.concat(preds);
  tg->targets = t.leaf(tg->clean_targets, tg->clean_targets.size());
  const ad::Var diff = t.sub(pred_vec, tg->targets);
  tg->fit = t.mean(t.mul(diff, diff));

  ad::Var total = tg->fit;
  if (cfg.enable_C1) {
    std::vector<ad::Var> xs(tg->grid.xa.begin(), tg->grid.xa.end());
    const ad::Var na = t.min_s(t.concat(xs), 0.0);
    std::vector<ad::Var> ps(tg->grid.xp.begin(), tg->grid.xp.end());
    const ad::Var np = t.min_s(t.concat(ps), 0.0);
    const ad::Var c1 = t.add(t.mul_s(t.sum(t.mul(na, na)), cfg.lambda_a),
                             t.mul_s(t.sum(t.mul(np, np)), cfg.lambda_p));
    total = t.add(total, c1);
  }
  if (cfg.enable_C2 && cfg.t_prime > 0) {
    std::vector<ad::Var> oa, op;
    for (std::size_t j = 0; j < cfg.t_prime; ++j) {
      oa.push_back(tg->grid.node(StateKind::xa, j, g.n_z - 1));
      op.push_back(tg->grid.node(StateKind::xp, j, g.n_z - 1));
    }
    const ad::Var va = t.concat(oa);
    const ad::Var vp = t.concat(op);
    const ad::Var c2 = t.add(t.mul_s(t.sum(t.mul(va, va)), cfg.lambda_a),
                             t.mul_s(t.sum(t.mul(vp, vp)), cfg.lambda_p));
    total = t.add(total, c2);
  }
  tg->loss = total;
  return tg;
}

std::vector<double> flat_params(const TrainGraph& tg) {
  std::vector<double> out;
  for (ad::Var v : tg.learnable) {
    const std::span<const double> x = tg.tape.value(v);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

void set_flat_params(TrainGraph& tg, std::span<const double> p) {
  std::size_t at = 0;
  for (ad::Var v : tg.learnable) {
    const std::size_t n = tg.tape.value(v).size();
    if (at + n > p.size())
      throw std::invalid_argument("set_flat_params: vector too short");
    tg.tape.set_value(v, p.subspan(at, n));
    at += n;
  }
  if (at != p.size())
    throw std::invalid_argument("set_flat_params: vector too long");
}

std::vector<double> flat_grads(const TrainGraph& tg) {
  std::vector<double> out;
  for (ad::Var v : tg.learnable) {
    const std::span<const double> x = tg.tape.grad(v);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

StateField predicted_T(const TrainGraph& tg) {
  StateField f(StateKind::T, tg.n_t, tg.n_z);
  if (uses_grid(tg.variant)) {
    for (std::size_t j = 0; j < tg.n_t; ++j)
      for (std::size_t i = 0; i < tg.n_z; ++i)
        f.at(j, i) = tg.tape.value1(tg.grid.node(StateKind::T, j, i));
  } else {
    for (std::size_t j = 0; j < tg.n_t; ++j) {
      const std::span<const double> y = tg.tape.value(tg.seq.y[j]);
      for (std::size_t s = 0; s < tg.levels.size(); ++s)
        f.at(j, tg.levels[s]) = y[s];
    }
  }
  return f;
}

namespace {

double param_norm(const TrainGraph& tg) {
  double acc = 0.0;
  for (ad::Var v : tg.learnable)
    for (double x : tg.tape.value(v)) acc += x * x;
  return std::sqrt(acc);
}

void set_clean_inputs(TrainGraph& tg, const Grid& g) {
  ad::Tape& t = tg.tape;
  t.set_value(tg.targets, tg.clean_targets);
  if (uses_grid(tg.variant)) {
    t.set_value(tg.grid.inlet_xa, g.inlet_xa);
    t.set_value(tg.grid.inlet_xp, g.inlet_xp);
    t.set_value(tg.grid.inlet_T, g.inlet_T);
    for (std::size_t s = 0; s < tg.sensor_w.size(); ++s)
      t.set_value(tg.sensor_w[s], one_hot(tg.n_z, tg.levels[s]));
  } else {
    t.set_value(tg.seq.inlet_xa, g.inlet_xa);
    t.set_value(tg.seq.inlet_xp, g.inlet_xp);
    t.set_value(tg.seq.inlet_T, g.inlet_T);
  }
}

}  // namespace

TrainRun train_single(ModelVariant v, std::uint64_t seed, const Grid& g,
                      const StateFields& truth, const SensorLayout& layout,
                      const LossConfig& cfg, const TrainSchedule& sched,
                      std::size_t gru_hidden) {
  if (sched.sensor_shift && !uses_grid(v))
    throw ConfigError(
        "sensor-shift augmentation requires a grid variant; the sequence "
        "baseline's outputs are tied to fixed sensors");
  std::unique_ptr<TrainGraph> tg =
      build_train_graph(v, seed, g, truth, layout, cfg, gru_hidden);
  ad::Tape& t = tg->tape;

  std::mt19937_64 aug_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double mean_xa = mean_of(g.inlet_xa);
  const double mean_xp = mean_of(g.inlet_xp);
  const double mean_T = mean_of(g.inlet_T);

  TrainRun run;
  run.seed = seed;

  std::vector<AdamState> opt(tg->learnable.size());
  std::size_t iters_done = 0;
  std::size_t first_phase_end = sched.phases.empty()
                                    ? 0
                                    : sched.phases.front().iterations;

  for (const TrainPhase& phase : sched.phases) {
    AdamHyper hyper;
    hyper.lr = phase.lr;
    for (std::size_t it = 0; it < phase.iterations; ++it) {
      if (sched.sensor_shift) {
        const std::vector<std::size_t> shifted = augment_sensor_shift(
            tg->levels, tg->n_z, sched.shift_prob, sched.shift_prob, aug_rng);
        for (std::size_t s = 0; s < tg->sensor_w.size(); ++s)
          t.set_value(tg->sensor_w[s], one_hot(tg->n_z, shifted[s]));
      }
      if (sched.gaussian_noise) {
        t.set_value(tg->targets,
                    augment_gaussian_noise(tg->clean_targets, tg->target_mean,
                                           sched.noise_factor, aug_rng));
        const ad::Var ia = uses_grid(v) ? tg->grid.inlet_xa : tg->seq.inlet_xa;
        const ad::Var ip = uses_grid(v) ? tg->grid.inlet_xp : tg->seq.inlet_xp;
        const ad::Var iT = uses_grid(v) ? tg->grid.inlet_T : tg->seq.inlet_T;
        t.set_value(ia, augment_gaussian_noise(g.inlet_xa, mean_xa,
                                               sched.noise_factor, aug_rng));
        t.set_value(ip, augment_gaussian_noise(g.inlet_xp, mean_xp,
                                               sched.noise_factor, aug_rng));
        t.set_value(iT, augment_gaussian_noise(g.inlet_T, mean_T,
                                               sched.noise_factor, aug_rng));
      }
      t.replay();
      const double L = t.value1(tg->loss);
      run.history.push_back(L);
      if (!std::isfinite(L))
        throw NumericError("training loss left the reals at iteration " +
                           std::to_string(iters_done) +
                           " (parameter norm " +
                           std::to_string(param_norm(*tg)) + ")");
      t.backward(tg->loss);
      for (std::size_t i = 0; i < tg->learnable.size(); ++i) {
        const std::span<const double> val = t.value(tg->learnable[i]);
        const std::span<const double> grd = t.grad(tg->learnable[i]);
        std::vector<double> p(val.begin(), val.end());
        adam_step(p, grd, opt[i], hyper);
        t.set_value(tg->learnable[i], p);
      }
      ++iters_done;
    }
  }

  set_clean_inputs(*tg, g);
  t.replay();
  run.train_fit_mse = t.value1(tg->fit);

  if (run.history.size() >= 2 && first_phase_end >= 1) {
    const std::size_t idx = std::min(first_phase_end, run.history.size()) - 1;
    run.descent = run.history[idx] < run.history.front();
  }

  const bool has_val2 = uses_grid(v) && layout.val2_levels.size() >= 2;
  if (has_val2) {
    const StateField pred = predicted_T(*tg);
    const std::vector<double> pd = gather_delta_T(pred, layout.val2_levels);
    const std::vector<double> td =
        gather_delta_T(truth.T, layout.val2_levels);
    double acc = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i)
      acc += (pd[i] - td[i]) * (pd[i] - td[i]);
    run.selection_mse = acc / static_cast<double>(pd.size());
    run.selection_metric = "val2_dt_mse";
  } else {
    run.selection_mse = run.train_fit_mse;
    run.selection_metric = "train_mse";
  }

  if (uses_grid(v)) {
    update_model(t, tg->grid, *tg->model);
  } else {
    GridForward handles;
    handles.gru = tg->seq.gru;
    update_model(t, handles, *tg->model);
  }
  run.model = *tg->model;
  return run;
}

TrainResult train_sweep(ModelVariant v, std::span<const std::uint64_t> seeds,
                        const Grid& g, const StateFields& truth,
                        const SensorLayout& layout, const LossConfig& cfg,
                        const TrainSchedule& sched, std::size_t gru_hidden) {
  if (seeds.empty()) throw ConfigError("training sweep needs at least one seed");
  // runs are independent (own tape, own rng), so they can go wide; results
  // land in seed order, which keeps the sweep deterministic
  std::vector<std::future<TrainRun>> pending;
  for (std::uint64_t s : seeds)
    pending.push_back(std::async(std::launch::async, [&, s] {
      return train_single(v, s, g, truth, layout, cfg, sched, gru_hidden);
    }));
  TrainResult res;
  for (std::future<TrainRun>& f : pending) res.runs.push_back(f.get());
  res.selected = 0;
  for (std::size_t i = 1; i < res.runs.size(); ++i)
    if (res.runs[i].selection_mse < res.runs[res.selected].selection_mse)
      res.selected = i;
  return res;
}

}  // namespace reactor
