#include "reactor/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "reactor/rng.hpp"

namespace reactor {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

RateTriple rates(double xa, double xp, double T, double theta,
                 const ReactorParams& p) {
  if (!std::isfinite(xa) || !std::isfinite(xp) || !std::isfinite(T) ||
      !std::isfinite(theta))
    throw NumericError("rates: non-finite input (xa=" + fmt(xa) +
                       ", xp=" + fmt(xp) + ", T=" + fmt(T) +
                       ", theta=" + fmt(theta) + ")");
  if (!(T > 0.0))
    throw NumericError("rates: temperature must be positive, got " + fmt(T));
  const double rt = p.R * T;
  const double adsorption =
      1.0 + p.K0 * std::exp(-p.Q / rt) * p.P * std::pow(xa, p.l2);
  RateTriple r;
  r.r_a = p.k0 * p.K0 * std::exp((-p.Q - p.E) / rt) / adsorption * p.P * p.P *
          std::pow(xa, p.l1) * p.x_h * theta;
  r.r_d = p.k_d0 * std::exp(-p.E_d / rt) * p.P * xp * theta;
  r.r_p = r.r_d * p.C_d * theta;
  return r;
}

void step_fine(FineState& s, const InletValues& inlet, const ReactorParams& p,
               double dz, double dt) {
  const double cfl = p.U * dt / dz;
  if (!(cfl <= 0.9))
    throw ConfigError("step_fine: CFL condition violated: U*dt/dz = " +
                      fmt(cfl) + " > 0.9 (U=" + fmt(p.U) + ", dt=" + fmt(dt) +
                      ", dz=" + fmt(dz) + ")");
  const std::size_t n = s.xa.size();
  if (n < 2 || s.xp.size() != n || s.T.size() != n || s.theta.size() != n)
    throw std::invalid_argument("step_fine: state fields must share a length of at least 2");
  const double adv = p.U / dz;
  // sweep from the outlet down so the upwind neighbour i-1 is still the old
  // value when level i is overwritten; no scratch copies needed
  for (std::size_t i = n; i-- > 1;) {
    const RateTriple r = rates(s.xa[i], s.xp[i], s.T[i], s.theta[i], p);
    const double alpha = p.alpha_c * s.T[i];
    const double beta = p.beta_c * s.xa[i] / s.T[i];
    const double dxa = -adv * (s.xa[i] - s.xa[i - 1]) - alpha * r.r_a;
    const double dxp = -adv * (s.xp[i] - s.xp[i - 1]) - alpha * r.r_p;
    const double dT = -beta * adv * (s.T[i] - s.T[i - 1]) + p.gamma * r.r_a;
    s.xa[i] = std::max(s.xa[i] + dt * dxa, 0.0);
    s.xp[i] = std::max(s.xp[i] + dt * dxp, 0.0);
    s.T[i] += dt * dT;
    s.theta[i] = std::clamp(s.theta[i] - dt * r.r_d, 0.0, 1.0);
  }
  // the catalyst at the inlet face deactivates too; the fluid state there is
  // the boundary condition
  const RateTriple r0 = rates(s.xa[0], s.xp[0], s.T[0], s.theta[0], p);
  s.theta[0] = std::clamp(s.theta[0] - dt * r0.r_d, 0.0, 1.0);
  s.xa[0] = inlet.xa;
  s.xp[0] = inlet.xp;
  s.T[0] = inlet.T;
}

void pss_profile(const InletValues& inlet, const std::vector<double>& theta,
                 const ReactorParams& p, double dz, int substeps,
                 std::vector<double>& xa, std::vector<double>& xp,
                 std::vector<double>& T) {
  const std::size_t n = theta.size();
  if (n < 2) throw std::invalid_argument("pss_profile: need at least 2 levels");
  if (substeps < 1) throw std::invalid_argument("pss_profile: substeps must be positive");
  xa.assign(n, 0.0);
  xp.assign(n, 0.0);
  T.assign(n, 0.0);
  xa[0] = inlet.xa;
  xp[0] = inlet.xp;
  T[0] = inlet.T;
  const double h = dz / substeps;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double a = xa[i], pp = xp[i], t = T[i];
    for (int k = 0; k < substeps; ++k) {
      const RateTriple r = rates(std::max(a, 0.0), std::max(pp, 0.0), t, theta[i], p);
      const double alpha = p.alpha_c * t;
      // beta guarded away from 0 so the heat slope stays 0/0-safe as xa -> 0
      const double beta = p.beta_c * std::max(a, 1e-12) / t;
      a += h * (-alpha * r.r_a / p.U);
      pp += h * (-alpha * r.r_p / p.U);
      t += h * (p.gamma * r.r_a / (beta * p.U));
      a = std::max(a, 0.0);
      pp = std::max(pp, 0.0);
    }
    xa[i + 1] = a;
    xp[i + 1] = pp;
    T[i + 1] = t;
  }
}

InletWalk make_inlet_walk(std::uint64_t seed, std::size_t n_segments) {
  std::mt19937_64 rng(seed);
  InletWalk w;
  w.wa.resize(n_segments);
  w.wp.resize(n_segments);
  double va = 1.0, vp = 1.0;
  for (std::size_t k = 0; k < n_segments; ++k) {
    w.wa[k] = va;
    w.wp[k] = vp;
    va = std::clamp(va + rng::uniform(rng, -0.04, 0.04), 0.9, 1.1);
    vp = std::clamp(vp + rng::uniform(rng, -0.04, 0.04), 0.9, 1.1);
  }
  return w;
}

FineSolution simulate_cycle(const Grid& g, const ReactorParams& p,
                            const Scenario& sc, int refz, int reft,
                            int stored_per_step) {
  validate_params(p);
  const auto violations = validate_grid(g);
  if (!violations.empty())
    throw ConfigError("simulate_cycle: invalid grid: " + violations.front());
  if (refz < 1 || reft < 1 || stored_per_step < 1)
    throw ConfigError("simulate_cycle: refinement factors must be positive");
  if (reft % stored_per_step != 0)
    throw ConfigError("simulate_cycle: reft must be a multiple of stored_per_step");
  if (!(sc.mult_T > 0.0) || !(sc.mult_xa > 0.0) || !(sc.mult_xp > 0.0))
    throw ConfigError("simulate_cycle: scenario multipliers must be positive");
  for (double u : g.velocity)
    if (!(u > 0.0))
      throw ConfigError("simulate_cycle: velocity entries must be positive");

  const std::size_t nzf = g.n_z * static_cast<std::size_t>(refz);
  const double dzf = g.dz / refz;
  const double dtf = g.dt / reft;
  const std::size_t stride = static_cast<std::size_t>(reft / stored_per_step);
  const std::size_t rows = g.n_t * static_cast<std::size_t>(stored_per_step);
  const std::size_t n_steps = (rows - 1) * stride;
  const std::size_t outlet = (g.n_z - 1) * static_cast<std::size_t>(refz);
  const std::size_t reft_u = static_cast<std::size_t>(reft);

  const std::size_t nseg = (g.n_t + 4) / 5;
  InletWalk walk = make_inlet_walk(sc.rng_seed, nseg);
  if (!sc.walk) {
    std::fill(walk.wa.begin(), walk.wa.end(), 1.0);
    std::fill(walk.wp.begin(), walk.wp.end(), 1.0);
  }

  // the fine solver holds every coarse-step value constant over its interval
  auto coarse_index = [&](std::size_t fine_step) {
    return std::min(fine_step / reft_u, g.n_t - 1);
  };
  auto inlet_at = [&](std::size_t fine_step) {
    const std::size_t tc = coarse_index(fine_step);
    const std::size_t seg = std::min(tc / 5, nseg - 1);
    return InletValues{g.inlet_xa[tc] * sc.mult_xa * walk.wa[seg],
                       g.inlet_xp[tc] * sc.mult_xp * walk.wp[seg],
                       g.inlet_T[tc] * sc.mult_T};
  };

  FineSolution f;
  f.n_t = rows;
  f.n_z = nzf;
  f.dz_fine = dzf;
  f.dt_fine = dtf;
  f.xa.resize(rows * nzf);
  f.xp.resize(rows * nzf);
  f.T.resize(rows * nzf);
  f.theta.resize(rows * nzf);

  FineState s;
  s.theta.resize(nzf);
  for (std::size_t i = 0; i < nzf; ++i)
    s.theta[i] = g.theta0[std::min(i / static_cast<std::size_t>(refz), g.n_z - 1)];
  ReactorParams pstep = p;
  pstep.U = g.velocity[0];
  pss_profile(inlet_at(0), s.theta, pstep, dzf, 20, s.xa, s.xp, s.T);

  auto store_row = [&](std::size_t row) {
    std::copy(s.xa.begin(), s.xa.end(), f.xa.begin() + row * nzf);
    std::copy(s.xp.begin(), s.xp.end(), f.xp.begin() + row * nzf);
    std::copy(s.T.begin(), s.T.end(), f.T.begin() + row * nzf);
    std::copy(s.theta.begin(), s.theta.end(), f.theta.begin() + row * nzf);
    for (std::size_t i = 0; i < nzf; ++i)
      if (!std::isfinite(s.xa[i]) || !std::isfinite(s.xp[i]) ||
          !std::isfinite(s.T[i]) || !std::isfinite(s.theta[i]))
        throw NumericError("simulate_cycle: non-finite state at stored row " +
                           std::to_string(row) + ", fine level " + std::to_string(i));
  };
  store_row(0);

  double theta_out_prev = s.theta[outlet];
  if (theta_out_prev < 0.02) f.crossing = 0.0;
  for (std::size_t step = 1; step <= n_steps; ++step) {
    pstep.U = g.velocity[coarse_index(step)];
    try {
      step_fine(s, inlet_at(step), pstep, dzf, dtf);
    } catch (const NumericError& e) {
      throw NumericError("simulate_cycle: fine step " + std::to_string(step) +
                         ": " + e.what());
    }
    f.cfl = std::max(f.cfl, pstep.U * dtf / dzf);
    const double theta_out = s.theta[outlet];
    if (f.crossing < 0.0 && theta_out < 0.02) {
      const double frac = (theta_out_prev - 0.02) / (theta_out_prev - theta_out);
      f.crossing = (static_cast<double>(step - 1) + frac) * dtf / g.dt;
    }
    theta_out_prev = theta_out;
    if (step % stride == 0) store_row(step / stride);
  }
  f.steps = n_steps;
  if (f.crossing < 0.0)
    throw NumericError(
        "simulate_cycle: outlet activity stayed above the 0.02 stop threshold "
        "for the whole window (final outlet theta = " + fmt(theta_out_prev) +
        " after " + std::to_string(n_steps) + " fine steps)");
  return f;
}

StateFields downsample(const FineSolution& f, std::size_t n_t, std::size_t n_z) {
  if (n_t < 1 || n_z < 1)
    throw std::invalid_argument("downsample: target dims must be positive");
  if (n_t > f.n_t || n_z > f.n_z)
    throw std::invalid_argument("downsample: target denser than source");
  if (f.n_t % n_t != 0 || f.n_z % n_z != 0)
    throw std::invalid_argument(
        "downsample: source dims must be integer multiples of target dims");
  const std::size_t st = f.n_t / n_t;
  const std::size_t sz = f.n_z / n_z;
  StateFields out{StateField(StateKind::xa, n_t, n_z),
                  StateField(StateKind::xp, n_t, n_z),
                  StateField(StateKind::T, n_t, n_z),
                  StateField(StateKind::theta, n_t, n_z)};
  for (std::size_t t = 0; t < n_t; ++t)
    for (std::size_t z = 0; z < n_z; ++z) {
      const std::size_t src = (t * st) * f.n_z + z * sz;
      out.xa.at(t, z) = f.xa[src];
      out.xp.at(t, z) = f.xp[src];
      out.T.at(t, z) = f.T[src];
      out.theta.at(t, z) = f.theta[src];
    }
  return out;
}

}  // namespace reactor
