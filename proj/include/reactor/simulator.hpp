#pragma once

// Explicit solver for the reactor PDE system: plug-flow advection with
// first-order upwind differences, reaction and deactivation source terms,
// forward Euler in time. Generates the ground-truth catalyst cycles that
// the grid models are trained on.

#include <cstdint>
#include <string>
#include <vector>

#include "reactor/domain.hpp"

namespace reactor {

// one operating scenario: inlet multipliers on the baseline series plus the
// seed of the bounded random walk applied to the concentration inlets
struct Scenario {
  std::string name = "train";
  double mult_T = 1.0;
  double mult_xa = 1.0;
  double mult_xp = 1.0;
  std::uint64_t rng_seed = 1;
  bool walk = true;  // disable for diagnostic runs with clean inlets
};

struct RateTriple {
  double r_a = 0.0;  // hydrogenation rate
  double r_p = 0.0;  // poison uptake rate
  double r_d = 0.0;  // deactivation rate
};

RateTriple rates(double xa, double xp, double T, double theta,
                 const ReactorParams& p);

// mutable solver state, one value per fine level
struct FineState {
  std::vector<double> xa, xp, T, theta;
};

struct InletValues {
  double xa = 0.0, xp = 0.0, T = 0.0;
};

// advance one explicit Euler step; level 0 is overwritten with the inlet,
// theta is clamped to [0,1] and concentrations to [0,inf)
void step_fine(FineState& s, const InletValues& inlet, const ReactorParams& p,
               double dz, double dt);

// steady z-march with time derivatives set to zero, used as the fresh-bed
// initial condition; `substeps` Euler sub-intervals per dz cell
void pss_profile(const InletValues& inlet, const std::vector<double>& theta,
                 const ReactorParams& p, double dz, int substeps,
                 std::vector<double>& xa, std::vector<double>& xp,
                 std::vector<double>& T);

// piecewise-constant bounded random walk factors for the two concentration
// inlets; one value per 5-coarse-step segment, clamped to [0.9, 1.1],
// first segment exactly 1
struct InletWalk {
  std::vector<double> wa, wp;
};
InletWalk make_inlet_walk(std::uint64_t seed, std::size_t n_segments);

// solution sampled on the fine solver grid, storage strided in time
struct FineSolution {
  std::size_t n_t = 0, n_z = 0;          // stored dims
  std::vector<double> xa, xp, T, theta;  // row-major n_t x n_z
  // solver metadata
  double cfl = 0.0;        // max U*dt_fine/dz_fine encountered
  std::size_t steps = 0;   // fine integration steps taken
  double crossing = -1.0;  // time (coarse units) at which outlet activity
                           // fell below 0.02, linearly interpolated
  double dz_fine = 0.0, dt_fine = 0.0;

  double at(const std::vector<double>& f, std::size_t t, std::size_t z) const {
    return f[t * n_z + z];
  }
};

// Integrate a full cycle. The fine grid has n_z*refz levels spaced dz/refz
// (the last refz-1 cells sit past z=L so that coarse level k aligns with
// fine column k*refz); time is integrated at dt/reft and stored every
// (reft/stored_per_step)-th step so stored dims are exact multiples of the
// coarse dims. Throws NumericError if the outlet activity never reaches the
// 0.02 stop threshold inside the n_t window.
FineSolution simulate_cycle(const Grid& g, const ReactorParams& p,
                            const Scenario& sc, int refz = 4, int reft = 240,
                            int stored_per_step = 8);

// index subsampling with stride source_dim/target_dim, no smoothing;
// source dims must be integer multiples of the target dims
StateFields downsample(const FineSolution& f, std::size_t n_t,
                       std::size_t n_z);

}  // namespace reactor
