#pragma once
// Core types shared by the reactor simulator, the grid surrogate models and
// the experiment harness. Everything is carried in nondimensional scaled
// units; see configs/canonical_params.json for the shipped defaults.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace reactor {

// error taxonomy, mapped to process exit codes by the CLI:
//   ConfigError -> 2, MissingArtifact -> 3, NumericError -> 4
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Physical constants of the fixed-bed reactor model.
// alpha(T) = alpha_c*T converts reaction rates to concentration change,
// beta(xa,T) = beta_c*xa/T scales convective heat transport.
struct ReactorParams {
  double U = 1.0;       // fluid velocity
  double k0 = 12.0;     // hydrogenation pre-exponential factor
  double K0 = 1.0;      // aromatics adsorption constant
  double Q = 0.5;       // adsorption activation energy
  double E = 1.0;       // hydrogenation activation energy
  double R = 1.0;       // gas constant (energies already scaled by it)
  double l1 = 2.0;      // aromatics kinetic exponent (numerator)
  double l2 = 1.0;      // aromatics kinetic exponent (adsorption term)
  double P = 1.0;       // pressure
  double x_h = 1.0;     // hydrogen concentration, assumed abundant
  double E_d = 2.2;     // poisoning activation energy
  double k_d0 = 0.5;    // poisoning pre-exponential factor
  double C_d = 17.5;    // catalyst poison adsorption capacity
  double gamma = 0.12;  // heat release coefficient
  double alpha_c = 1.0; // coefficient of alpha(T)
  double beta_c = 0.6;  // coefficient of beta(xa,T)
  double L = 1.0;       // reactor length
};

// throws ConfigError naming the offending field
void validate_params(const ReactorParams& p);

// Coarse space-time grid on which models operate and datasets are exported.
// dz*(n_z-1) spans the reactor length; dt is one coarse step of catalyst
// time. Inlet series are boundary conditions at level 0.
struct Grid {
  std::size_t n_z = 46;
  std::size_t n_t = 93;
  double dz = 1.0 / 45.0;
  double dt = 1.0;
  std::vector<double> inlet_xa;  // length n_t
  std::vector<double> inlet_xp;  // length n_t
  std::vector<double> inlet_T;   // length n_t
  std::vector<double> theta0;    // length n_z, initial activity
  std::vector<double> velocity;  // length n_t, U(t)
};

// empty iff all Grid invariants hold; entries name field and violated rule
std::vector<std::string> validate_grid(const Grid& g);

// grid with constant inlet series, fresh catalyst and velocity p.U;
// dz is derived from p.L
Grid make_uniform_grid(const ReactorParams& p, std::size_t n_z = 46,
                       std::size_t n_t = 93, double inlet_xa = 1.0,
                       double inlet_xp = 1.0, double inlet_T = 1.0);

enum class StateKind { xa, xp, T, theta };

const char* state_name(StateKind k);

// dense n_t x n_z array, row-major in time
struct StateField {
  StateKind kind = StateKind::T;
  std::size_t n_t = 0;
  std::size_t n_z = 0;
  std::vector<double> v;

  StateField() = default;
  StateField(StateKind k, std::size_t nt, std::size_t nz)
      : kind(k), n_t(nt), n_z(nz), v(nt * nz, 0.0) {}

  double& at(std::size_t t, std::size_t z) { return v[t * n_z + z]; }
  double at(std::size_t t, std::size_t z) const { return v[t * n_z + z]; }
};

// the four reconstructed/simulated states bundled together
struct StateFields {
  StateField xa, xp, T, theta;
};

// Sensor level sets used for training and the two validation splits.
struct SensorLayout {
  std::string name;
  std::vector<std::size_t> train_levels;
  std::vector<std::size_t> val1_levels;
  std::vector<std::size_t> val2_levels;
};

// train {0,4,...,44}, val1 {1,5,...,41}, val2 the remaining levels;
// the three sets partition {0,...,45}. Only defined for n_z = 46.
SensorLayout make_default_layout(std::size_t n_z);

// Thermocouple poles of the two-reactor industrial unit. Level 45 is listed
// on all three poles, so the sets intentionally overlap there; evaluation
// treats duplicates as distinct (set, level) pairs.
SensorLayout make_real_layout();

}  // namespace reactor
