#include "reactor/domain.hpp"

#include <cmath>

namespace reactor {

void validate_params(const ReactorParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("ReactorParams.") + name +
                        " must be strictly positive and finite");
  };
  auto nonneg = [](double v, const char* name) {
    if (v < 0.0 || !std::isfinite(v))
      throw ConfigError(std::string("ReactorParams.") + name +
                        " must be nonnegative and finite");
  };
  positive(p.k0, "k0");
  positive(p.K0, "K0");
  positive(p.R, "R");
  positive(p.P, "P");
  positive(p.x_h, "x_h");
  positive(p.k_d0, "k_d0");
  positive(p.C_d, "C_d");
  positive(p.gamma, "gamma");
  positive(p.alpha_c, "alpha_c");
  positive(p.beta_c, "beta_c");
  positive(p.L, "L");
  positive(p.U, "U");
  nonneg(p.l1, "l1");
  nonneg(p.l2, "l2");
  nonneg(p.Q, "Q");
  nonneg(p.E, "E");
  nonneg(p.E_d, "E_d");
}

std::vector<std::string> validate_grid(const Grid& g) {
  std::vector<std::string> out;
  if (g.n_z < 2) out.push_back("n_z: must be at least 2");
  if (g.n_t < 2) out.push_back("n_t: must be at least 2");
  if (!(g.dz > 0.0)) out.push_back("dz: must be positive");
  if (!(g.dt > 0.0)) out.push_back("dt: must be positive");
  auto check_series = [&](const std::vector<double>& s, const char* name) {
    if (s.size() != g.n_t)
      out.push_back(std::string(name) + ": length must equal n_t");
    for (double v : s)
      if (!std::isfinite(v)) {
        out.push_back(std::string(name) + ": non-finite entry");
        break;
      }
  };
  check_series(g.inlet_xa, "inlet_xa");
  check_series(g.inlet_xp, "inlet_xp");
  check_series(g.inlet_T, "inlet_T");
  check_series(g.velocity, "velocity");
  if (g.theta0.size() != g.n_z) {
    out.push_back("theta0: length must equal n_z");
  } else {
    for (double v : g.theta0)
      if (!(v >= 0.0 && v <= 1.0)) {
        out.push_back("theta0: entries must lie in [0,1]");
        break;
      }
  }
  return out;
}

Grid make_uniform_grid(const ReactorParams& p, std::size_t n_z, std::size_t n_t,
                       double inlet_xa, double inlet_xp, double inlet_T) {
  if (n_z < 2 || n_t < 2)
    throw ConfigError("make_uniform_grid: n_z and n_t must be at least 2");
  Grid g;
  g.n_z = n_z;
  g.n_t = n_t;
  g.dz = p.L / static_cast<double>(n_z - 1);
  g.dt = 1.0;
  g.inlet_xa.assign(n_t, inlet_xa);
  g.inlet_xp.assign(n_t, inlet_xp);
  g.inlet_T.assign(n_t, inlet_T);
  g.theta0.assign(n_z, 1.0);
  g.velocity.assign(n_t, p.U);
  return g;
}

const char* state_name(StateKind k) {
  switch (k) {
    case StateKind::xa: return "xa";
    case StateKind::xp: return "xp";
    case StateKind::T: return "T";
    case StateKind::theta: return "theta";
  }
  return "?";
}

SensorLayout make_default_layout(std::size_t n_z) {
  if (n_z != 46)
    throw ConfigError("make_default_layout: only defined for n_z = 46; "
                      "supply explicit level lists for other grids");
  SensorLayout lay;
  lay.name = "synthetic-46";
  std::vector<bool> used(n_z, false);
  for (std::size_t z = 0; z <= 44; z += 4) {
    lay.train_levels.push_back(z);
    used[z] = true;
  }
  for (std::size_t z = 1; z <= 41; z += 4) {
    lay.val1_levels.push_back(z);
    used[z] = true;
  }
  for (std::size_t z = 0; z < n_z; ++z)
    if (!used[z]) lay.val2_levels.push_back(z);
  return lay;
}

SensorLayout make_real_layout() {
  SensorLayout lay;
  lay.name = "real-unit";
  lay.train_levels = {8, 16, 20, 25, 28, 31, 34, 37, 40, 43, 45};
  lay.val1_levels = {24, 27, 30, 33, 36, 39, 42, 45};
  lay.val2_levels = {23, 26, 29, 32, 35, 38, 41, 45};
  return lay;
}

}  // namespace reactor
