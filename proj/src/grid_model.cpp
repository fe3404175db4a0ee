#include "reactor/grid_model.hpp"

#include <cmath>
#include <string>

namespace reactor {

namespace {

void append(std::vector<ad::Var>& dst, const MlpVars& net) {
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    dst.push_back(net.W[l]);
    dst.push_back(net.b[l]);
    dst.push_back(net.gain[l]);
    dst.push_back(net.bias[l]);
  }
  dst.push_back(net.Wout);
  dst.push_back(net.bout);
}

void append(std::vector<ad::Var>& dst, const GruVars& g) {
  dst.insert(dst.end(), {g.Wz, g.Uz, g.bz, g.Wr, g.Ur, g.br, g.Wc, g.Uc,
                         g.bc, g.Wo, g.bo});
}

std::size_t count(const Mlp& net) {
  std::size_t n = 0;
  for (const DenseLayer& d : net.hidden) n += d.W.size() + d.b.size();
  for (const NormLayer& l : net.norms) n += l.gain.size() + l.bias.size();
  return n + net.output.W.size() + net.output.b.size();
}

std::size_t count(const GruParams& p) {
  return p.Wz.size() + p.Uz.size() + p.bz.size() + p.Wr.size() + p.Ur.size() +
         p.br.size() + p.Wc.size() + p.Uc.size() + p.bc.size() + p.Wo.size() +
         p.bo.size();
}

void check_grid(const Grid& g) {
  const std::vector<std::string> bad = validate_grid(g);
  if (!bad.empty()) {
    std::string msg = "invalid grid:";
    for (const std::string& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
  for (double u : g.velocity)
    if (!(u > 0.0))
      throw ConfigError("grid velocity series must be strictly positive");
}

}  // namespace

GridModel make_grid_model(ModelVariant v, std::uint64_t seed,
                          std::size_t gru_hidden, std::size_t gru_out) {
  GridModel m;
  m.variant = v;
  switch (v) {
    case ModelVariant::pde_param:
      m.pde = PdeCellParams::init_random(seed);
      break;
    case ModelVariant::mlp:
    case ModelVariant::mlp_reg:
      m.mlp = MlpCellParams::init(seed);
      break;
    case ModelVariant::gru:
      m.gru = GruParams::init(gru_hidden, 3, gru_out, seed);
      break;
    case ModelVariant::grid_gru:
    case ModelVariant::grid_gru_augm:
      m.gru = GruParams::init(gru_hidden, 3, 3, seed);
      break;
  }
  return m;
}

Checkpoint model_to_checkpoint(const GridModel& m) {
  Checkpoint c;
  c.variant = variant_name(m.variant);
  if (m.variant == ModelVariant::pde_param)
    c.tensors = to_tensors(m.pde);
  else if (uses_mlp_cell(m.variant))
    c.tensors = to_tensors(m.mlp);
  else
    c.tensors = to_tensors(m.gru);
  return c;
}

GridModel model_from_checkpoint(const Checkpoint& c) {
  GridModel m;
  m.variant = parse_variant(c.variant);
  if (m.variant == ModelVariant::pde_param)
    m.pde = pde_from_tensors(c.tensors);
  else if (uses_mlp_cell(m.variant))
    m.mlp = mlp_from_tensors(c.tensors);
  else
    m.gru = gru_from_tensors(c.tensors);
  return m;
}

std::size_t parameter_count(const GridModel& m) {
  if (m.variant == ModelVariant::pde_param) return m.pde.raw.size();
  if (uses_mlp_cell(m.variant))
    return m.mlp.raw.size() + count(m.mlp.g_a_net) + count(m.mlp.g_p_net);
  return count(m.gru);
}

ad::Var GridForward::node(StateKind k, std::size_t t, std::size_t z) const {
  const std::size_t i = t * n_z + z;
  switch (k) {
    case StateKind::xa: return xa[i];
    case StateKind::xp: return xp[i];
    case StateKind::T: return T[i];
    case StateKind::theta: return theta[i];
  }
  throw std::invalid_argument("GridForward::node: bad state kind");
}

std::vector<ad::Var> GridForward::learnable() const {
  std::vector<ad::Var> out;
  if (cell.n_raw > 0) out.push_back(cell.raw);
  if (ga.shape != nullptr) {
    append(out, ga);
    append(out, gp);
  }
  if (gru.hidden > 0) append(out, gru);
  return out;
}

GridForward record_grid_forward(ad::Tape& t, const GridModel& m,
                                const Grid& g) {
  if (!uses_grid(m.variant))
    throw ConfigError(
        "the plain gru baseline has no spatial structure; use "
        "record_sequence_forward");
  check_grid(g);

  GridForward f;
  f.variant = m.variant;
  f.n_t = g.n_t;
  f.n_z = g.n_z;
  f.inlet_xa = t.leaf(g.inlet_xa, g.n_t);
  f.inlet_xp = t.leaf(g.inlet_xp, g.n_t);
  f.inlet_T = t.leaf(g.inlet_T, g.n_t);
  f.theta0 = t.leaf(g.theta0, g.n_z);

  const std::size_t N = g.n_t * g.n_z;
  f.xa.resize(N);
  f.xp.resize(N);
  f.T.resize(N);
  f.theta.resize(N);
  auto idx = [&](std::size_t tt, std::size_t zz) { return tt * g.n_z + zz; };

  auto check_cell = [&](ad::Var v, std::size_t tt, std::size_t zz) {
    if (!std::isfinite(t.value1(v)))
      throw NumericError("grid forward produced a non-finite value at time "
                         "column " +
                         std::to_string(tt) + ", level " + std::to_string(zz));
  };

  if (uses_gru_cell(m.variant)) {
    // hidden states carry the column-to-column memory; one vector per level
    const std::vector<double> zero(m.gru.hidden, 0.0);
    f.gru = make_gru_vars(t, m.gru);
    std::vector<ad::Var> h(g.n_z);
    for (std::size_t i = 0; i < g.n_z; ++i)
      h[i] = t.constant(zero, m.gru.hidden);
    for (std::size_t j = 0; j < g.n_t; ++j) {
      f.xa[idx(j, 0)] = t.slice(f.inlet_xa, j, 1);
      f.xp[idx(j, 0)] = t.slice(f.inlet_xp, j, 1);
      f.T[idx(j, 0)] = t.slice(f.inlet_T, j, 1);
      std::vector<ad::Var> h_next(g.n_z);
      for (std::size_t i = 0; i < g.n_z; ++i) {
        f.theta[idx(j, i)] = t.clamp(t.slice(h[i], 0, 1), 0.0, 1.0);
        const ad::Var ins[] = {f.xa[idx(j, i)], f.xp[idx(j, i)],
                               f.T[idx(j, i)]};
        const ad::Var u = t.concat(ins);
        const ad::Var hp = gru_forward_var(t, f.gru, h[i], u);
        h_next[i] = hp;
        if (i + 1 < g.n_z) {
          const ad::Var y = gru_output_var(t, f.gru, hp);
          f.xa[idx(j, i + 1)] = t.slice(y, 0, 1);
          f.xp[idx(j, i + 1)] = t.slice(y, 1, 1);
          f.T[idx(j, i + 1)] = t.slice(y, 2, 1);
          check_cell(f.T[idx(j, i + 1)], j, i + 1);
        }
      }
      h = std::move(h_next);
    }
    return f;
  }

  // mechanistic cell, with closed-form or learned rate shapes
  GVarFun gfun_a, gfun_p;
  if (m.variant == ModelVariant::pde_param) {
    f.cell = make_pde_cell_vars(t, m.pde.raw);
    gfun_a = g_closed_form_var(f.cell, GKind::a);
    gfun_p = g_closed_form_var(f.cell, GKind::p);
  } else {
    f.cell = make_pde_cell_vars(t, m.mlp.raw);
    f.ga = make_mlp_vars(t, m.mlp.g_a_net);
    f.gp = make_mlp_vars(t, m.mlp.g_p_net);
    gfun_a = g_mlp_var(f.ga);
    gfun_p = g_mlp_var(f.gp);
  }

  for (std::size_t i = 0; i < g.n_z; ++i)
    f.theta[idx(0, i)] = t.slice(f.theta0, i, 1);
  for (std::size_t j = 0; j < g.n_t; ++j) {
    const double U = g.velocity[j];
    f.xa[idx(j, 0)] = t.slice(f.inlet_xa, j, 1);
    f.xp[idx(j, 0)] = t.slice(f.inlet_xp, j, 1);
    f.T[idx(j, 0)] = t.slice(f.inlet_T, j, 1);
    for (std::size_t i = 0; i < g.n_z; ++i) {
      const bool need_x = i + 1 < g.n_z;
      const bool need_theta = j + 1 < g.n_t;
      if (!need_x && !need_theta) continue;
      const CellStateVars in{f.xa[idx(j, i)], f.xp[idx(j, i)], f.T[idx(j, i)],
                             f.theta[idx(j, i)]};
      const CellStateVars out =
          pde_cell_forward_var(t, in, U, f.cell, gfun_a, gfun_p);
      if (need_x) {
        f.xa[idx(j, i + 1)] = out.xa;
        f.xp[idx(j, i + 1)] = out.xp;
        f.T[idx(j, i + 1)] = out.T;
        check_cell(out.xa, j, i + 1);
        check_cell(out.xp, j, i + 1);
        check_cell(out.T, j, i + 1);
      }
      if (need_theta) {
        f.theta[idx(j + 1, i)] = out.theta;
        check_cell(out.theta, j + 1, i);
      }
    }
  }
  return f;
}

StateFields grid_forward(const GridModel& m, const Grid& g) {
  ad::Tape t;
  const GridForward f = record_grid_forward(t, m, g);
  StateFields s{StateField(StateKind::xa, g.n_t, g.n_z),
                StateField(StateKind::xp, g.n_t, g.n_z),
                StateField(StateKind::T, g.n_t, g.n_z),
                StateField(StateKind::theta, g.n_t, g.n_z)};
  for (std::size_t j = 0; j < g.n_t; ++j) {
    for (std::size_t i = 0; i < g.n_z; ++i) {
      s.xa.at(j, i) = t.value1(f.node(StateKind::xa, j, i));
      s.xp.at(j, i) = t.value1(f.node(StateKind::xp, j, i));
      s.T.at(j, i) = t.value1(f.node(StateKind::T, j, i));
      s.theta.at(j, i) = t.value1(f.node(StateKind::theta, j, i));
    }
  }
  return s;
}

StateFields reconstruct_states(const GridModel& m, const Grid& g) {
  return grid_forward(m, g);
}

void update_model(const ad::Tape& t, const GridForward& f, GridModel& m) {
  auto copy = [&](ad::Var v, std::vector<double>& dst) {
    const std::span<const double> src = t.value(v);
    dst.assign(src.begin(), src.end());
  };
  if (f.cell.n_raw > 0) {
    const std::span<const double> raw = t.value(f.cell.raw);
    if (f.cell.n_raw == 8)
      std::copy(raw.begin(), raw.end(), m.pde.raw.begin());
    else
      std::copy(raw.begin(), raw.end(), m.mlp.raw.begin());
  }
  if (f.ga.shape != nullptr) {
    auto copy_net = [&](const MlpVars& v, Mlp& net) {
      for (std::size_t l = 0; l < v.W.size(); ++l) {
        copy(v.W[l], net.hidden[l].W);
        copy(v.b[l], net.hidden[l].b);
        copy(v.gain[l], net.norms[l].gain);
        copy(v.bias[l], net.norms[l].bias);
      }
      copy(v.Wout, net.output.W);
      copy(v.bout, net.output.b);
    };
    copy_net(f.ga, m.mlp.g_a_net);
    copy_net(f.gp, m.mlp.g_p_net);
  }
  if (f.gru.hidden > 0) {
    copy(f.gru.Wz, m.gru.Wz);
    copy(f.gru.Uz, m.gru.Uz);
    copy(f.gru.bz, m.gru.bz);
    copy(f.gru.Wr, m.gru.Wr);
    copy(f.gru.Ur, m.gru.Ur);
    copy(f.gru.br, m.gru.br);
    copy(f.gru.Wc, m.gru.Wc);
    copy(f.gru.Uc, m.gru.Uc);
    copy(f.gru.bc, m.gru.bc);
    copy(f.gru.Wo, m.gru.Wo);
    copy(f.gru.bo, m.gru.bo);
  }
}

std::vector<ad::Var> SequenceForward::learnable() const {
  std::vector<ad::Var> out;
  append(out, gru);
  return out;
}

SequenceForward record_sequence_forward(ad::Tape& t, const GruParams& p,
                                        const Grid& g) {
  if (p.in != 3)
    throw ConfigError("sequence baseline expects 3 input channels");
  check_grid(g);
  SequenceForward f;
  f.n_t = g.n_t;
  f.out = p.out;
  f.inlet_xa = t.leaf(g.inlet_xa, g.n_t);
  f.inlet_xp = t.leaf(g.inlet_xp, g.n_t);
  f.inlet_T = t.leaf(g.inlet_T, g.n_t);
  f.gru = make_gru_vars(t, p);
  ad::Var h = t.constant(std::vector<double>(p.hidden, 0.0), p.hidden);
  f.y.reserve(g.n_t);
  for (std::size_t j = 0; j < g.n_t; ++j) {
    const ad::Var ins[] = {t.slice(f.inlet_xa, j, 1),
                           t.slice(f.inlet_xp, j, 1),
                           t.slice(f.inlet_T, j, 1)};
    h = gru_forward_var(t, f.gru, h, t.concat(ins));
    f.y.push_back(gru_output_var(t, f.gru, h));
  }
  return f;
}

std::vector<double> sequence_predictions(const ad::Tape& t,
                                         const SequenceForward& f) {
  std::vector<double> out;
  out.reserve(f.n_t * f.out);
  for (ad::Var v : f.y) {
    const std::span<const double> row = t.value(v);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace reactor
