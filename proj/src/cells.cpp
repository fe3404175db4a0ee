#include "reactor/cells.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "reactor/rng.hpp"

namespace reactor {

namespace {

// fan-in scaled uniform entries, the shared init for all dense weights
void fill_fan_in(std::vector<double>& w, std::size_t fan_in,
                 std::mt19937_64& g) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w) v = rng::uniform(g, -s, s);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

ModelVariant parse_variant(const std::string& name) {
  if (name == "pde-param") return ModelVariant::pde_param;
  if (name == "mlp") return ModelVariant::mlp;
  if (name == "mlp-reg") return ModelVariant::mlp_reg;
  if (name == "gru") return ModelVariant::gru;
  if (name == "grid-gru") return ModelVariant::grid_gru;
  if (name == "grid-gru-augm") return ModelVariant::grid_gru_augm;
  throw ConfigError("unknown model variant '" + name +
                    "' (expected pde-param, mlp, mlp-reg, gru, grid-gru or "
                    "grid-gru-augm)");
}

const char* variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::pde_param: return "pde-param";
    case ModelVariant::mlp: return "mlp";
    case ModelVariant::mlp_reg: return "mlp-reg";
    case ModelVariant::gru: return "gru";
    case ModelVariant::grid_gru: return "grid-gru";
    case ModelVariant::grid_gru_augm: return "grid-gru-augm";
  }
  return "?";
}

bool uses_grid(ModelVariant v) { return v != ModelVariant::gru; }

bool uses_mlp_cell(ModelVariant v) {
  return v == ModelVariant::mlp || v == ModelVariant::mlp_reg;
}

bool uses_gru_cell(ModelVariant v) {
  return v == ModelVariant::gru || v == ModelVariant::grid_gru ||
         v == ModelVariant::grid_gru_augm;
}

double softplus(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double softplus_inv(double y) {
  if (!(y > 0.0))
    throw std::invalid_argument("softplus_inv: argument must be positive");
  if (y > 20.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

// ---------------------------------------------------------------------------
// mechanistic cell

const std::array<const char*, 8> PdeCellParams::names = {
    "k_a", "k_p", "k_T", "k_theta", "k_1", "k_2", "k_3", "k_4"};

PdeCellParams PdeCellParams::init_default() {
  PdeCellParams p;
  p.raw.fill(softplus_inv(0.1));
  return p;
}

PdeCellParams PdeCellParams::init_random(std::uint64_t seed) {
  if (seed == 0) return init_default();
  std::mt19937_64 g(seed);
  PdeCellParams p;
  for (double& r : p.raw)
    r = softplus_inv(0.1 * std::exp(rng::uniform(g, -1.0, 1.0)));
  return p;
}

PdeCellParams PdeCellParams::from_values(const std::array<double, 8>& k) {
  PdeCellParams p;
  for (std::size_t i = 0; i < 8; ++i) p.raw[i] = softplus_inv(k[i]);
  return p;
}

std::array<double, 8> PdeCellParams::mapped() const {
  std::array<double, 8> k{};
  for (std::size_t i = 0; i < 8; ++i) k[i] = softplus(raw[i]);
  return k;
}

double g_closed_form(double T, double x, GKind which, const PdeCellParams& p) {
  if (!(T > 0.0))
    throw NumericError("g_closed_form: temperature must be positive");
  const std::array<double, 8> k = p.mapped();
  if (which == GKind::a) return std::exp(-k[6] / T) * T * x;
  return std::exp(-k[7] / T) * x;
}

CellState pde_cell_forward(const CellState& in, double U,
                           const PdeCellParams& p, const GFun& g_a,
                           const GFun& g_p) {
  if (!(U > 0.0))
    throw std::invalid_argument("pde_cell_forward: U must be positive");
  const std::array<double, 8> k = p.mapped();
  const double ga = g_a(in.T, in.xa);
  const double gp = g_p(in.T, in.xp);
  CellState out;
  out.xa = in.xa - k[0] / U * ga * in.theta;
  out.xp = in.xp - k[1] / U * in.T * gp * in.theta * in.theta;
  out.T = in.T + k[2] * ga * in.theta / (U * (k[4] + k[5] * in.xa));
  out.theta = std::clamp(in.theta - k[3] * gp * in.theta, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// MLP rate shapes

Mlp make_mlp(const std::vector<std::size_t>& hidden_widths,
             std::uint64_t seed) {
  if (hidden_widths.empty())
    throw std::invalid_argument("make_mlp: need at least one hidden layer");
  std::mt19937_64 g(seed);
  Mlp net;
  std::size_t in = 2;
  for (std::size_t width : hidden_widths) {
    DenseLayer d;
    d.in = in;
    d.out = width;
    d.W.resize(width * in);
    d.b.assign(width, 0.0);
    fill_fan_in(d.W, in, g);
    net.hidden.push_back(std::move(d));
    NormLayer n;
    n.gain.assign(width, 1.0);
    n.bias.assign(width, 0.0);
    net.norms.push_back(std::move(n));
    in = width;
  }
  net.output.in = in;
  net.output.out = 1;
  net.output.W.resize(in);
  net.output.b.assign(1, 0.0);
  fill_fan_in(net.output.W, in, g);
  return net;
}

double mlp_forward(const Mlp& net, double T, double x) {
  require(net.t_hi > net.t_lo && net.x_hi > net.x_lo,
          "mlp_forward: degenerate input normalization range");
  std::vector<double> h{(T - net.t_lo) / (net.t_hi - net.t_lo),
                        (x - net.x_lo) / (net.x_hi - net.x_lo)};
  std::vector<double> a;
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    const DenseLayer& d = net.hidden[l];
    a.assign(d.out, 0.0);
    for (std::size_t r = 0; r < d.out; ++r) {
      double acc = d.b[r];
      for (std::size_t c = 0; c < d.in; ++c) acc += d.W[r * d.in + c] * h[c];
      a[r] = acc;
    }
    // layer norm with the zero-variance convention: all-equal rows emit
    // zeros, then the affine terms
    double mu = 0.0;
    for (double v : a) mu += v;
    mu /= static_cast<double>(a.size());
    double var = 0.0;
    for (double v : a) var += (v - mu) * (v - mu);
    var /= static_cast<double>(a.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    const NormLayer& n = net.norms[l];
    h.assign(d.out, 0.0);
    for (std::size_t r = 0; r < d.out; ++r) {
      const double y = (a[r] - mu) * inv * n.gain[r] + n.bias[r];
      h[r] = y > 0.0 ? y : 0.0;  // relu
    }
  }
  double o = net.output.b[0];
  for (std::size_t c = 0; c < net.output.in; ++c) o += net.output.W[c] * h[c];
  return softplus(o);
}

MlpCellParams MlpCellParams::init(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  MlpCellParams p;
  p.raw.fill(softplus_inv(0.1));
  p.g_a_net = make_mlp({32, 64, 32}, g());
  p.g_p_net = make_mlp({32, 32}, g());
  return p;
}

std::array<double, 6> MlpCellParams::mapped() const {
  std::array<double, 6> k{};
  for (std::size_t i = 0; i < 6; ++i) k[i] = softplus(raw[i]);
  return k;
}

// ---------------------------------------------------------------------------
// gated recurrent unit

GruParams GruParams::init(std::size_t hidden, std::size_t in, std::size_t out,
                          std::uint64_t seed) {
  if (hidden == 0 || in == 0 || out == 0)
    throw std::invalid_argument("GruParams::init: zero dimension");
  std::mt19937_64 g(seed);
  GruParams p;
  p.hidden = hidden;
  p.in = in;
  p.out = out;
  auto gate = [&](std::vector<double>& W, std::vector<double>& U,
                  std::vector<double>& b) {
    W.resize(hidden * in);
    U.resize(hidden * hidden);
    b.assign(hidden, 0.0);
    fill_fan_in(W, in, g);
    fill_fan_in(U, hidden, g);
  };
  gate(p.Wz, p.Uz, p.bz);
  gate(p.Wr, p.Ur, p.br);
  gate(p.Wc, p.Uc, p.bc);
  p.Wo.resize(out * hidden);
  p.bo.assign(out, 0.0);
  fill_fan_in(p.Wo, hidden, g);
  return p;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<double> gru_forward(const GruParams& p, std::span<const double> h,
                                std::span<const double> u) {
  if (h.size() != p.hidden || u.size() != p.in)
    throw std::invalid_argument("gru_forward: shape mismatch");
  const std::size_t H = p.hidden, D = p.in;
  std::vector<double> z(H), r(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    double az = p.bz[i], ar = p.br[i];
    for (std::size_t j = 0; j < D; ++j) {
      az += p.Wz[i * D + j] * u[j];
      ar += p.Wr[i * D + j] * u[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      az += p.Uz[i * H + j] * h[j];
      ar += p.Ur[i * H + j] * h[j];
    }
    z[i] = sigmoid(az);
    r[i] = sigmoid(ar);
  }
  for (std::size_t i = 0; i < H; ++i) {
    double ac = p.bc[i];
    for (std::size_t j = 0; j < D; ++j) ac += p.Wc[i * D + j] * u[j];
    for (std::size_t j = 0; j < H; ++j) ac += p.Uc[i * H + j] * (r[j] * h[j]);
    const double cand = std::tanh(ac);
    out[i] = z[i] * h[i] + (1.0 - z[i]) * cand;
  }
  return out;
}

std::vector<double> gru_output(const GruParams& p, std::span<const double> h) {
  if (h.size() != p.hidden)
    throw std::invalid_argument("gru_output: shape mismatch");
  std::vector<double> y(p.out);
  for (std::size_t r = 0; r < p.out; ++r) {
    double acc = p.bo[r];
    for (std::size_t c = 0; c < p.hidden; ++c)
      acc += p.Wo[r * p.hidden + c] * h[c];
    y[r] = acc;
  }
  return y;
}

// ---------------------------------------------------------------------------
// tape builders

PdeCellVars make_pde_cell_vars(ad::Tape& t, std::span<const double> raw_init) {
  if (raw_init.size() != 6 && raw_init.size() != 8)
    throw std::invalid_argument("make_pde_cell_vars: expected 6 or 8 raws");
  PdeCellVars c;
  c.n_raw = raw_init.size();
  c.raw = t.leaf(raw_init, raw_init.size());
  for (std::size_t i = 0; i < c.n_raw; ++i)
    c.k[i] = t.softplus(t.slice(c.raw, i, 1));
  return c;
}

MlpVars make_mlp_vars(ad::Tape& t, const Mlp& init) {
  MlpVars v;
  v.shape = &init;
  for (std::size_t l = 0; l < init.hidden.size(); ++l) {
    const DenseLayer& d = init.hidden[l];
    v.W.push_back(t.leaf(d.W, d.out, d.in));
    v.b.push_back(t.leaf(d.b, d.out));
    v.gain.push_back(t.leaf(init.norms[l].gain, d.out));
    v.bias.push_back(t.leaf(init.norms[l].bias, d.out));
  }
  v.Wout = t.leaf(init.output.W, 1, init.output.in);
  v.bout = t.leaf(init.output.b, 1);
  return v;
}

ad::Var mlp_forward_var(ad::Tape& t, const MlpVars& net, ad::Var T, ad::Var x) {
  const Mlp& s = *net.shape;
  require(s.t_hi > s.t_lo && s.x_hi > s.x_lo,
          "mlp_forward_var: degenerate input normalization range");
  const ad::Var u0 = t.mul_s(t.add_s(T, -s.t_lo), 1.0 / (s.t_hi - s.t_lo));
  const ad::Var u1 = t.mul_s(t.add_s(x, -s.x_lo), 1.0 / (s.x_hi - s.x_lo));
  const ad::Var ins[] = {u0, u1};
  ad::Var h = t.concat(ins);
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    h = t.relu(t.layer_norm(t.affine(net.W[l], h, net.b[l]), net.gain[l],
                            net.bias[l]));
  }
  return t.softplus(t.affine(net.Wout, h, net.bout));
}

GruVars make_gru_vars(ad::Tape& t, const GruParams& init) {
  GruVars v;
  v.hidden = init.hidden;
  v.in = init.in;
  v.out = init.out;
  v.Wz = t.leaf(init.Wz, init.hidden, init.in);
  v.Uz = t.leaf(init.Uz, init.hidden, init.hidden);
  v.bz = t.leaf(init.bz, init.hidden);
  v.Wr = t.leaf(init.Wr, init.hidden, init.in);
  v.Ur = t.leaf(init.Ur, init.hidden, init.hidden);
  v.br = t.leaf(init.br, init.hidden);
  v.Wc = t.leaf(init.Wc, init.hidden, init.in);
  v.Uc = t.leaf(init.Uc, init.hidden, init.hidden);
  v.bc = t.leaf(init.bc, init.hidden);
  v.Wo = t.leaf(init.Wo, init.out, init.hidden);
  v.bo = t.leaf(init.bo, init.out);
  return v;
}

ad::Var gru_forward_var(ad::Tape& t, const GruVars& g, ad::Var h, ad::Var u) {
  return t.gru_cell(h, u, g.Wz, g.Uz, g.bz, g.Wr, g.Ur, g.br, g.Wc, g.Uc,
                    g.bc);
}

ad::Var gru_output_var(ad::Tape& t, const GruVars& g, ad::Var h) {
  return t.affine(g.Wo, h, g.bo);
}

GVarFun g_closed_form_var(const PdeCellVars& cell, GKind which) {
  if (cell.n_raw != 8)
    throw std::invalid_argument(
        "g_closed_form_var: cell carries no k_3/k_4 nodes");
  if (which == GKind::a) {
    const ad::Var k3 = cell.k[6];
    return [k3](ad::Tape& t, ad::Var T, ad::Var x) {
      return t.mul(t.mul(t.exp(t.neg(t.div(k3, T))), T), x);
    };
  }
  const ad::Var k4 = cell.k[7];
  return [k4](ad::Tape& t, ad::Var T, ad::Var x) {
    return t.mul(t.exp(t.neg(t.div(k4, T))), x);
  };
}

GVarFun g_mlp_var(const MlpVars& net) {
  return [net](ad::Tape& t, ad::Var T, ad::Var x) {
    return mlp_forward_var(t, net, T, x);
  };
}

CellStateVars pde_cell_forward_var(ad::Tape& t, const CellStateVars& in,
                                   double U, const PdeCellVars& cell,
                                   const GVarFun& g_a, const GVarFun& g_p) {
  if (!(U > 0.0))
    throw std::invalid_argument("pde_cell_forward_var: U must be positive");
  const ad::Var ga = g_a(t, in.T, in.xa);
  const ad::Var gp = g_p(t, in.T, in.xp);
  CellStateVars out;
  out.xa = t.sub(in.xa, t.mul(t.mul(t.mul_s(cell.k[0], 1.0 / U), ga), in.theta));
  out.xp = t.sub(in.xp, t.mul(t.mul(t.mul(t.mul_s(cell.k[1], 1.0 / U), in.T), gp),
                              t.mul(in.theta, in.theta)));
  const ad::Var denom = t.mul_s(t.add(cell.k[4], t.mul(cell.k[5], in.xa)), U);
  out.T = t.add(in.T, t.div(t.mul(t.mul(cell.k[2], ga), in.theta), denom));
  out.theta =
      t.clamp(t.sub(in.theta, t.mul(t.mul(cell.k[3], gp), in.theta)), 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// checkpoints

const NamedTensor& Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t;
  throw MissingArtifact("checkpoint tensor missing: " + name);
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  nlohmann::json j;
  j["format_version"] = c.format_version;
  j["variant"] = c.variant;
  nlohmann::json ts = nlohmann::json::array();
  for (const NamedTensor& t : c.tensors) {
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["values"] = t.values;
    ts.push_back(std::move(e));
  }
  j["tensors"] = std::move(ts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("checkpoint not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint parse error in " + path + ": " + e.what());
  }
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    c.variant = j.at("variant").get<std::string>();
    for (const auto& e : j.at("tensors")) {
      NamedTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<std::vector<std::size_t>>();
      t.values = e.at("values").get<std::vector<double>>();
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint schema error in " + path + ": " + e.what());
  }
  if (c.format_version != 1)
    throw ConfigError("unsupported checkpoint format_version in " + path);
  for (const NamedTensor& t : c.tensors) {
    std::size_t n = 1;
    for (std::size_t d : t.shape) n *= d;
    if (n != t.values.size())
      throw ConfigError("checkpoint tensor '" + t.name +
                        "' shape does not match its value count in " + path);
  }
  return c;
}

namespace {

NamedTensor tensor1(const std::string& name, std::span<const double> v) {
  return NamedTensor{name, {v.size()}, {v.begin(), v.end()}};
}

NamedTensor tensor2(const std::string& name, std::size_t rows,
                    std::size_t cols, std::span<const double> v) {
  return NamedTensor{name, {rows, cols}, {v.begin(), v.end()}};
}

void mlp_tensors(const std::string& prefix, const Mlp& net,
                 std::vector<NamedTensor>& out) {
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    const std::string base = prefix + ".h" + std::to_string(l);
    out.push_back(tensor2(base + ".W", net.hidden[l].out, net.hidden[l].in,
                          net.hidden[l].W));
    out.push_back(tensor1(base + ".b", net.hidden[l].b));
    out.push_back(tensor1(base + ".gain", net.norms[l].gain));
    out.push_back(tensor1(base + ".bias", net.norms[l].bias));
  }
  out.push_back(tensor2(prefix + ".out.W", 1, net.output.in, net.output.W));
  out.push_back(tensor1(prefix + ".out.b", net.output.b));
  out.push_back(tensor1(prefix + ".range",
                        std::array<double, 4>{net.t_lo, net.t_hi, net.x_lo,
                                              net.x_hi}));
}

Mlp mlp_from(const Checkpoint& c, const std::string& prefix) {
  Mlp net;
  for (std::size_t l = 0;; ++l) {
    const std::string base = prefix + ".h" + std::to_string(l);
    bool present = false;
    for (const NamedTensor& t : c.tensors)
      if (t.name == base + ".W") present = true;
    if (!present) break;
    const NamedTensor& W = c.find(base + ".W");
    if (W.shape.size() != 2)
      throw ConfigError("checkpoint tensor '" + W.name + "' must be 2-d");
    DenseLayer d;
    d.out = W.shape[0];
    d.in = W.shape[1];
    d.W = W.values;
    d.b = c.find(base + ".b").values;
    NormLayer n;
    n.gain = c.find(base + ".gain").values;
    n.bias = c.find(base + ".bias").values;
    net.hidden.push_back(std::move(d));
    net.norms.push_back(std::move(n));
  }
  if (net.hidden.empty())
    throw ConfigError("checkpoint carries no '" + prefix + "' layers");
  const NamedTensor& Wo = c.find(prefix + ".out.W");
  net.output.out = 1;
  net.output.in = net.hidden.back().out;
  net.output.W = Wo.values;
  net.output.b = c.find(prefix + ".out.b").values;
  const NamedTensor& r = c.find(prefix + ".range");
  if (r.values.size() != 4)
    throw ConfigError("checkpoint tensor '" + r.name + "' must have 4 values");
  net.t_lo = r.values[0];
  net.t_hi = r.values[1];
  net.x_lo = r.values[2];
  net.x_hi = r.values[3];
  return net;
}

}  // namespace

std::vector<NamedTensor> to_tensors(const PdeCellParams& p) {
  return {tensor1("raw_k", p.raw)};
}

std::vector<NamedTensor> to_tensors(const MlpCellParams& p) {
  std::vector<NamedTensor> out{tensor1("raw_k", p.raw)};
  mlp_tensors("g_a", p.g_a_net, out);
  mlp_tensors("g_p", p.g_p_net, out);
  return out;
}

std::vector<NamedTensor> to_tensors(const GruParams& p) {
  std::vector<NamedTensor> out;
  out.push_back(tensor2("Wz", p.hidden, p.in, p.Wz));
  out.push_back(tensor2("Uz", p.hidden, p.hidden, p.Uz));
  out.push_back(tensor1("bz", p.bz));
  out.push_back(tensor2("Wr", p.hidden, p.in, p.Wr));
  out.push_back(tensor2("Ur", p.hidden, p.hidden, p.Ur));
  out.push_back(tensor1("br", p.br));
  out.push_back(tensor2("Wc", p.hidden, p.in, p.Wc));
  out.push_back(tensor2("Uc", p.hidden, p.hidden, p.Uc));
  out.push_back(tensor1("bc", p.bc));
  out.push_back(tensor2("Wo", p.out, p.hidden, p.Wo));
  out.push_back(tensor1("bo", p.bo));
  return out;
}

PdeCellParams pde_from_tensors(const std::vector<NamedTensor>& ts) {
  Checkpoint c;
  c.tensors = ts;
  const NamedTensor& raw = c.find("raw_k");
  if (raw.values.size() != 8)
    throw ConfigError("pde-param checkpoint expects 8 raw constants, found " +
                      std::to_string(raw.values.size()));
  PdeCellParams p;
  std::copy(raw.values.begin(), raw.values.end(), p.raw.begin());
  return p;
}

MlpCellParams mlp_from_tensors(const std::vector<NamedTensor>& ts) {
  Checkpoint c;
  c.tensors = ts;
  const NamedTensor& raw = c.find("raw_k");
  if (raw.values.size() != 6)
    throw ConfigError("mlp checkpoint expects 6 raw constants, found " +
                      std::to_string(raw.values.size()));
  MlpCellParams p;
  std::copy(raw.values.begin(), raw.values.end(), p.raw.begin());
  p.g_a_net = mlp_from(c, "g_a");
  p.g_p_net = mlp_from(c, "g_p");
  return p;
}

GruParams gru_from_tensors(const std::vector<NamedTensor>& ts) {
  Checkpoint c;
  c.tensors = ts;
  const NamedTensor& Wz = c.find("Wz");
  const NamedTensor& Wo = c.find("Wo");
  if (Wz.shape.size() != 2 || Wo.shape.size() != 2)
    throw ConfigError("gru checkpoint weight tensors must be 2-d");
  GruParams p;
  p.hidden = Wz.shape[0];
  p.in = Wz.shape[1];
  p.out = Wo.shape[0];
  p.Wz = Wz.values;
  p.Uz = c.find("Uz").values;
  p.bz = c.find("bz").values;
  p.Wr = c.find("Wr").values;
  p.Ur = c.find("Ur").values;
  p.br = c.find("br").values;
  p.Wc = c.find("Wc").values;
  p.Uc = c.find("Uc").values;
  p.bc = c.find("bc").values;
  p.Wo = Wo.values;
  p.bo = c.find("bo").values;
  return p;
}

}  // namespace reactor
