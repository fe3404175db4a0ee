#pragma once

// Per-location computational units of the grid surrogate: the mechanistic
// cell with closed-form rate shapes, the same cell with learned MLP rate
// shapes, and gated recurrent units for the two baselines. Every unit comes
// in two flavours: plain double arithmetic (oracles, exports) and tape
// builders used inside the training graph.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reactor/autodiff.hpp"
#include "reactor/domain.hpp"

namespace reactor {

// the six trainable configurations exposed by the CLI; mlp-reg shares the
// MLP cell and adds the concentration penalties, grid-gru-augm shares the
// grid GRU and adds sensor-shift augmentation
enum class ModelVariant {
  pde_param,
  mlp,
  mlp_reg,
  gru,
  grid_gru,
  grid_gru_augm,
};

ModelVariant parse_variant(const std::string& name);  // ConfigError on unknown
const char* variant_name(ModelVariant v);
bool uses_grid(ModelVariant v);      // all but the plain GRU
bool uses_mlp_cell(ModelVariant v);  // mlp, mlp-reg
bool uses_gru_cell(ModelVariant v);  // gru, grid-gru, grid-gru-augm

// numerically stable softplus and its inverse; positivity of learnable
// physical constants is enforced by optimizing raws through this map
double softplus(double x);
double softplus_inv(double y);

// ---------------------------------------------------------------------------
// mechanistic cell

// raw (unconstrained) parameters; mapped()[i] = softplus(raw[i]) is the
// positive constant actually used by the cell equations
struct PdeCellParams {
  // order: k_a, k_p, k_T, k_theta, k_1, k_2, k_3, k_4
  std::array<double, 8> raw{};

  static const std::array<const char*, 8> names;

  // every mapped constant starts at 0.1 so the untrained grid is
  // near-identity and gradients flow
  static PdeCellParams init_default();
  // log-uniform jitter of the mapped constants around 0.1; seed 0 falls back
  // to the deterministic default
  static PdeCellParams init_random(std::uint64_t seed);
  // raws chosen so that mapped() equals k exactly
  static PdeCellParams from_values(const std::array<double, 8>& k);

  std::array<double, 8> mapped() const;
};

struct CellState {
  double xa = 0.0, xp = 0.0, T = 0.0, theta = 0.0;
};

enum class GKind { a, p };

// closed-form rate shapes: g_a = exp(-k_3/T) T x, g_p = exp(-k_4/T) x
double g_closed_form(double T, double x, GKind which, const PdeCellParams& p);

using GFun = std::function<double(double /*T*/, double /*x*/)>;

// one cell update:
//   xa'    = xa - (k_a/U) g_a(T,xa) theta
//   xp'    = xp - (k_p/U) T g_p(T,xp) theta^2
//   T'     = T + k_T g_a(T,xa) theta / (U (k_1 + k_2 xa))
//   theta' = clamp(theta - k_theta g_p(T,xp) theta, 0, 1)
// (xa',xp',T') feed the next level, theta' feeds the next time column
CellState pde_cell_forward(const CellState& in, double U,
                           const PdeCellParams& p, const GFun& g_a,
                           const GFun& g_p);

// ---------------------------------------------------------------------------
// MLP rate shapes

struct DenseLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> W;  // row-major out x in
  std::vector<double> b;
};

struct NormLayer {
  std::vector<double> gain, bias;
};

// scalar-output network over the normalized (T, x) pair: each hidden layer
// is affine -> layer norm -> relu, the output layer is affine -> softplus
struct Mlp {
  std::vector<DenseLayer> hidden;
  std::vector<NormLayer> norms;  // one per hidden layer
  DenseLayer output;
  // frozen min-max ranges of the two inputs, first T then x
  double t_lo = 0.0, t_hi = 1.0;
  double x_lo = 0.0, x_hi = 1.0;
};

// fan-in uniform weights, zero biases, unit norm gains
Mlp make_mlp(const std::vector<std::size_t>& hidden_widths, std::uint64_t seed);

double mlp_forward(const Mlp& net, double T, double x);

struct MlpCellParams {
  // order: k_a, k_p, k_T, k_theta, k_1, k_2 (the rate shapes are learned,
  // so there is no k_3/k_4)
  std::array<double, 6> raw{};
  Mlp g_a_net;  // hidden widths 32-64-32
  Mlp g_p_net;  // hidden widths 32-32

  static MlpCellParams init(std::uint64_t seed);
  std::array<double, 6> mapped() const;
};

// ---------------------------------------------------------------------------
// gated recurrent unit

struct GruParams {
  std::size_t hidden = 0, in = 0, out = 0;
  // gate weights, row-major hidden x in / hidden x hidden
  std::vector<double> Wz, Uz, bz;
  std::vector<double> Wr, Ur, br;
  std::vector<double> Wc, Uc, bc;
  // affine readout from the hidden state
  std::vector<double> Wo, bo;

  static GruParams init(std::size_t hidden, std::size_t in, std::size_t out,
                        std::uint64_t seed);
};

// standard update: z = sigma(Wz u + Uz h + bz), r likewise,
// c = tanh(Wc u + Uc (r*h) + bc), h' = z*h + (1-z)*c
std::vector<double> gru_forward(const GruParams& p, std::span<const double> h,
                                std::span<const double> u);
std::vector<double> gru_output(const GruParams& p, std::span<const double> h);

// ---------------------------------------------------------------------------
// tape builders

// learnable leaves of the mechanistic constants plus their softplus images;
// n_raw is 8 for closed-form shapes, 6 when the shapes are MLPs
struct PdeCellVars {
  ad::Var raw;                 // leaf vector
  std::array<ad::Var, 8> k{};  // scalar nodes, entries past n_raw invalid
  std::size_t n_raw = 0;
};
PdeCellVars make_pde_cell_vars(ad::Tape& t, std::span<const double> raw_init);

struct MlpVars {
  std::vector<ad::Var> W, b, gain, bias;  // hidden layers
  ad::Var Wout, bout;
  const Mlp* shape = nullptr;  // dims and normalization ranges
};
MlpVars make_mlp_vars(ad::Tape& t, const Mlp& init);

// scalar T, scalar x -> scalar rate shape on the tape
ad::Var mlp_forward_var(ad::Tape& t, const MlpVars& net, ad::Var T, ad::Var x);

struct GruVars {
  ad::Var Wz, Uz, bz, Wr, Ur, br, Wc, Uc, bc;
  ad::Var Wo, bo;
  std::size_t hidden = 0, in = 0, out = 0;
};
GruVars make_gru_vars(ad::Tape& t, const GruParams& init);
ad::Var gru_forward_var(ad::Tape& t, const GruVars& g, ad::Var h, ad::Var u);
ad::Var gru_output_var(ad::Tape& t, const GruVars& g, ad::Var h);

struct CellStateVars {
  ad::Var xa, xp, T, theta;
};

using GVarFun =
    std::function<ad::Var(ad::Tape&, ad::Var /*T*/, ad::Var /*x*/)>;

// closed-form rate shapes on the tape, bound to the cell's k_3/k_4 nodes
GVarFun g_closed_form_var(const PdeCellVars& cell, GKind which);
// learned rate shape on the tape
GVarFun g_mlp_var(const MlpVars& net);

CellStateVars pde_cell_forward_var(ad::Tape& t, const CellStateVars& in,
                                   double U, const PdeCellVars& cell,
                                   const GVarFun& g_a, const GVarFun& g_p);

// ---------------------------------------------------------------------------
// checkpoints

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;  // row-major
};

struct Checkpoint {
  int format_version = 1;
  std::string variant;
  std::vector<NamedTensor> tensors;

  const NamedTensor& find(const std::string& name) const;  // MissingArtifact
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);  // MissingArtifact / ConfigError

std::vector<NamedTensor> to_tensors(const PdeCellParams& p);
std::vector<NamedTensor> to_tensors(const MlpCellParams& p);
std::vector<NamedTensor> to_tensors(const GruParams& p);
PdeCellParams pde_from_tensors(const std::vector<NamedTensor>& ts);
MlpCellParams mlp_from_tensors(const std::vector<NamedTensor>& ts);
GruParams gru_from_tensors(const std::vector<NamedTensor>& ts);

}  // namespace reactor
