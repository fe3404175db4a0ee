#pragma once
// Reverse-mode automatic differentiation on a flat tape of tensor-valued
// nodes. Built for repeated full-batch optimization: record the graph once,
// then alternate set_value / replay / backward without touching the graph.
// Values and adjoints live in two flat double slabs indexed by node offset.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "reactor/domain.hpp"

namespace reactor::ad {

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div_el,
  add_s,    // x + s
  mul_s,    // x * s
  rsub_s,   // s - x
  rdiv_s,   // s / x
  pow_s,    // x^s
  neg,
  exp_el,
  log_el,
  tanh_el,
  sigmoid_el,
  relu_el,
  softplus_el,
  sum_all,
  mean_all,
  matvec,      // (m x n) * n-vector
  max_el,
  min_el,
  max_s,
  min_s,
  clamp_el,    // clamp to [s, s2]; zero gradient where the bound binds
  affine,      // W*x + b
  layer_norm,  // normalize, then elementwise gain and bias
  gru_cell,    // fused gated recurrent unit step
  concat,
  slice,
};

struct Node {
  Op op = Op::leaf;
  uint32_t rows = 0;
  uint32_t cols = 1;               // > 1 only for matrix-valued nodes
  uint32_t val = 0;                // offset into value/adjoint slabs
  int32_t a = -1, b = -1, c = -1;  // fixed-arity inputs
  uint32_t ext = 0, n_ext = 0;     // extra inputs (concat, gru_cell)
  uint32_t aux = 0;                // saved intermediates offset
  double s = 0.0, s2 = 0.0;        // immediates
  uint32_t i0 = 0;                 // slice start

  std::size_t size() const { return std::size_t(rows) * cols; }
};

class Tape {
 public:
  // leaves participate in gradients, constants do not
  Var leaf(std::size_t rows, std::size_t cols = 1);
  Var leaf(std::span<const double> v, std::size_t rows, std::size_t cols = 1);
  Var leaf1(double v);
  Var constant(std::span<const double> v, std::size_t rows,
               std::size_t cols = 1);
  Var constant1(double v);

  void set_value(Var v, std::span<const double> x);
  void set_value1(Var v, double x);
  std::span<const double> value(Var v) const;
  double value1(Var v) const;
  std::span<const double> grad(Var v) const;
  double grad1(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_s(Var a, double s);
  Var mul_s(Var a, double s);
  Var rsub_s(double s, Var a);
  Var rdiv_s(double s, Var a);
  Var pow_s(Var a, double p);
  Var neg(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softplus(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var matvec(Var W, Var x);
  Var max(Var a, Var b);
  Var min(Var a, Var b);
  Var max_s(Var a, double s);
  Var min_s(Var a, double s);
  Var clamp(Var a, double lo, double hi);
  Var affine(Var W, Var x, Var b);
  Var layer_norm(Var x, Var gain, Var bias);
  Var gru_cell(Var h, Var u, Var Wz, Var Uz, Var bz, Var Wr, Var Ur, Var br,
               Var Wc, Var Uc, Var bc);
  Var concat(std::span<const Var> xs);
  Var slice(Var a, std::size_t from, std::size_t len);

  // recompute every non-leaf value from current leaf/constant contents
  void replay();
  // zero all adjoints, seed d(out)/d(out) = 1, one reverse sweep
  void backward(Var out);

  std::size_t num_nodes() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }

 private:
  Var push(Node n);
  void compute(const Node& n);
  void accumulate(const Node& n);
  const Node& in(Var v) const;

  std::vector<Node> nodes_;
  std::vector<int32_t> ext_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<double> aux_;
};

// value and gradient of a scalar function of a flat parameter vector
struct DiffFn {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

// max over coordinates of |analytic - central difference| / max(1, |analytic|)
double grad_check(const DiffFn& f, std::span<const double> x, double h = 1e-6);

}  // namespace reactor::ad
