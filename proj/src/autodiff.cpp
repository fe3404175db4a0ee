#include "reactor/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace reactor::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

const Node& Tape::in(Var v) const {
  if (!v.valid() || std::size_t(v.id) >= nodes_.size())
    throw std::invalid_argument("autodiff: Var does not belong to this tape");
  return nodes_[std::size_t(v.id)];
}

Var Tape::push(Node n) {
  n.val = uint32_t(val_.size());
  val_.resize(val_.size() + n.size(), 0.0);
  nodes_.push_back(n);
  if (n.op != Op::leaf && n.op != Op::constant) compute(nodes_.back());
  return Var{int32_t(nodes_.size() - 1)};
}

Var Tape::leaf(std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::leaf;
  n.rows = uint32_t(rows);
  n.cols = uint32_t(cols);
  return push(n);
}

Var Tape::leaf(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Var out = leaf(rows, cols);
  set_value(out, v);
  return out;
}

Var Tape::leaf1(double v) {
  Var out = leaf(1, 1);
  set_value1(out, v);
  return out;
}

Var Tape::constant(std::span<const double> v, std::size_t rows,
                   std::size_t cols) {
  Node n;
  n.op = Op::constant;
  n.rows = uint32_t(rows);
  n.cols = uint32_t(cols);
  Var out = push(n);
  set_value(out, v);
  return out;
}

Var Tape::constant1(double v) {
  Node n;
  n.op = Op::constant;
  n.rows = 1;
  Var out = push(n);
  set_value1(out, v);
  return out;
}

void Tape::set_value(Var v, std::span<const double> x) {
  const Node& n = in(v);
  if (n.op != Op::leaf && n.op != Op::constant)
    throw std::invalid_argument("autodiff: set_value on a computed node");
  if (x.size() != n.size())
    throw std::invalid_argument("autodiff: set_value size mismatch");
  std::memcpy(val_.data() + n.val, x.data(), x.size() * sizeof(double));
}

void Tape::set_value1(Var v, double x) { set_value(v, std::span(&x, 1)); }

std::span<const double> Tape::value(Var v) const {
  const Node& n = in(v);
  return {val_.data() + n.val, n.size()};
}

double Tape::value1(Var v) const {
  const Node& n = in(v);
  if (n.size() != 1)
    throw std::invalid_argument("autodiff: value1 on non-scalar node");
  return val_[n.val];
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = in(v);
  if (adj_.size() != val_.size())
    throw std::invalid_argument("autodiff: grad before backward");
  return {adj_.data() + n.val, n.size()};
}

double Tape::grad1(Var v) const {
  const Node& n = in(v);
  if (n.size() != 1)
    throw std::invalid_argument("autodiff: grad1 on non-scalar node");
  if (adj_.size() != val_.size())
    throw std::invalid_argument("autodiff: grad before backward");
  return adj_[n.val];
}

namespace {
void require_same_size(const Node& a, const Node& b, const char* op) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string("autodiff: size mismatch in ") +
                                op);
}
}  // namespace

Var Tape::add(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "add");
  Node n;
  n.op = Op::add;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::sub(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "sub");
  Node n;
  n.op = Op::sub;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::mul(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "mul");
  Node n;
  n.op = Op::mul;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::div(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "div");
  Node n;
  n.op = Op::div_el;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::add_s(Var a, double s) {
  const Node& na = in(a);
  Node n;
  n.op = Op::add_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::mul_s(Var a, double s) {
  const Node& na = in(a);
  Node n;
  n.op = Op::mul_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::rsub_s(double s, Var a) {
  const Node& na = in(a);
  Node n;
  n.op = Op::rsub_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::rdiv_s(double s, Var a) {
  const Node& na = in(a);
  Node n;
  n.op = Op::rdiv_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::pow_s(Var a, double p) {
  const Node& na = in(a);
  Node n;
  n.op = Op::pow_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = p;
  return push(n);
}

Var Tape::neg(Var a) {
  const Node& na = in(a);
  Node n;
  n.op = Op::neg;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  return push(n);
}

#define REACTOR_UNARY(NAME, OPK)       \
  Var Tape::NAME(Var a) {              \
    const Node& na = in(a);            \
    Node n;                            \
    n.op = Op::OPK;                    \
    n.rows = na.rows;                  \
    n.cols = na.cols;                  \
    n.a = a.id;                        \
    return push(n);                    \
  }

REACTOR_UNARY(exp, exp_el)
REACTOR_UNARY(log, log_el)
REACTOR_UNARY(tanh, tanh_el)
REACTOR_UNARY(sigmoid, sigmoid_el)
REACTOR_UNARY(relu, relu_el)
REACTOR_UNARY(softplus, softplus_el)
#undef REACTOR_UNARY

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::sum_all;
  n.rows = 1;
  n.a = a.id;
  in(a);
  return push(n);
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::mean_all;
  n.rows = 1;
  n.a = a.id;
  in(a);
  return push(n);
}

Var Tape::matvec(Var W, Var x) {
  const Node &nw = in(W), &nx = in(x);
  if (nx.cols != 1 || nw.cols != nx.rows)
    throw std::invalid_argument("autodiff: matvec shape mismatch");
  Node n;
  n.op = Op::matvec;
  n.rows = nw.rows;
  n.a = W.id;
  n.b = x.id;
  return push(n);
}

Var Tape::max(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "max");
  Node n;
  n.op = Op::max_el;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::min(Var a, Var b) {
  const Node &na = in(a), &nb = in(b);
  require_same_size(na, nb, "min");
  Node n;
  n.op = Op::min_el;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  return push(n);
}

Var Tape::max_s(Var a, double s) {
  const Node& na = in(a);
  Node n;
  n.op = Op::max_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::min_s(Var a, double s) {
  const Node& na = in(a);
  Node n;
  n.op = Op::min_s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = s;
  return push(n);
}

Var Tape::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("autodiff: clamp lo > hi");
  const Node& na = in(a);
  Node n;
  n.op = Op::clamp_el;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.s = lo;
  n.s2 = hi;
  return push(n);
}

Var Tape::affine(Var W, Var x, Var b) {
  const Node &nw = in(W), &nx = in(x), &nb = in(b);
  if (nx.cols != 1 || nw.cols != nx.rows || nb.rows != nw.rows ||
      nb.cols != 1)
    throw std::invalid_argument("autodiff: affine shape mismatch");
  Node n;
  n.op = Op::affine;
  n.rows = nw.rows;
  n.a = W.id;
  n.b = x.id;
  n.c = b.id;
  return push(n);
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
  const Node &nx = in(x), &ng = in(gain), &nb = in(bias);
  if (nx.cols != 1 || ng.size() != nx.size() || nb.size() != nx.size())
    throw std::invalid_argument("autodiff: layer_norm shape mismatch");
  Node n;
  n.op = Op::layer_norm;
  n.rows = nx.rows;
  n.a = x.id;
  n.b = gain.id;
  n.c = bias.id;
  n.aux = uint32_t(aux_.size());
  aux_.resize(aux_.size() + 2, 0.0);  // mean, inverse std
  return push(n);
}

Var Tape::gru_cell(Var h, Var u, Var Wz, Var Uz, Var bz, Var Wr, Var Ur,
                   Var br, Var Wc, Var Uc, Var bc) {
  const Node &nh = in(h), &nu = in(u);
  uint32_t H = nh.rows, D = nu.rows;
  if (nh.cols != 1 || nu.cols != 1)
    throw std::invalid_argument("autodiff: gru_cell expects vectors");
  auto check_mat = [&](Var m, uint32_t r, uint32_t c, const char* what) {
    const Node& n = in(m);
    if (n.rows != r || n.cols != c)
      throw std::invalid_argument(std::string("autodiff: gru_cell ") + what +
                                  " shape mismatch");
  };
  check_mat(Wz, H, D, "Wz");
  check_mat(Uz, H, H, "Uz");
  check_mat(bz, H, 1, "bz");
  check_mat(Wr, H, D, "Wr");
  check_mat(Ur, H, H, "Ur");
  check_mat(br, H, 1, "br");
  check_mat(Wc, H, D, "Wc");
  check_mat(Uc, H, H, "Uc");
  check_mat(bc, H, 1, "bc");
  Node n;
  n.op = Op::gru_cell;
  n.rows = H;
  n.ext = uint32_t(ext_.size());
  n.n_ext = 11;
  for (Var v : {h, u, Wz, Uz, bz, Wr, Ur, br, Wc, Uc, bc})
    ext_.push_back(v.id);
  n.aux = uint32_t(aux_.size());
  aux_.resize(aux_.size() + 3 * std::size_t(H), 0.0);  // z, r, candidate
  return push(n);
}

Var Tape::concat(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("autodiff: concat of nothing");
  std::size_t total = 0;
  for (Var v : xs) {
    const Node& n = in(v);
    if (n.cols != 1)
      throw std::invalid_argument("autodiff: concat expects vectors");
    total += n.size();
  }
  Node n;
  n.op = Op::concat;
  n.rows = uint32_t(total);
  n.ext = uint32_t(ext_.size());
  n.n_ext = uint32_t(xs.size());
  for (Var v : xs) ext_.push_back(v.id);
  return push(n);
}

Var Tape::slice(Var a, std::size_t from, std::size_t len) {
  const Node& na = in(a);
  if (na.cols != 1 || from + len > na.size())
    throw std::invalid_argument("autodiff: slice out of range");
  Node n;
  n.op = Op::slice;
  n.rows = uint32_t(len);
  n.a = a.id;
  n.i0 = uint32_t(from);
  return push(n);
}

void Tape::compute(const Node& n) {
  double* out = val_.data() + n.val;
  const std::size_t m = n.size();
  auto vin = [&](int32_t id) -> const double* {
    return val_.data() + nodes_[std::size_t(id)].val;
  };
  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      break;
    case Op::add: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] + b[i];
      break;
    }
    case Op::sub: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] - b[i];
      break;
    }
    case Op::mul: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] * b[i];
      break;
    }
    case Op::div_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) {
        if (b[i] == 0.0) throw NumericError("autodiff: division by zero");
        out[i] = a[i] / b[i];
      }
      break;
    }
    case Op::add_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] + n.s;
      break;
    }
    case Op::mul_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] * n.s;
      break;
    }
    case Op::rsub_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = n.s - a[i];
      break;
    }
    case Op::rdiv_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i] == 0.0) throw NumericError("autodiff: division by zero");
        out[i] = n.s / a[i];
      }
      break;
    }
    case Op::pow_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i] < 0.0 && n.s != std::floor(n.s))
          throw NumericError(
              "autodiff: fractional power of a negative value");
        out[i] = std::pow(a[i], n.s);
      }
      break;
    }
    case Op::neg: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = -a[i];
      break;
    }
    case Op::exp_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = std::exp(a[i]);
      break;
    }
    case Op::log_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i] <= 0.0)
          throw NumericError("autodiff: log of a non-positive value");
        out[i] = std::log(a[i]);
      }
      break;
    }
    case Op::tanh_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = std::tanh(a[i]);
      break;
    }
    case Op::sigmoid_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = stable_sigmoid(a[i]);
      break;
    }
    case Op::relu_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    }
    case Op::softplus_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = stable_softplus(a[i]);
      break;
    }
    case Op::sum_all: {
      const Node& na = nodes_[std::size_t(n.a)];
      const double* a = vin(n.a);
      double acc = 0.0;
      for (std::size_t i = 0; i < na.size(); ++i) acc += a[i];
      out[0] = acc;
      break;
    }
    case Op::mean_all: {
      const Node& na = nodes_[std::size_t(n.a)];
      const double* a = vin(n.a);
      double acc = 0.0;
      for (std::size_t i = 0; i < na.size(); ++i) acc += a[i];
      out[0] = acc / double(na.size());
      break;
    }
    case Op::matvec: {
      const Node& nw = nodes_[std::size_t(n.a)];
      const double *W = vin(n.a), *x = vin(n.b);
      for (uint32_t r = 0; r < nw.rows; ++r) {
        double acc = 0.0;
        const double* row = W + std::size_t(r) * nw.cols;
        for (uint32_t c = 0; c < nw.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
      }
      break;
    }
    case Op::max_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] >= b[i] ? a[i] : b[i];
      break;
    }
    case Op::min_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] <= b[i] ? a[i] : b[i];
      break;
    }
    case Op::max_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] >= n.s ? a[i] : n.s;
      break;
    }
    case Op::min_s: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i) out[i] = a[i] <= n.s ? a[i] : n.s;
      break;
    }
    case Op::clamp_el: {
      const double* a = vin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        out[i] = a[i] < n.s ? n.s : (a[i] > n.s2 ? n.s2 : a[i]);
      break;
    }
    case Op::affine: {
      const Node& nw = nodes_[std::size_t(n.a)];
      const double *W = vin(n.a), *x = vin(n.b), *b = vin(n.c);
      for (uint32_t r = 0; r < nw.rows; ++r) {
        double acc = b[r];
        const double* row = W + std::size_t(r) * nw.cols;
        for (uint32_t c = 0; c < nw.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
      }
      break;
    }
    case Op::layer_norm: {
      const double *x = vin(n.a), *g = vin(n.b), *b = vin(n.c);
      double mu = 0.0;
      for (std::size_t i = 0; i < m; ++i) mu += x[i];
      mu /= double(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) var += (x[i] - mu) * (x[i] - mu);
      var /= double(m);
      // the epsilon keeps the all-equal-inputs case finite: xhat becomes 0
      double inv = 1.0 / std::sqrt(var + 1e-12);
      aux_[n.aux] = mu;
      aux_[n.aux + 1] = inv;
      for (std::size_t i = 0; i < m; ++i)
        out[i] = (x[i] - mu) * inv * g[i] + b[i];
      break;
    }
    case Op::gru_cell: {
      const int32_t* ids = ext_.data() + n.ext;
      const double* h = vin(ids[0]);
      const double* u = vin(ids[1]);
      const double* Wz = vin(ids[2]);
      const double* Uz = vin(ids[3]);
      const double* bz = vin(ids[4]);
      const double* Wr = vin(ids[5]);
      const double* Ur = vin(ids[6]);
      const double* br = vin(ids[7]);
      const double* Wc = vin(ids[8]);
      const double* Uc = vin(ids[9]);
      const double* bc = vin(ids[10]);
      const uint32_t H = n.rows;
      const uint32_t D = nodes_[std::size_t(ids[1])].rows;
      double* z = aux_.data() + n.aux;
      double* r = z + H;
      double* cand = r + H;
      for (uint32_t i = 0; i < H; ++i) {
        double az = bz[i], ar = br[i];
        const double *wzr = Wz + std::size_t(i) * D,
                     *wrr = Wr + std::size_t(i) * D;
        for (uint32_t j = 0; j < D; ++j) {
          az += wzr[j] * u[j];
          ar += wrr[j] * u[j];
        }
        const double *uzr = Uz + std::size_t(i) * H,
                     *urr = Ur + std::size_t(i) * H;
        for (uint32_t j = 0; j < H; ++j) {
          az += uzr[j] * h[j];
          ar += urr[j] * h[j];
        }
        z[i] = stable_sigmoid(az);
        r[i] = stable_sigmoid(ar);
      }
      for (uint32_t i = 0; i < H; ++i) {
        double ac = bc[i];
        const double* wcr = Wc + std::size_t(i) * D;
        for (uint32_t j = 0; j < D; ++j) ac += wcr[j] * u[j];
        const double* ucr = Uc + std::size_t(i) * H;
        for (uint32_t j = 0; j < H; ++j) ac += ucr[j] * (r[j] * h[j]);
        cand[i] = std::tanh(ac);
        out[i] = z[i] * h[i] + (1.0 - z[i]) * cand[i];
      }
      break;
    }
    case Op::concat: {
      std::size_t off = 0;
      for (uint32_t k = 0; k < n.n_ext; ++k) {
        const Node& nk = nodes_[std::size_t(ext_[n.ext + k])];
        std::memcpy(out + off, val_.data() + nk.val,
                    nk.size() * sizeof(double));
        off += nk.size();
      }
      break;
    }
    case Op::slice: {
      const double* a = vin(n.a);
      std::memcpy(out, a + n.i0, m * sizeof(double));
      break;
    }
  }
}

void Tape::replay() {
  for (const Node& n : nodes_) compute(n);
}

void Tape::accumulate(const Node& n) {
  const double* g = adj_.data() + n.val;
  const std::size_t m = n.size();
  auto vin = [&](int32_t id) -> const double* {
    return val_.data() + nodes_[std::size_t(id)].val;
  };
  auto gin = [&](int32_t id) -> double* {
    return adj_.data() + nodes_[std::size_t(id)].val;
  };
  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      break;
    case Op::add: {
      double *ga = gin(n.a), *gb = gin(n.b);
      for (std::size_t i = 0; i < m; ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::sub: {
      double *ga = gin(n.a), *gb = gin(n.b);
      for (std::size_t i = 0; i < m; ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
      break;
    }
    case Op::mul: {
      const double *a = vin(n.a), *b = vin(n.b);
      double *ga = gin(n.a), *gb = gin(n.b);
      for (std::size_t i = 0; i < m; ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::div_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      double *ga = gin(n.a), *gb = gin(n.b);
      for (std::size_t i = 0; i < m; ++i) {
        ga[i] += g[i] / b[i];
        gb[i] -= g[i] * a[i] / (b[i] * b[i]);
      }
      break;
    }
    case Op::add_s: {
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
      break;
    }
    case Op::mul_s: {
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * n.s;
      break;
    }
    case Op::rsub_s: {
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] -= g[i];
      break;
    }
    case Op::rdiv_s: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        ga[i] -= g[i] * n.s / (a[i] * a[i]);
      break;
    }
    case Op::pow_s: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) {
        double d = a[i] == 0.0 && n.s < 1.0
                       ? 0.0
                       : n.s * std::pow(a[i], n.s - 1.0);
        ga[i] += g[i] * d;
      }
      break;
    }
    case Op::neg: {
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] -= g[i];
      break;
    }
    case Op::exp_el: {
      const double* y = val_.data() + n.val;
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * y[i];
      break;
    }
    case Op::log_el: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] / a[i];
      break;
    }
    case Op::tanh_el: {
      const double* y = val_.data() + n.val;
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::sigmoid_el: {
      const double* y = val_.data() + n.val;
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::relu_el: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] > 0.0) ga[i] += g[i];
      break;
    }
    case Op::softplus_el: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        ga[i] += g[i] * stable_sigmoid(a[i]);
      break;
    }
    case Op::sum_all: {
      const Node& na = nodes_[std::size_t(n.a)];
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < na.size(); ++i) ga[i] += g[0];
      break;
    }
    case Op::mean_all: {
      const Node& na = nodes_[std::size_t(n.a)];
      double* ga = gin(n.a);
      const double w = g[0] / double(na.size());
      for (std::size_t i = 0; i < na.size(); ++i) ga[i] += w;
      break;
    }
    case Op::matvec: {
      const Node& nw = nodes_[std::size_t(n.a)];
      const double *W = vin(n.a), *x = vin(n.b);
      double *gW = gin(n.a), *gx = gin(n.b);
      for (uint32_t r = 0; r < nw.rows; ++r) {
        const double gr = g[r];
        const double* row = W + std::size_t(r) * nw.cols;
        double* grow = gW + std::size_t(r) * nw.cols;
        for (uint32_t c = 0; c < nw.cols; ++c) {
          grow[c] += gr * x[c];
          gx[c] += gr * row[c];
        }
      }
      break;
    }
    case Op::max_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      double *ga = gin(n.a), *gb = gin(n.b);
      // ties route the gradient to the first argument
      for (std::size_t i = 0; i < m; ++i)
        (a[i] >= b[i] ? ga[i] : gb[i]) += g[i];
      break;
    }
    case Op::min_el: {
      const double *a = vin(n.a), *b = vin(n.b);
      double *ga = gin(n.a), *gb = gin(n.b);
      for (std::size_t i = 0; i < m; ++i)
        (a[i] <= b[i] ? ga[i] : gb[i]) += g[i];
      break;
    }
    case Op::max_s: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] >= n.s) ga[i] += g[i];
      break;
    }
    case Op::min_s: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] <= n.s) ga[i] += g[i];
      break;
    }
    case Op::clamp_el: {
      const double* a = vin(n.a);
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] >= n.s && a[i] <= n.s2) ga[i] += g[i];
      break;
    }
    case Op::affine: {
      const Node& nw = nodes_[std::size_t(n.a)];
      const double *W = vin(n.a), *x = vin(n.b);
      double *gW = gin(n.a), *gx = gin(n.b), *gb = gin(n.c);
      for (uint32_t r = 0; r < nw.rows; ++r) {
        const double gr = g[r];
        gb[r] += gr;
        const double* row = W + std::size_t(r) * nw.cols;
        double* grow = gW + std::size_t(r) * nw.cols;
        for (uint32_t c = 0; c < nw.cols; ++c) {
          grow[c] += gr * x[c];
          gx[c] += gr * row[c];
        }
      }
      break;
    }
    case Op::layer_norm: {
      const double *x = vin(n.a), *gn = vin(n.b);
      double *gx = gin(n.a), *gg = gin(n.b), *gb = gin(n.c);
      const double mu = aux_[n.aux];
      const double inv = aux_[n.aux + 1];
      double dot_gh = 0.0, dot_ghx = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double xhat = (x[i] - mu) * inv;
        const double gh = g[i] * gn[i];  // adjoint of xhat
        gg[i] += g[i] * xhat;
        gb[i] += g[i];
        dot_gh += gh;
        dot_ghx += gh * xhat;
      }
      const double inv_m = 1.0 / double(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double xhat = (x[i] - mu) * inv;
        const double gh = g[i] * gn[i];
        gx[i] += inv * (gh - inv_m * dot_gh - xhat * inv_m * dot_ghx);
      }
      break;
    }
    case Op::gru_cell: {
      const int32_t* ids = ext_.data() + n.ext;
      const double* h = vin(ids[0]);
      const double* u = vin(ids[1]);
      const double* Wz = vin(ids[2]);
      const double* Uz = vin(ids[3]);
      const double* Wr = vin(ids[5]);
      const double* Ur = vin(ids[6]);
      const double* Wc = vin(ids[8]);
      const double* Uc = vin(ids[9]);
      double* gh = gin(ids[0]);
      double* gu = gin(ids[1]);
      double* gWz = gin(ids[2]);
      double* gUz = gin(ids[3]);
      double* gbz = gin(ids[4]);
      double* gWr = gin(ids[5]);
      double* gUr = gin(ids[6]);
      double* gbr = gin(ids[7]);
      double* gWc = gin(ids[8]);
      double* gUc = gin(ids[9]);
      double* gbc = gin(ids[10]);
      const uint32_t H = n.rows;
      const uint32_t D = nodes_[std::size_t(ids[1])].rows;
      const double* z = aux_.data() + n.aux;
      const double* r = z + H;
      const double* cand = r + H;
      // h' = z (*) h + (1-z) (*) cand, cand = tanh(Wc u + Uc (r (*) h) + bc)
      std::vector<double> dac(H), daz(H), dar(H), drh(H, 0.0);
      for (uint32_t i = 0; i < H; ++i) {
        const double dz = g[i] * (h[i] - cand[i]);
        gh[i] += g[i] * z[i];
        const double dc = g[i] * (1.0 - z[i]);
        dac[i] = dc * (1.0 - cand[i] * cand[i]);
        daz[i] = dz * z[i] * (1.0 - z[i]);
      }
      for (uint32_t i = 0; i < H; ++i) {
        const double d = dac[i];
        gbc[i] += d;
        double* wrow = gWc + std::size_t(i) * D;
        for (uint32_t j = 0; j < D; ++j) wrow[j] += d * u[j];
        const double* ucr = Uc + std::size_t(i) * H;
        double* gucr = gUc + std::size_t(i) * H;
        for (uint32_t j = 0; j < H; ++j) {
          gucr[j] += d * (r[j] * h[j]);
          drh[j] += d * ucr[j];
        }
      }
      for (uint32_t i = 0; i < H; ++i) {
        gh[i] += drh[i] * r[i];
        dar[i] = drh[i] * h[i] * r[i] * (1.0 - r[i]);
      }
      for (uint32_t i = 0; i < H; ++i) {
        const double dz = daz[i], dr = dar[i];
        gbz[i] += dz;
        gbr[i] += dr;
        double* gwz = gWz + std::size_t(i) * D;
        double* gwr = gWr + std::size_t(i) * D;
        const double* wzr = Wz + std::size_t(i) * D;
        const double* wrr = Wr + std::size_t(i) * D;
        const double* wcr = Wc + std::size_t(i) * D;
        const double dci = dac[i];
        for (uint32_t j = 0; j < D; ++j) {
          gwz[j] += dz * u[j];
          gwr[j] += dr * u[j];
          gu[j] += dz * wzr[j] + dr * wrr[j] + dci * wcr[j];
        }
        double* guz = gUz + std::size_t(i) * H;
        double* gur = gUr + std::size_t(i) * H;
        const double* uzr = Uz + std::size_t(i) * H;
        const double* urr = Ur + std::size_t(i) * H;
        for (uint32_t j = 0; j < H; ++j) {
          guz[j] += dz * h[j];
          gur[j] += dr * h[j];
          gh[j] += dz * uzr[j] + dr * urr[j];
        }
      }
      break;
    }
    case Op::concat: {
      std::size_t off = 0;
      for (uint32_t k = 0; k < n.n_ext; ++k) {
        const Node& nk = nodes_[std::size_t(ext_[n.ext + k])];
        double* gk = adj_.data() + nk.val;
        for (std::size_t i = 0; i < nk.size(); ++i) gk[i] += g[off + i];
        off += nk.size();
      }
      break;
    }
    case Op::slice: {
      double* ga = gin(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[n.i0 + i] += g[i];
      break;
    }
  }
}

void Tape::backward(Var out) {
  const Node& n = in(out);
  if (n.size() != 1)
    throw std::invalid_argument("autodiff: backward requires a scalar output");
  adj_.assign(val_.size(), 0.0);
  adj_[n.val] = 1.0;
  for (std::size_t i = std::size_t(out.id) + 1; i-- > 0;)
    accumulate(nodes_[i]);
}

double grad_check(const DiffFn& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be > 0");
  std::vector<double> analytic = f.gradient(x);
  if (analytic.size() != x.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");
  std::vector<double> p(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double save = p[i];
    p[i] = save + h;
    const double up = f.value(p);
    p[i] = save - h;
    const double dn = f.value(p);
    p[i] = save;
    const double fd = (up - dn) / (2.0 * h);
    const double err =
        std::fabs(analytic[i] - fd) / std::fmax(1.0, std::fabs(analytic[i]));
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace reactor::ad
