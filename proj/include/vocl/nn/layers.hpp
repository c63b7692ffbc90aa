#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vocl/ad/ops.hpp"
#include "vocl/core/rng.hpp"

namespace vocl::nn {

using ad::Var;

/// Callback used to enumerate named parameters in a fixed order.
using ParamVisitor = std::function<void(const std::string& name, Var& param)>;

inline Matrix xavier_uniform(int in, int out, Rng& rng) {
  const double a = std::sqrt(6.0 / (in + out));
  Matrix m(in, out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, -a, a);
  return m;
}

inline Matrix normal_matrix(int rows, int cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, 0.0, stddev);
  return m;
}

struct Linear {
  Var weight;  // [in, out]
  Var bias;    // [1, out]

  static Linear init(int in, int out, Rng& rng) {
    return {ad::parameter(xavier_uniform(in, out, rng)), ad::parameter(Matrix::Zero(1, out))};
  }
  static Linear zeros(int in, int out) {
    return {ad::parameter(Matrix::Zero(in, out)), ad::parameter(Matrix::Zero(1, out))};
  }

  Var operator()(const Var& x) const { return ad::affine(x, weight, bias); }
  int in() const { return static_cast<int>(weight.rows()); }
  int out() const { return static_cast<int>(weight.cols()); }

  void visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + ".weight", weight);
    v(prefix + ".bias", bias);
  }
};

struct LayerNorm {
  Var gain;
  Var bias;

  static LayerNorm init(int n) { return {ad::parameter(Matrix::Ones(1, n)), ad::parameter(Matrix::Zero(1, n))}; }
  Var operator()(const Var& x) const { return ad::layer_norm(x, gain, bias); }

  void visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + ".gain", gain);
    v(prefix + ".bias", bias);
  }
};

/// Linear -> ReLU -> Linear. `zero_out` starts a residual branch as the identity.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp init(int in, int hidden, int out, Rng& rng, bool zero_out = false) {
    Mlp m;
    m.fc1 = Linear::init(in, hidden, rng);
    m.fc2 = zero_out ? Linear::zeros(hidden, out) : Linear::init(hidden, out, rng);
    return m;
  }
  Var operator()(const Var& x) const { return fc2(ad::relu(fc1(x))); }

  void visit(const std::string& prefix, const ParamVisitor& v) {
    fc1.visit(prefix + ".fc1", v);
    fc2.visit(prefix + ".fc2", v);
  }
};

/// Multi-head scaled dot-product attention; queries from `x`, keys/values from `memory`.
struct MultiHeadAttention {
  Linear q, k, v, out;
  int heads = 1;

  static MultiHeadAttention init(int dim, int heads, Rng& rng, bool zero_out = false) {
    MultiHeadAttention m;
    m.q = Linear::init(dim, dim, rng);
    m.k = Linear::init(dim, dim, rng);
    m.v = Linear::init(dim, dim, rng);
    m.out = zero_out ? Linear::zeros(dim, dim) : Linear::init(dim, dim, rng);
    m.heads = heads;
    return m;
  }

  Var operator()(const Var& x, const Var& memory) const {
    const Var qx = q(x), km = k(memory), vm = v(memory);
    const int dim = q.out();
    const int d = dim / heads;
    const double temperature = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Var> per_head;
    per_head.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      const Var qh = ad::slice_cols(qx, h * d, d);
      const Var kh = ad::slice_cols(km, h * d, d);
      const Var vh = ad::slice_cols(vm, h * d, d);
      const Var attn = ad::softmax_rows(ad::scale(ad::matmul_bt(qh, kh), temperature));
      per_head.push_back(ad::matmul(attn, vh));
    }
    return out(heads == 1 ? per_head[0] : ad::concat_cols(per_head));
  }

  void visit(const std::string& prefix, const ParamVisitor& v_) {
    q.visit(prefix + ".q", v_);
    k.visit(prefix + ".k", v_);
    v.visit(prefix + ".v", v_);
    out.visit(prefix + ".out", v_);
  }
};

/// Standard GRU cell over rows: h' = (1 - z) * n + z * h.
struct GruCell {
  Linear input;   // [in, 3*hidden] ordered (r, z, n)
  Linear hidden;  // [hidden, 3*hidden]

  static GruCell init(int in, int hid, Rng& rng) {
    GruCell g;
    g.input = Linear::init(in, 3 * hid, rng);
    g.hidden = Linear::init(hid, 3 * hid, rng);
    return g;
  }

  Var operator()(const Var& x, const Var& h) const {
    const int n = static_cast<int>(h.cols());
    const Var gx = input(x), gh = hidden(h);
    const Var r = ad::sigmoid(ad::add(ad::slice_cols(gx, 0, n), ad::slice_cols(gh, 0, n)));
    const Var z = ad::sigmoid(ad::add(ad::slice_cols(gx, n, n), ad::slice_cols(gh, n, n)));
    const Var cand = ad::tanh(ad::add(ad::slice_cols(gx, 2 * n, n), ad::mul(r, ad::slice_cols(gh, 2 * n, n))));
    return ad::add(ad::mul(ad::one_minus(z), cand), ad::mul(z, h));
  }

  void visit(const std::string& prefix, const ParamVisitor& v) {
    input.visit(prefix + ".input", v);
    hidden.visit(prefix + ".hidden", v);
  }
};

}  // namespace vocl::nn
