#pragma once

#include <cmath>
#include <string>

#include "vocl/core/error.hpp"
#include "vocl/encoder/feature_map.hpp"
#include "vocl/nn/layers.hpp"

namespace vocl::model {

/// Per-frame recurrence state. `attention` is [s, h*w] from the final iteration and sums to
/// one over slots at each location; `masks` holds 1-based argmax slot labels per location.
struct SlotState {
  Var query;
  Var slots;
  Matrix attention;
  std::vector<int> masks;
  int frame_index = 0;
};

/// Labels 1..s by per-location argmax over slots (lowest slot index wins ties).
inline std::vector<int> argmax_masks(const Matrix& attention) {
  std::vector<int> m(attention.cols());
  for (Eigen::Index p = 0; p < attention.cols(); ++p) {
    Eigen::Index best = 0;
    attention.col(p).maxCoeff(&best);
    m[p] = static_cast<int>(best) + 1;
  }
  return m;
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

/// Slot Attention: softmax over slots, attention-weighted mean over locations,
/// GRU update and a residual MLP, repeated for a fixed number of iterations.
struct SlotAttention {
  nn::LayerNorm norm_inputs, norm_slots, norm_mlp;
  nn::Linear to_q, to_k, to_v;
  nn::GruCell gru;
  nn::Mlp mlp;
  double epsilon = 1e-8;
  static constexpr double kGateBias = 3.0;

  static SlotAttention init(int c, int mlp_hidden, Rng& rng) {
    SlotAttention sa;
    sa.norm_inputs = nn::LayerNorm::init(c);
    sa.norm_slots = nn::LayerNorm::init(c);
    sa.norm_mlp = nn::LayerNorm::init(c);
    sa.to_q = nn::Linear::init(c, c, rng);
    sa.to_k = nn::Linear::init(c, c, rng);
    sa.to_v = nn::Linear::init(c, c, rng);
    sa.gru = nn::GruCell::init(c, c, rng);
    // Update gates start mostly closed. With the near-uniform attention of an untrained model
    // every slot receives the same update, and an open gate would contract slot differences
    // geometrically over a long recurrence until all slots coincide.
    sa.gru.input.bias.mutable_value().middleCols(c, c).setConstant(kGateBias);
    sa.mlp = nn::Mlp::init(c, mlp_hidden, c, rng, true);
    return sa;
  }

  /// `inputs` are the [h*w, c] feature tokens with positional information already added.
  SlotState operator()(const Var& query, const Var& inputs, int n_iters) const {
    if (n_iters < 1) throw PreconditionError("aggregate: n_iters must be >= 1");
    if (query.cols() != inputs.cols())
      throw ShapeError("aggregate: query has c=" + std::to_string(query.cols()) + ", features have c=" +
                       std::to_string(inputs.cols()));
    require_finite(query.value(), "aggregate query");
    require_finite(inputs.value(), "aggregate features");

    const double temperature = 1.0 / std::sqrt(static_cast<double>(query.cols()));
    const Var x = norm_inputs(inputs);
    const Var k = to_k(x), v = to_v(x);
    Var slots = query;
    Var attn;  // [h*w, s]
    for (int it = 0; it < n_iters; ++it) {
      const Var prev = slots;
      const Var q = to_q(norm_slots(slots));
      attn = ad::softmax_rows(ad::scale(ad::matmul_bt(k, q), temperature));
      const Var weights = ad::normalize_cols(attn, epsilon);
      const Var updates = ad::matmul_at(weights, v);
      slots = gru(updates, prev);
      slots = ad::add(slots, mlp(norm_mlp(slots)));
    }
    SlotState st;
    st.query = query;
    st.slots = slots;
    st.attention = attn.value().transpose();
    st.masks = argmax_masks(st.attention);
    return st;
  }

  void visit(const std::string& prefix, const nn::ParamVisitor& v) {
    norm_inputs.visit(prefix + ".norm_inputs", v);
    norm_slots.visit(prefix + ".norm_slots", v);
    norm_mlp.visit(prefix + ".norm_mlp", v);
    to_q.visit(prefix + ".to_q", v);
    to_k.visit(prefix + ".to_k", v);
    to_v.visit(prefix + ".to_v", v);
    gru.visit(prefix + ".gru", v);
    mlp.visit(prefix + ".mlp", v);
  }
};

}  // namespace vocl::model
