#pragma once

#include <string>

#include "vocl/nn/layers.hpp"

namespace vocl::model {

struct Decoded {
  Var reconstruction;  // [h*w, c]
  Matrix masks;        // [s, h*w] mixture weights
};

/// [h*w, 4] token-center coordinates (y, x, 1-y, 1-x) in [0, 1].
inline Matrix grid_coordinates(int grid) {
  Matrix out(grid * grid, 4);
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      const double u = (y + 0.5) / grid, v = (x + 0.5) / grid;
      out.row(y * grid + x) << u, v, 1.0 - u, 1.0 - v;
    }
  return out;
}

/// Spatial-broadcast mixture decoder. Every slot is broadcast over the grid, combined with an
/// embedding of the grid coordinates and mapped by a shared pixel-wise MLP to c content
/// channels plus one logit; the reconstruction is the softmax-over-slots mixture of the contents.
/// The first layer is split so the slot part runs once per slot and the coordinate part once.
struct Decoder {
  nn::Linear slot_proj;  // first layer, slot part
  nn::Linear position;   // first layer, coordinate part
  Matrix coords;         // [h*w, 4], fixed
  nn::Linear hidden;
  nn::Linear head;  // -> c + 1

  static Decoder init(int grid, int c, int hidden_dim, Rng& rng) {
    Decoder d;
    d.slot_proj = nn::Linear::init(c, hidden_dim, rng);
    d.position = nn::Linear::init(4, hidden_dim, rng);
    d.coords = grid_coordinates(grid);
    d.hidden = nn::Linear::init(hidden_dim, hidden_dim, rng);
    d.head = nn::Linear::init(hidden_dim, c + 1, rng);
    return d;
  }

  Decoded operator()(const Var& slots) const {
    const Eigen::Index s = slots.rows();
    const Eigen::Index n = coords.rows();
    const Eigen::Index c = head.out() - 1;
    if (slots.cols() != slot_proj.in()) throw ShapeError("decode: slot width does not match decoder");
    const Var h1 = ad::relu(ad::add(ad::repeat_rows(slot_proj(slots), n), ad::tile_rows(position(ad::constant(coords)), s)));
    const Var out = head(ad::relu(hidden(h1)));
    const Var content = ad::slice_cols(out, 0, c);
    const Var logits = ad::slice_cols(out, c, 1);
    return {ad::mixture(content, logits, s), ad::mixture_weights(logits.value(), s)};
  }

  void visit(const std::string& prefix, const nn::ParamVisitor& v) {
    slot_proj.visit(prefix + ".slot_proj", v);
    position.visit(prefix + ".position", v);
    hidden.visit(prefix + ".hidden", v);
    head.visit(prefix + ".head", v);
  }
};

}  // namespace vocl::model
