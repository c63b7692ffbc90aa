#pragma once

#include <optional>
#include <string>

#include "vocl/core/config.hpp"
#include "vocl/core/error.hpp"
#include "vocl/nn/layers.hpp"

namespace vocl::model {

/// Learnable relative time embeddings. Row k is the embedding for offset k from the
/// prediction target t+1; rows cover offsets 0..window.
struct TimeTable {
  Var table;  // [window + 1, c]

  static TimeTable init(int window, int c, Rng& rng) {
    return {ad::parameter(nn::normal_matrix(window + 1, c, 0.1, rng))};
  }
  int window() const { return static_cast<int>(table.rows()) - 1; }
  Var row(int offset) const {
    if (offset < 0 || offset > window())
      throw PreconditionError("time offset " + std::to_string(offset) + " outside table range 0.." +
                              std::to_string(window()));
    return ad::slice_rows(table, offset, 1);
  }
};

/// Maps slots (and, for randsfq, a feature map) to the next frame's query. Residual branches
/// start at zero, so every kind begins as the identity map.
///
/// randsfq: one pre-norm Transformer decoder block. Target tokens are the slots plus their
/// offset embedding, memory tokens the feature tokens plus theirs; the block applies
/// self-attention, cross-attention to the memory, then a feed-forward layer, each residual.
/// encoder_block: the same block without cross-attention and time embeddings.
/// identity: no parameters; the query is the slots.
struct Transitioner {
  TransitionerKind kind = TransitionerKind::identity;
  TimeInjection injection = TimeInjection::none;
  bool use_next_feature = true;
  int window = 1;

  nn::LayerNorm norm_self, norm_ffn;
  nn::MultiHeadAttention self_attn;
  nn::Mlp ffn;
  std::optional<nn::LayerNorm> norm_cross, norm_memory;
  std::optional<nn::MultiHeadAttention> cross_attn;
  std::optional<TimeTable> time;

  static Transitioner init(const RunConfig& cfg, Rng& rng) {
    Transitioner t;
    t.kind = cfg.model.transitioner;
    t.window = cfg.train.window_size;
    if (t.kind == TransitionerKind::identity) return t;
    const int c = cfg.model.channels;
    t.norm_self = nn::LayerNorm::init(c);
    t.norm_ffn = nn::LayerNorm::init(c);
    t.self_attn = nn::MultiHeadAttention::init(c, cfg.model.heads, rng, true);
    t.ffn = nn::Mlp::init(c, cfg.model.ffn_hidden, c, rng, true);
    if (t.kind == TransitionerKind::randsfq) {
      t.injection = cfg.model.time_injection;
      t.use_next_feature = cfg.model.use_next_feature;
      if (t.use_next_feature) {
        t.norm_cross = nn::LayerNorm::init(c);
        t.norm_memory = nn::LayerNorm::init(c);
        t.cross_attn = nn::MultiHeadAttention::init(c, cfg.model.heads, rng, true);
      }
      if (t.injection != TimeInjection::none) t.time = TimeTable::init(t.window, c, rng);
    }
    return t;
  }

  /// Adds (sum) or appends (extra token) the offset embedding.
  Var inject(const Var& tokens, int offset) const {
    if (!time) return tokens;
    const Var e = time->row(offset);
    return injection == TimeInjection::sum ? ad::add_row(tokens, e) : ad::concat_rows({tokens, e});
  }

  Var self_block(const Var& x) const {
    const Var n = norm_self(x);
    return ad::add(x, self_attn(n, n));
  }
  Var ffn_block(const Var& x) const { return ad::add(x, ffn(norm_ffn(x))); }

  /// Query from slots S_{t1} at slot_offset = t+1-t1 and feature tokens F_{t2} at
  /// feature_offset = t+1-t2. Evaluation uses offsets (1, 0).
  Var transit_randsfq(const Var& slots, int slot_offset, const Var& features, int feature_offset) const {
    if (kind != TransitionerKind::randsfq) throw PreconditionError("transit_randsfq on a non-randsfq transitioner");
    if (slot_offset < 1 || slot_offset > window)
      throw PreconditionError("slot_offset " + std::to_string(slot_offset) + " outside 1.." + std::to_string(window));
    if (feature_offset < 0 || feature_offset > window - 1)
      throw PreconditionError("feature_offset " + std::to_string(feature_offset) + " outside 0.." +
                              std::to_string(window - 1));
    const Eigen::Index s = slots.rows();
    Var x = self_block(inject(slots, slot_offset));
    if (use_next_feature) {
      if (features.cols() != slots.cols()) throw ShapeError("transit_randsfq: feature/slot channel mismatch");
      const Var memory = norm_memory->operator()(inject(features, feature_offset));
      x = ad::add(x, cross_attn->operator()(norm_cross->operator()(x), memory));
    }
    x = ffn_block(x);
    return x.rows() == s ? x : ad::slice_rows(x, 0, s);
  }

  Var transit_baseline(const Var& slots) const {
    if (kind != TransitionerKind::encoder_block) throw PreconditionError("transit_baseline on a non-baseline transitioner");
    return ffn_block(self_block(slots));
  }

  /// Dispatch on kind. Baselines only ever see the latest slots.
  Var operator()(const Var& slots, int slot_offset, const Var& features, int feature_offset) const {
    switch (kind) {
      case TransitionerKind::randsfq: return transit_randsfq(slots, slot_offset, features, feature_offset);
      case TransitionerKind::encoder_block: return transit_baseline(slots);
      case TransitionerKind::identity: return slots;
    }
    return slots;
  }

  void visit(const std::string& prefix, const nn::ParamVisitor& v) {
    if (kind == TransitionerKind::identity) return;
    norm_self.visit(prefix + ".norm_self", v);
    self_attn.visit(prefix + ".self_attn", v);
    if (cross_attn) {
      norm_cross->visit(prefix + ".norm_cross", v);
      norm_memory->visit(prefix + ".norm_memory", v);
      cross_attn->visit(prefix + ".cross_attn", v);
    }
    norm_ffn.visit(prefix + ".norm_ffn", v);
    ffn.visit(prefix + ".ffn", v);
    if (time) v(prefix + ".time_table", time->table);
  }
};

}  // namespace vocl::model
