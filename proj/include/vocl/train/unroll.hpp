#pragma once

#include <optional>
#include <sstream>
#include <vector>

#include "vocl/model/model.hpp"
#include "vocl/train/recurrence.hpp"

namespace vocl::train {

enum class Mode { train, eval };

struct UnrollOptions {
  Mode mode = Mode::eval;
  Rng* sampler = nullptr;  // required in train mode when pairs are sampled
  /// Evaluation with fixed non-latest offsets (slot_offset, feature_offset); frames that would
  /// reach before frame 1 use frame 1 and are counted in `boundary_fallbacks`.
  std::optional<std::pair<int, int>> fixed_offsets;
  /// Overrides the clip-keyed first-frame noise of gaussian queries.
  const Matrix* query_noise = nullptr;
};

struct UnrollResult {
  std::vector<model::SlotState> states;
  std::vector<Var> reconstructions;
  std::vector<Matrix> decoder_masks;
  std::vector<PairSample> pairs;
  int boundary_fallbacks = 0;
  Var loss;
};

inline std::string parameter_norms(model::Model& m) {
  std::ostringstream os;
  bool first = true;
  m.visit([&](const std::string& name, Var& p) {
    os << (first ? "" : ", ") << name << "=" << p.value().norm();
    first = false;
  });
  return os.str();
}

/// Runs the aggregation-transition recurrence over a clip, decodes every frame and
/// evaluates the reconstruction objective.
inline UnrollResult unroll_clip(const model::Model& m, const std::vector<FeatureMap>& features,
                                const UnrollOptions& opt, const data::VideoClip* clip = nullptr) {
  const int T = static_cast<int>(features.size());
  if (T < 2) throw PreconditionError("unroll_clip needs at least 2 frames");
  const auto& tr = m.transitioner;
  const int window = m.config.train.window_size;
  const bool sampling = opt.mode == Mode::train && m.config.train.sample_pairs &&
                        tr.kind == TransitionerKind::randsfq && !opt.fixed_offsets;
  if (sampling && !opt.sampler) throw PreconditionError("train-mode unrolling needs a sampler stream");
  if (opt.fixed_offsets) {
    const auto [so, fo] = *opt.fixed_offsets;
    if (so < 1 || so > window || fo < 0 || fo > window - 1)
      throw PreconditionError("fixed offsets outside the trained window");
  }

  UnrollResult r;
  RecurrenceTrace trace(window);
  std::vector<Var> tokens(T);
  for (int t = 0; t < T; ++t) tokens[t] = m.tokens(features[t]);

  const int iters = m.config.model.n_sa_iters;
  Var query = m.initial_query(clip, opt.query_noise);
  r.states.push_back(m.aggregator(query, tokens[0], iters));
  r.states.back().frame_index = 1;
  trace.push_slots(1, r.states.back().slots);
  trace.push_feature(1, tokens[0]);

  for (int t = 1; t <= T - 1; ++t) {
    trace.push_feature(t + 1, tokens[t]);
    PairSample pair{t, t + 1, t + 1};
    if (sampling) {
      pair = sample_pair(t, window, trace, *opt.sampler);
    } else if (opt.fixed_offsets) {
      const auto [so, fo] = *opt.fixed_offsets;
      pair.t1 = t + 1 - so;
      pair.t2 = t + 1 - fo;
      if (pair.t1 < 1 || pair.t2 < 1) ++r.boundary_fallbacks;
      pair.t1 = std::max(pair.t1, trace.oldest_slots());
      pair.t2 = std::max(pair.t2, trace.oldest_feature());
    }
    r.pairs.push_back(pair);
    query = tr(trace.slots(pair.t1), pair.slot_offset(), trace.feature(pair.t2), pair.feature_offset());
    r.states.push_back(m.aggregator(query, tokens[t], m.config.model.n_sa_iters_next));
    r.states.back().frame_index = t + 1;
    trace.push_slots(t + 1, r.states.back().slots);
  }

  for (int t = 0; t < T; ++t) {
    auto dec = m.decoder(r.states[t].slots);
    if (!dec.reconstruction.value().allFinite())
      throw NumericError("non-finite reconstruction at frame " + std::to_string(t + 1));
    r.reconstructions.push_back(dec.reconstruction);
    r.decoder_masks.push_back(std::move(dec.masks));
  }
  r.loss = model::objective(r.reconstructions, features);
  if (!std::isfinite(r.loss.item())) throw NumericError("non-finite loss");
  return r;
}

}  // namespace vocl::train
