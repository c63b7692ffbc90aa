#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "vocl/eval/metrics.hpp"
#include "vocl/train/dataset.hpp"
#include "vocl/train/unroll.hpp"

namespace vocl::eval {

inline MaskSequence predicted_masks(const std::vector<model::SlotState>& states, int grid, int n_slots) {
  MaskSequence m;
  m.length = static_cast<int>(states.size());
  m.height = m.width = grid;
  m.n_labels = n_slots;
  m.source = MaskSource::prediction;
  for (const auto& s : states) m.labels.insert(m.labels.end(), s.masks.begin(), s.masks.end());
  return m;
}

inline MaskSequence ground_truth_masks(const data::VideoClip& clip) {
  MaskSequence m;
  m.length = clip.length;
  m.height = clip.height;
  m.width = clip.width;
  m.n_labels = clip.n_objects();
  m.source = MaskSource::ground_truth;
  m.labels.assign(clip.masks.begin(), clip.masks.end());
  return m;
}

struct EvalOptions {
  std::optional<std::pair<int, int>> fixed_offsets;
  bool per_frame_ari = false;
  int workers = 1;
};

struct ClipEvaluation {
  DiscoveryScores scores;
  double loss = 0;
  int boundary_fallbacks = 0;
};

inline ClipEvaluation evaluate_clip(const model::Model& m, const data::VideoClip& clip,
                                    const std::vector<FeatureMap>& features, const EvalOptions& opt = {}) {
  ad::NoGradGuard no_grad;
  train::UnrollOptions u;
  u.mode = train::Mode::eval;
  u.fixed_offsets = opt.fixed_offsets;
  const auto r = train::unroll_clip(m, features, u, &clip);
  const auto pred = upsample_nearest(predicted_masks(r.states, m.grid(), m.n_slots()), clip.height, clip.width);
  return {score_masks(pred, ground_truth_masks(clip), opt.per_frame_ari), r.loss.item(), r.boundary_fallbacks};
}

struct Aggregate {
  double ari = 0, ari_fg = 0, mbo = 0, miou = 0, loss = 0;
  int n_clips = 0;
  int boundary_fallbacks = 0;
  double ari_plus_ari_fg() const { return ari + ari_fg; }
};

inline double metric_value(const Aggregate& a, const std::string& name) {
  if (name == "ARI") return a.ari;
  if (name == "ARI_fg") return a.ari_fg;
  if (name == "mBO") return a.mbo;
  if (name == "mIoU") return a.miou;
  if (name == "ARI_plus_ARIfg") return a.ari_plus_ari_fg();
  throw PreconditionError("unknown metric '" + name + "'");
}

/// Means over clips; clips where a metric is not applicable are left out of that mean.
inline Aggregate aggregate(const std::vector<ClipEvaluation>& evals) {
  Aggregate a;
  int n[4] = {0, 0, 0, 0};
  for (const auto& e : evals) {
    if (e.scores.ari) a.ari += *e.scores.ari, ++n[0];
    if (e.scores.ari_fg) a.ari_fg += *e.scores.ari_fg, ++n[1];
    if (e.scores.mbo) a.mbo += *e.scores.mbo, ++n[2];
    if (e.scores.miou) a.miou += *e.scores.miou, ++n[3];
    a.loss += e.loss;
    a.boundary_fallbacks += e.boundary_fallbacks;
  }
  a.n_clips = static_cast<int>(evals.size());
  if (n[0]) a.ari /= n[0];
  if (n[1]) a.ari_fg /= n[1];
  if (n[2]) a.mbo /= n[2];
  if (n[3]) a.miou /= n[3];
  if (!evals.empty()) a.loss /= static_cast<double>(evals.size());
  return a;
}

/// Evaluates clips [begin, end) of a dataset; clips are independent and split across workers.
inline std::vector<ClipEvaluation> evaluate_clips(const model::Model& m, const train::Dataset& ds, std::size_t begin,
                                                  std::size_t end, const EvalOptions& opt = {}) {
  std::vector<ClipEvaluation> out(end - begin);
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      ad::NoGradGuard no_grad;
      const auto& clip = ds.clips[begin + i];
      out[i] = evaluate_clip(m, clip, train::clip_features(m, clip, ds.dir), opt);
    }
  };
  const std::size_t n = out.size();
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, opt.workers)), 1, std::max<std::size_t>(1, n));
  if (workers <= 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(n * w / workers, n * (w + 1) / workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace vocl::eval
