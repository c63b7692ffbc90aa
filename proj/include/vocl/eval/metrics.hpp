#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vocl/core/error.hpp"
#include "vocl/eval/hungarian.hpp"

namespace vocl::eval {

enum class MaskSource { prediction, ground_truth };

/// Label volume [T, H, W]. Predictions use labels 1..s; ground truth 0..K with 0 background.
struct MaskSequence {
  std::vector<int> labels;
  int length = 0;
  int height = 0;
  int width = 0;
  int n_labels = 0;
  MaskSource source = MaskSource::prediction;

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
  int at(int t, std::size_t p) const { return labels[t * frame_size() + p]; }
};

/// Nearest-neighbour upsampling of [T, h, w] labels to [T, H, W].
inline MaskSequence upsample_nearest(const MaskSequence& m, int H, int W) {
  MaskSequence out = m;
  out.height = H;
  out.width = W;
  out.labels.resize(static_cast<std::size_t>(m.length) * H * W);
  for (int t = 0; t < m.length; ++t)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int sy = static_cast<int>(static_cast<long long>(y) * m.height / H);
        const int sx = static_cast<int>(static_cast<long long>(x) * m.width / W);
        out.labels[(static_cast<std::size_t>(t) * H + y) * W + x] =
            m.labels[(static_cast<std::size_t>(t) * m.height + sy) * m.width + sx];
      }
  return out;
}

namespace detail {

inline void require_same_shape(const MaskSequence& a, const MaskSequence& b, const char* what) {
  if (a.length != b.length || a.height != b.height || a.width != b.width || a.labels.size() != b.labels.size())
    throw ShapeError(std::string(what) + ": prediction and ground truth shapes differ");
}

inline double choose2(double n) { return n * (n - 1) / 2; }

/// Pair-counting ARI from a contingency table over the selected points.
inline std::optional<double> ari_from_points(const std::vector<std::pair<int, int>>& points) {
  if (points.empty()) return std::nullopt;
  std::map<std::pair<int, int>, long long> joint;
  std::map<int, long long> rows, cols;
  for (const auto& [a, b] : points) {
    ++joint[{a, b}];
    ++rows[a];
    ++cols[b];
  }
  double sum_joint = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, n] : joint) sum_joint += choose2(static_cast<double>(n));
  for (const auto& [k, n] : rows) sum_rows += choose2(static_cast<double>(n));
  for (const auto& [k, n] : cols) sum_cols += choose2(static_cast<double>(n));
  const double total = choose2(static_cast<double>(points.size()));
  const double expected = total > 0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  // Both partitions trivial in the same way (one cluster each, or all singletons).
  if (denom == 0.0) return 1.0;
  return (sum_joint - expected) / denom;
}

}  // namespace detail

/// Adjusted Rand index over all T*H*W points jointly. With `foreground_only`, points whose
/// ground-truth label is 0 are dropped first; returns nullopt when no points remain.
inline std::optional<double> ari(const MaskSequence& pred, const MaskSequence& gt, bool foreground_only) {
  detail::require_same_shape(pred, gt, "ari");
  std::vector<std::pair<int, int>> points;
  points.reserve(pred.labels.size());
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    if (foreground_only && gt.labels[i] == 0) continue;
    points.emplace_back(pred.labels[i], gt.labels[i]);
  }
  return detail::ari_from_points(points);
}

/// Per-frame ARI averaged over frames with a defined score.
inline std::optional<double> ari_per_frame(const MaskSequence& pred, const MaskSequence& gt, bool foreground_only) {
  detail::require_same_shape(pred, gt, "ari_per_frame");
  double sum = 0;
  int n = 0;
  for (int t = 0; t < pred.length; ++t) {
    std::vector<std::pair<int, int>> points;
    for (std::size_t p = 0; p < pred.frame_size(); ++p) {
      if (foreground_only && gt.at(t, p) == 0) continue;
      points.emplace_back(pred.at(t, p), gt.at(t, p));
    }
    if (auto v = detail::ari_from_points(points)) sum += *v, ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// IoU of every (ground-truth instance, predicted label) pair in one frame.
struct FrameOverlap {
  std::vector<int> gt_labels;    // present instances, background excluded
  std::vector<int> pred_labels;  // present predicted labels
  Matrix iou;                    // [gt, pred]
};

inline FrameOverlap frame_overlap(const MaskSequence& pred, const MaskSequence& gt, int t) {
  std::map<int, long long> gt_area, pred_area;
  std::map<std::pair<int, int>, long long> inter;
  for (std::size_t p = 0; p < pred.frame_size(); ++p) {
    const int a = pred.at(t, p), b = gt.at(t, p);
    ++pred_area[a];
    if (b == 0) continue;
    ++gt_area[b];
    ++inter[{b, a}];
  }
  FrameOverlap f;
  for (const auto& [k, n] : gt_area) f.gt_labels.push_back(k);
  for (const auto& [k, n] : pred_area) f.pred_labels.push_back(k);
  f.iou = Matrix::Zero(static_cast<Eigen::Index>(f.gt_labels.size()), static_cast<Eigen::Index>(f.pred_labels.size()));
  for (std::size_t i = 0; i < f.gt_labels.size(); ++i)
    for (std::size_t j = 0; j < f.pred_labels.size(); ++j) {
      const auto it = inter.find({f.gt_labels[i], f.pred_labels[j]});
      if (it == inter.end()) continue;
      const double n = static_cast<double>(it->second);
      f.iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          n / (gt_area[f.gt_labels[i]] + pred_area[f.pred_labels[j]] - n);
    }
  return f;
}

/// Mean over ground-truth instances (and frames) of the best IoU with any predicted mask.
inline std::optional<double> mbo(const MaskSequence& pred, const MaskSequence& gt) {
  detail::require_same_shape(pred, gt, "mbo");
  double sum = 0;
  long long n = 0;
  for (int t = 0; t < pred.length; ++t) {
    const auto f = frame_overlap(pred, gt, t);
    for (Eigen::Index i = 0; i < f.iou.rows(); ++i, ++n) sum += f.iou.cols() ? f.iou.row(i).maxCoeff() : 0.0;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Mean IoU over ground-truth instances under the per-frame optimal one-to-one matching;
/// unmatched instances score 0.
inline std::optional<double> miou(const MaskSequence& pred, const MaskSequence& gt) {
  detail::require_same_shape(pred, gt, "miou");
  double sum = 0;
  long long n = 0;
  for (int t = 0; t < pred.length; ++t) {
    const auto f = frame_overlap(pred, gt, t);
    const auto match = hungarian_max(f.iou);
    for (Eigen::Index i = 0; i < f.iou.rows(); ++i, ++n)
      if (match[i] >= 0) sum += f.iou(i, match[i]);
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct DiscoveryScores {
  std::optional<double> ari, ari_fg, mbo, miou;
};

inline DiscoveryScores score_masks(const MaskSequence& pred, const MaskSequence& gt, bool per_frame_ari = false) {
  DiscoveryScores s;
  s.ari = per_frame_ari ? ari_per_frame(pred, gt, false) : ari(pred, gt, false);
  s.ari_fg = per_frame_ari ? ari_per_frame(pred, gt, true) : ari(pred, gt, true);
  s.mbo = mbo(pred, gt);
  s.miou = miou(pred, gt);
  return s;
}

}  // namespace vocl::eval
