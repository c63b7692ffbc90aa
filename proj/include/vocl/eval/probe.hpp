#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vocl/eval/evaluate.hpp"
#include "vocl/nn/optim.hpp"

namespace vocl::eval {

/// One row per (clip, frame, slot). Label 0 means the slot matched no object; labels 1..n
/// are object classes. Boxes are only meaningful where the label is positive.
struct ProbeData {
  Matrix x;
  std::vector<int> labels;
  Matrix boxes;  // [rows, 4]
  int n_positive() const {
    int n = 0;
    for (int l : labels) n += l > 0;
    return n;
  }
};

/// Slots from eval-mode unrolling of clips [begin, end), each matched to ground truth with the
/// same per-frame optimal IoU assignment used by mIoU.
inline ProbeData collect_probe_data(const model::Model& m, const train::Dataset& ds, std::size_t begin,
                                    std::size_t end) {
  ProbeData d;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<data::Box> boxes;
  ad::NoGradGuard no_grad;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& clip = ds.clips[i];
    train::UnrollOptions u;
    u.mode = train::Mode::eval;
    const auto r = train::unroll_clip(m, train::clip_features(m, clip, ds.dir), u, &clip);
    const auto pred = upsample_nearest(predicted_masks(r.states, m.grid(), m.n_slots()), clip.height, clip.width);
    const auto gt = ground_truth_masks(clip);
    for (int t = 0; t < clip.length; ++t) {
      const auto f = frame_overlap(pred, gt, t);
      std::vector<int> slot_object(m.n_slots(), -1);
      const auto match = hungarian_max(f.iou);
      for (Eigen::Index g = 0; g < f.iou.rows(); ++g)
        if (match[g] >= 0 && f.iou(g, match[g]) > 0) slot_object[f.pred_labels[match[g]] - 1] = f.gt_labels[g] - 1;
      const Matrix& slots = r.states[t].slots.value();
      for (int k = 0; k < m.n_slots(); ++k) {
        rows.push_back(slots.row(k));
        const int obj = slot_object[k];
        d.labels.push_back(obj >= 0 ? clip.classes[obj] : 0);
        boxes.push_back(obj >= 0 ? clip.box(t, obj) : data::Box{0, 0, 0, 0});
      }
    }
  }
  d.x.resize(static_cast<Eigen::Index>(rows.size()), m.channels());
  d.boxes.resize(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    d.x.row(static_cast<Eigen::Index>(r)) = rows[r];
    for (int j = 0; j < 4; ++j) d.boxes(static_cast<Eigen::Index>(r), j) = boxes[r][j];
  }
  return d;
}

struct ProbeConfig {
  int n_classes = 3;
  int hidden = 64;
  int steps = 600;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

/// Two-layer MLP with a class head (n_classes + 1, index 0 = none) and a box head.
/// Inputs are standardized with training-set statistics.
struct Probe {
  Eigen::RowVectorXd mean, inv_std;
  Eigen::RowVectorXd box_mean, box_std;  // box head regresses standardized targets
  nn::Linear fc1, cls, box;

  Var hidden(const Matrix& x) const {
    const Matrix z = ((x.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
    return ad::relu(fc1(ad::constant(z)));
  }
  Matrix boxes(const Matrix& x) const {
    const Matrix z = box(hidden(x)).value();
    return ((z.array().rowwise() * box_std.array()).rowwise() + box_mean.array()).matrix();
  }
};

/// Coefficient of determination averaged uniformly over columns. A constant column scores 1
/// when predicted exactly and 0 otherwise.
inline double r2_score(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols() || truth.rows() == 0)
    throw ShapeError("r2_score: shape mismatch or empty input");
  double sum = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const double mu = truth.col(j).mean();
    const double ss_tot = (truth.col(j).array() - mu).square().sum();
    const double ss_res = (truth.col(j) - pred.col(j)).squaredNorm();
    sum += ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
  }
  return sum / static_cast<double>(truth.cols());
}

namespace detail {
inline Matrix positive_rows(const Matrix& m, const std::vector<int>& labels) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0) idx.push_back(static_cast<Eigen::Index>(i));
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}
}  // namespace detail

/// Full-batch training of cross-entropy on every slot plus box MSE on matched slots.
inline Probe probe_train(const ProbeData& d, const ProbeConfig& cfg) {
  if (d.n_positive() == 0) throw DataError("probe: no slot matched a ground-truth object; nothing to learn");
  Rng rng = make_rng(cfg.seed, "probe");
  const int c = static_cast<int>(d.x.cols());
  Probe p;
  p.mean = d.x.colwise().mean();
  const Eigen::RowVectorXd var = (d.x.rowwise() - p.mean).array().square().colwise().mean();
  p.inv_std = (var.array() + 1e-8).rsqrt();
  p.fc1 = nn::Linear::init(c, cfg.hidden, rng);
  p.cls = nn::Linear::init(cfg.hidden, cfg.n_classes + 1, rng);
  p.box = nn::Linear::init(cfg.hidden, 4, rng);
  nn::NamedParams params;
  for (auto* l : {&p.fc1, &p.cls, &p.box}) l->visit("probe", [&](const std::string& n, Var& v) { params.emplace_back(n, v); });

  const Matrix x_pos = detail::positive_rows(d.x, d.labels);
  const Matrix box_pos = detail::positive_rows(d.boxes, d.labels);
  p.box_mean = box_pos.colwise().mean();
  p.box_std = ((box_pos.rowwise() - p.box_mean).array().square().colwise().mean() + 1e-12).sqrt();
  const Matrix box_z = ((box_pos.rowwise() - p.box_mean).array().rowwise() / p.box_std.array()).matrix();
  nn::Adam adam;
  for (int step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(params);
    const Var loss = ad::add(ad::cross_entropy(p.cls(p.hidden(d.x)), d.labels), ad::mse(p.box(p.hidden(x_pos)), box_z));
    ad::backward(loss);
    adam.step(params, cfg.lr);
  }
  return p;
}

struct ProbeScores {
  double top1 = 0;          // over every slot, "none" included
  double top1_objects = 0;  // over matched slots only
  double box_r2 = 0;        // over matched slots
  int n_samples = 0;
  int n_positive = 0;
};

inline ProbeScores probe_eval(const Probe& p, const ProbeData& d) {
  if (d.n_positive() == 0) throw DataError("probe: held-out data has no matched slots");
  ad::NoGradGuard no_grad;
  const Matrix logits = p.cls(p.hidden(d.x)).value();
  ProbeScores s;
  s.n_samples = static_cast<int>(d.labels.size());
  s.n_positive = d.n_positive();
  int hit = 0, hit_obj = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    const bool ok = best == d.labels[r];
    hit += ok;
    if (d.labels[r] > 0) hit_obj += ok;
  }
  s.top1 = static_cast<double>(hit) / s.n_samples;
  s.top1_objects = static_cast<double>(hit_obj) / s.n_positive;
  const Matrix x_pos = detail::positive_rows(d.x, d.labels);
  s.box_r2 = r2_score(detail::positive_rows(d.boxes, d.labels), p.boxes(x_pos));
  return s;
}

}  // namespace vocl::eval
