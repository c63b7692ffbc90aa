#pragma once

#include <optional>
#include <string>

#include "vocl/eval/evaluate.hpp"

namespace vocl::analysis {

/// values(i-1, j-1) is the metric when every transition reads slots at slot_offset i and
/// features at feature_offset j-1. Rows are slot offsets, columns feature offsets.
struct OffsetMatrix {
  Matrix values;
  Eigen::MatrixXi boundary_fallbacks;
  std::string metric = "ARI_fg";
  std::optional<double> baseline_value;

  int delta() const { return static_cast<int>(values.rows()); }
  double block_mean(int row0, int col0, int n) const { return values.block(row0, col0, n, n).mean(); }
};

inline Json to_json(const OffsetMatrix& m) {
  Json rows = Json::array(), falls = Json::array();
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    Json r = Json::array(), f = Json::array();
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      r.push_back(m.values(i, j));
      f.push_back(m.boundary_fallbacks(i, j));
    }
    rows.push_back(r);
    falls.push_back(f);
  }
  Json j = {{"metric", m.metric}, {"delta", m.delta()}, {"rows", "slot_offset 1..delta"},
            {"cols", "feature_offset 0..delta-1"}, {"values", rows}, {"boundary_fallbacks", falls}};
  j["baseline_value"] = m.baseline_value ? Json(*m.baseline_value) : Json(nullptr);
  return j;
}

inline OffsetMatrix offset_matrix_from_json(const Json& j) {
  OffsetMatrix m;
  m.metric = j.at("metric").get<std::string>();
  const int d = j.at("delta").get<int>();
  m.values.resize(d, d);
  m.boundary_fallbacks.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      m.values(i, k) = j.at("values").at(i).at(k).get<double>();
      m.boundary_fallbacks(i, k) = j.at("boundary_fallbacks").at(i).at(k).get<int>();
    }
  if (!j.at("baseline_value").is_null()) m.baseline_value = j.at("baseline_value").get<double>();
  return m;
}

/// Evaluates clips [begin, end) once per offset pair.
inline OffsetMatrix offset_matrix(const model::Model& m, const train::Dataset& ds, std::size_t begin, std::size_t end,
                                  int delta, const std::string& metric = "ARI_fg", int workers = 1) {
  if (m.transitioner.kind != TransitionerKind::randsfq)
    throw PreconditionError("offset matrix needs a randsfq checkpoint (baselines only ever see the latest slots)");
  if (delta < 1 || delta > m.config.train.window_size)
    throw PreconditionError("delta " + std::to_string(delta) + " exceeds the trained window " +
                            std::to_string(m.config.train.window_size) + "; unseen offsets have untrained embeddings");
  OffsetMatrix out;
  out.metric = metric;
  out.values.resize(delta, delta);
  out.boundary_fallbacks.setZero(delta, delta);
  for (int i = 1; i <= delta; ++i)
    for (int j = 1; j <= delta; ++j) {
      eval::EvalOptions opt;
      opt.fixed_offsets = std::make_pair(i, j - 1);
      opt.workers = workers;
      const auto agg = eval::aggregate(eval::evaluate_clips(m, ds, begin, end, opt));
      out.values(i - 1, j - 1) = eval::metric_value(agg, metric);
      out.boundary_fallbacks(i - 1, j - 1) = agg.boundary_fallbacks;
    }
  return out;
}

}  // namespace vocl::analysis
