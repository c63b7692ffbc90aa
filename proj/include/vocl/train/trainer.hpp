#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vocl/eval/evaluate.hpp"
#include "vocl/nn/optim.hpp"
#include "vocl/train/dataset.hpp"
#include "vocl/train/unroll.hpp"

namespace vocl::train {

struct TrainOptions {
  fs::path out_dir;  // empty: keep everything in memory
  std::function<void(const Json&)> on_record;
  /// Called after every optimizer step with (step, loss).
  std::function<void(int, double)> on_step;
};

struct TrainResult {
  model::Model model;
  std::vector<double> step_losses;
  std::vector<Json> records;
  double best_score = -1e300;
  long long best_step = -1;
};

/// Cycles through a permutation of clip indices, reshuffling whenever it is exhausted.
class ClipOrder {
 public:
  ClipOrder(std::size_t n, Rng rng) : rng_(std::move(rng)), order_(n) { reshuffle(); }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline Json validation_record(int step, double loss, const eval::Aggregate& a) {
  return {{"step", step}, {"loss", loss}, {"val_ARI", a.ari}, {"val_ARI_fg", a.ari_fg}, {"val_mBO", a.mbo},
          {"val_mIoU", a.miou}};
}

/// Fixed-step optimization with periodic eval-mode validation on the last `val_clips` clips
/// of the dataset. With an output directory, writes metrics.jsonl, last.ckpt and best.ckpt.
inline TrainResult train_loop(const RunConfig& cfg, const Dataset& data, const TrainOptions& opt = {}) {
  validate(cfg);
  for (const auto& c : data.clips)
    if (c.length != cfg.data.clip_len || c.height != cfg.data.image_size)
      throw DataError("clip " + c.clip_id + " does not match the configured clip_len/image_size");
  const std::size_t n_val =
      data.size() > static_cast<std::size_t>(cfg.train.val_clips) ? static_cast<std::size_t>(cfg.train.val_clips) : 0;
  const std::size_t n_train = data.size() - n_val;
  if (n_train == 0) throw DataError("dataset has no training clips");

  Rng init_rng = make_rng(cfg.seed, "init");
  Rng sampler = make_rng(cfg.seed, "sampler");
  Rng query_rng = make_rng(cfg.seed, "query");
  ClipOrder order(n_train, make_rng(cfg.seed, "order"));
  TrainResult res{model::Model::init(cfg, init_rng), {}, {}, -1e300, -1};
  model::Model& m = res.model;
  nn::NamedParams params = m.parameters();
  nn::Adam adam(cfg.train.beta1, cfg.train.beta2);
  const nn::WarmupCosine schedule{cfg.train.lr, cfg.train.warmup_steps, cfg.train.steps, cfg.train.min_lr_ratio};

  // Frozen encoders produce constants, so features are computed once.
  std::vector<std::vector<FeatureMap>> cache;
  if (m.encoder.frozen) {
    cache.reserve(n_train);
    for (std::size_t i = 0; i < n_train; ++i) cache.push_back(clip_features(m, data.clips[i], data.dir));
  }

  std::ofstream log;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    log.open(opt.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!log) throw Error("cannot write " + (opt.out_dir / "metrics.jsonl").string());
  }
  auto validate_and_log = [&](int step, double interval_loss) {
    eval::Aggregate agg;
    if (n_val > 0) agg = eval::aggregate(eval::evaluate_clips(m, data, n_train, data.size()));
    Json rec = validation_record(step, interval_loss, agg);
    res.records.push_back(rec);
    if (log) log << rec.dump() << '\n' << std::flush;
    if (opt.on_record) opt.on_record(rec);
    if (n_val > 0 && agg.ari_plus_ari_fg() > res.best_score) {
      res.best_score = agg.ari_plus_ari_fg();
      res.best_step = step;
      if (!opt.out_dir.empty()) model::save_checkpoint(m, step, opt.out_dir / "best.ckpt");
    }
  };

  double interval_sum = 0;
  int interval_n = 0;
  for (int step = 0; step < cfg.train.steps; ++step) {
    nn::zero_grads(params);
    double step_loss = 0;
    for (int b = 0; b < cfg.train.batch_size; ++b) {
      const std::size_t idx = order.next();
      const auto features = m.encoder.frozen ? cache[idx] : clip_features(m, data.clips[idx], data.dir);
      UnrollOptions u;
      u.mode = Mode::train;
      u.sampler = &sampler;
      // Fresh first-frame noise every visit; evaluation uses the clip-keyed draw.
      const Matrix noise = nn::normal_matrix(m.n_slots(), m.channels(), 1.0, query_rng);
      if (cfg.model.initial_query == InitialQueryKind::gaussian) u.query_noise = &noise;
      UnrollResult r;
      try {
        r = unroll_clip(m, features, u, &data.clips[idx]);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) + " (clip " +
                           data.clips[idx].clip_id + "); parameter norms: " + parameter_norms(m));
      }
      step_loss += r.loss.item();
      ad::backward(ad::scale(r.loss, 1.0 / cfg.train.batch_size));
    }
    step_loss /= cfg.train.batch_size;
    nn::clip_grad_norm(params, cfg.train.grad_clip);
    adam.step(params, schedule(step));
    res.step_losses.push_back(step_loss);
    if (opt.on_step) opt.on_step(step, step_loss);
    interval_sum += step_loss;
    ++interval_n;
    if ((step + 1) % cfg.train.val_every == 0 || step + 1 == cfg.train.steps) {
      validate_and_log(step + 1, interval_sum / interval_n);
      interval_sum = 0;
      interval_n = 0;
    }
  }
  if (cfg.train.steps == 0) validate_and_log(0, 0.0);
  if (!opt.out_dir.empty()) model::save_checkpoint(m, cfg.train.steps, opt.out_dir / "last.ckpt");
  return res;
}

}  // namespace vocl::train
