#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vocl/analysis/ablation.hpp"
#include "vocl/analysis/offset_matrix.hpp"
#include "vocl/analysis/plot.hpp"
#include "vocl/data/generate.hpp"
#include "vocl/eval/probe.hpp"
#include "vocl/train/trainer.hpp"

namespace vocl::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kOther = 1, kUsage = 2, kConfig = 3, kData = 4, kNumeric = 5 };

inline constexpr const char* kOutputRootEnv = "VOCL_OUTPUT_ROOT";

/// Output directory: explicit flag, else `$VOCL_OUTPUT_ROOT/<command>`, else `runs/<command>`.
inline fs::path output_dir(const std::string& flag, const std::string& command) {
  if (!flag.empty()) return flag;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / command;
}

/// Records what a command produced; written as manifest.json next to config.json.
class RunRecord {
 public:
  RunRecord(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    fs::create_directories(dir_);
  }
  const fs::path& dir() const { return dir_; }
  void snapshot(const RunConfig& cfg) {
    std::ofstream(dir_ / "config.json") << to_json(cfg).dump(1);
    add(dir_ / "config.json");
  }
  void add(const fs::path& p) { artifacts_.push_back(fs::relative(p, dir_).generic_string()); }
  void finish(const Json& extra = Json::object()) const {
    Json j = {{"command", command_}, {"artifacts", artifacts_}};
    j.update(extra);
    std::ofstream(dir_ / "manifest.json") << j.dump(1);
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> artifacts_;
};

inline void write_json(const fs::path& p, const Json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

inline Json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(p.string() + " is not valid JSON");
  return j;
}

inline Json scores_json(const eval::DiscoveryScores& s) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j = {{"ARI", opt(s.ari)}, {"ARI_fg", opt(s.ari_fg)}, {"mBO", opt(s.mbo)}, {"mIoU", opt(s.miou)}};
  j["ARI_plus_ARIfg"] = s.ari && s.ari_fg ? Json(*s.ari + *s.ari_fg) : Json(nullptr);
  return j;
}

inline Json aggregate_json(const eval::Aggregate& a) {
  return {{"ARI", a.ari},   {"ARI_fg", a.ari_fg}, {"mBO", a.mbo}, {"mIoU", a.miou},
          {"ARI_plus_ARIfg", a.ari_plus_ari_fg()}, {"loss", a.loss}, {"n_clips", a.n_clips},
          {"boundary_fallbacks", a.boundary_fallbacks}};
}

inline void log_line(const std::string& what) { std::cerr << "[vocl] " << what << '\n'; }

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string device = "cpu";
  int workers = 1;
};

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  RunConfig resolve(const Globals& g) const {
    std::vector<std::string> ov = overrides;
    if (g.seed) ov.push_back("seed=" + std::to_string(*g.seed));
    return resolve_config(file, ov);
  }
};

inline void add_config_args(CLI::App* sub, ConfigArgs& a) {
  sub->add_option("--config", a.file, "JSON run config (defaults when omitted)");
  sub->add_option("--set", a.overrides, "key=value override, repeatable (dotted or unique leaf key)");
}

/// Clip range [0, n) used by evaluation commands; `limit` <= 0 means all clips.
inline std::pair<std::size_t, std::size_t> clip_range(const train::Dataset& ds, int limit) {
  const std::size_t n = limit > 0 ? std::min<std::size_t>(ds.size(), static_cast<std::size_t>(limit)) : ds.size();
  return {0, n};
}

inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"vocl: recurrent slot models with random slot-feature pair queries"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Global seed (overrides the config)");
  app.add_option("--device", g.device, "Compute device (only 'cpu' is available)");
  app.add_option("--workers", g.workers, "Worker threads for clip-parallel work")->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render a synthetic sprite dataset");
  ConfigArgs gen_cfg;
  std::string gen_out;
  int n_clips = 200;
  add_config_args(gen, gen_cfg);
  gen->add_option("--out", gen_out, "Dataset directory");
  gen->add_option("--n-clips", n_clips, "Number of clips")->check(CLI::PositiveNumber);

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  ConfigArgs tr_cfg;
  std::string tr_data, tr_out;
  add_config_args(tr, tr_cfg);
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Run directory");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_report, ev_out;
  bool ev_per_frame = false;
  int ev_limit = 0;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--report", ev_report, "Report path (default <out>/report.json)");
  ev->add_option("--out", ev_out, "Run directory");
  ev->add_option("--limit", ev_limit, "Evaluate only the first N clips");
  ev->add_flag("--per-frame-ari", ev_per_frame, "Average ARI over frames instead of whole clips");

  // matrix
  auto* mx = app.add_subcommand("matrix", "Offset matrix of a checkpoint");
  std::string mx_ckpt, mx_data, mx_out_file, mx_out, mx_metric = "ARI_fg", mx_baseline;
  int mx_delta = 5, mx_limit = 0;
  mx->add_option("--checkpoint", mx_ckpt, "randsfq checkpoint")->required();
  mx->add_option("--data", mx_data, "Dataset directory")->required();
  mx->add_option("--delta", mx_delta, "Largest offset");
  mx->add_option("--metric", mx_metric, "ARI, ARI_fg, mBO, mIoU or ARI_plus_ARIfg");
  mx->add_option("--baseline", mx_baseline, "Identity-transitioner checkpoint whose score is recorded alongside");
  mx->add_option("--limit", mx_limit, "Use only the first N clips");
  mx->add_option("--out", mx_out_file, "Matrix JSON path (default <run-dir>/matrix.json)");
  mx->add_option("--run-dir", mx_out, "Run directory");

  // ablate
  auto* ab = app.add_subcommand("ablate", "One-factor-at-a-time ablation grid");
  ConfigArgs ab_cfg;
  std::string ab_train, ab_eval, ab_out_file, ab_out;
  std::vector<std::string> ab_axes;
  std::vector<std::uint64_t> ab_seeds{0, 1, 2};
  add_config_args(ab, ab_cfg);
  ab->add_option("--data", ab_train, "Training dataset directory")->required();
  ab->add_option("--eval-data", ab_eval, "Held-out dataset directory")->required();
  ab->add_option("--axes", ab_axes, "key=v1,v2,... (repeatable)")->required();
  ab->add_option("--seeds", ab_seeds, "Seeds per variant");
  ab->add_option("--out", ab_out_file, "Grid JSON path (default <run-dir>/grid.json)");
  ab->add_option("--run-dir", ab_out, "Run directory (jobs are resumed from here)");

  // probe
  auto* pr = app.add_subcommand("probe", "Class/box probe on slots of a checkpoint");
  std::string pr_ckpt, pr_train, pr_eval, pr_out;
  eval::ProbeConfig pr_cfg;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
  pr->add_option("--data", pr_train, "Clips used to fit the probe")->required();
  pr->add_option("--eval-data", pr_eval, "Held-out clips")->required();
  pr->add_option("--steps", pr_cfg.steps, "Probe optimization steps");
  pr->add_option("--hidden", pr_cfg.hidden, "Probe hidden width");
  pr->add_option("--out", pr_out, "Run directory");

  // plot
  auto* pl = app.add_subcommand("plot", "Render a matrix or ablation grid JSON to PNG");
  std::string pl_in, pl_out, pl_metric = "ARI_plus_ARIfg";
  pl->add_option("--input", pl_in, "matrix.json or grid.json")->required();
  pl->add_option("--out", pl_out, "PNG path")->required();
  pl->add_option("--metric", pl_metric, "Metric for ablation bars");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (g.device != "cpu") throw ConfigError("device '" + g.device + "' is not available; only 'cpu' is supported");

    if (*gen) {
      const RunConfig cfg = gen_cfg.resolve(g);
      RunRecord rec(output_dir(gen_out, "data"), "gen-data");
      const auto man = data::generate_dataset(rec.dir(), cfg.data, cfg.model.n_slots, n_clips, cfg.seed, g.workers);
      // The dataset manifest (clip ids, seeds, files) doubles as the artifact manifest.
      rec.snapshot(cfg);
      log_line("wrote " + std::to_string(n_clips) + " clips to " + rec.dir().string());
      return kOk;
    }

    if (*tr) {
      const RunConfig cfg = tr_cfg.resolve(g);
      const auto ds = train::Dataset::load(tr_data);
      RunRecord rec(output_dir(tr_out, "train"), "train");
      rec.snapshot(cfg);
      train::TrainOptions opt;
      opt.out_dir = rec.dir();
      opt.on_record = [](const Json& r) { log_line("validation " + r.dump()); };
      const auto res = train::train_loop(cfg, ds, opt);
      rec.add(rec.dir() / "metrics.jsonl");
      rec.add(rec.dir() / "last.ckpt");
      if (fs::exists(rec.dir() / "best.ckpt")) rec.add(rec.dir() / "best.ckpt");
      rec.finish({{"best_step", res.best_step}, {"best_ARI_plus_ARIfg", res.best_score}});
      log_line("done; checkpoints in " + rec.dir().string());
      return kOk;
    }

    if (*ev) {
      const auto ck = model::load_checkpoint(ev_ckpt);
      const auto ds = train::Dataset::load(ev_data);
      RunRecord rec(output_dir(ev_out, "eval"), "eval");
      rec.snapshot(ck.model.config);
      eval::EvalOptions eo;
      eo.workers = g.workers;
      eo.per_frame_ari = ev_per_frame;
      const auto [lo, hi] = clip_range(ds, ev_limit);
      const auto evals = eval::evaluate_clips(ck.model, ds, lo, hi, eo);
      Json per_clip = Json::array();
      for (std::size_t i = 0; i < evals.size(); ++i) {
        Json c = scores_json(evals[i].scores);
        c["clip_id"] = ds.clips[lo + i].clip_id;
        c["loss"] = evals[i].loss;
        per_clip.push_back(c);
      }
      const auto agg = eval::aggregate(evals);
      const fs::path report = ev_report.empty() ? rec.dir() / "report.json" : fs::path(ev_report);
      write_json(report, {{"checkpoint", ev_ckpt}, {"step", ck.step}, {"aggregate", aggregate_json(agg)},
                          {"per_clip", per_clip}});
      if (report.parent_path() == rec.dir()) rec.add(report);
      rec.finish({{"report", fs::absolute(report).string()}});
      std::cout << aggregate_json(agg).dump() << '\n';
      return kOk;
    }

    if (*mx) {
      const auto ck = model::load_checkpoint(mx_ckpt);
      const auto ds = train::Dataset::load(mx_data);
      RunRecord rec(output_dir(mx_out, "matrix"), "matrix");
      rec.snapshot(ck.model.config);
      const auto [lo, hi] = clip_range(ds, mx_limit);
      auto m = analysis::offset_matrix(ck.model, ds, lo, hi, mx_delta, mx_metric, g.workers);
      if (!mx_baseline.empty()) {
        const auto base = model::load_checkpoint(mx_baseline);
        eval::EvalOptions eo;
        eo.workers = g.workers;
        m.baseline_value = eval::metric_value(eval::aggregate(eval::evaluate_clips(base.model, ds, lo, hi, eo)), mx_metric);
      }
      const fs::path out = mx_out_file.empty() ? rec.dir() / "matrix.json" : fs::path(mx_out_file);
      write_json(out, analysis::to_json(m));
      if (out.parent_path() == rec.dir()) rec.add(out);
      rec.finish({{"matrix", fs::absolute(out).string()}});
      std::cout << analysis::to_json(m).dump() << '\n';
      return kOk;
    }

    if (*ab) {
      const RunConfig base = ab_cfg.resolve(g);
      std::vector<analysis::Axis> axes;
      for (const auto& spec : ab_axes) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
          throw ConfigError("axis '" + spec + "' is not key=v1,v2,...");
        analysis::Axis a{spec.substr(0, eq), {}};
        std::stringstream ss(spec.substr(eq + 1));
        for (std::string v; std::getline(ss, v, ',');) {
          Json parsed = Json::parse(v, nullptr, false);
          a.values.push_back(parsed.is_discarded() ? Json(v) : parsed);
        }
        axes.push_back(std::move(a));
      }
      const auto train_ds = train::Dataset::load(ab_train);
      const auto eval_ds = train::Dataset::load(ab_eval);
      RunRecord rec(output_dir(ab_out, "ablate"), "ablate");
      rec.snapshot(base);
      analysis::GridOptions go;
      go.seeds = ab_seeds;
      go.out_dir = rec.dir();
      go.workers = g.workers;
      go.on_job = [](const std::string& v, std::uint64_t s) { log_line("job " + v + " seed " + std::to_string(s)); };
      const auto grid = analysis::ablation_grid(base, axes, train_ds, eval_ds, go);
      Json j = Json::array();
      for (const auto& v : grid) j.push_back(analysis::to_json(v));
      const fs::path out = ab_out_file.empty() ? rec.dir() / "grid.json" : fs::path(ab_out_file);
      write_json(out, {{"variants", j}});
      rec.add(rec.dir() / "jobs.json");
      if (out.parent_path() == rec.dir()) rec.add(out);
      rec.finish({{"grid", fs::absolute(out).string()}});
      return kOk;
    }

    if (*pr) {
      const auto ck = model::load_checkpoint(pr_ckpt);
      const auto fit = train::Dataset::load(pr_train);
      const auto held = train::Dataset::load(pr_eval);
      RunRecord rec(output_dir(pr_out, "probe"), "probe");
      rec.snapshot(ck.model.config);
      pr_cfg.n_classes = ck.model.config.data.n_classes;
      pr_cfg.seed = ck.model.config.seed;
      const auto probe =
          eval::probe_train(eval::collect_probe_data(ck.model, fit, 0, fit.size()), pr_cfg);
      const auto s = eval::probe_eval(probe, eval::collect_probe_data(ck.model, held, 0, held.size()));
      const Json j = {{"top1", s.top1}, {"top1_objects", s.top1_objects}, {"box_R2", s.box_r2},
                      {"n_samples", s.n_samples}, {"n_positive", s.n_positive}};
      write_json(rec.dir() / "probe.json", j);
      rec.add(rec.dir() / "probe.json");
      rec.finish();
      std::cout << j.dump() << '\n';
      return kOk;
    }

    if (*pl) {
      const Json j = read_json(pl_in);
      plot::Image img(1, 1);
      if (j.contains("values")) {
        img = plot::heatmap(analysis::offset_matrix_from_json(j).values);
      } else if (j.contains("variants")) {
        std::vector<double> means, spreads;
        for (const auto& v : j.at("variants")) {
          if (v.contains("skipped")) continue;
          analysis::VariantSummary s;
          for (const auto& r : v.at("runs")) s.runs.push_back(analysis::job_result_from_json(r));
          means.push_back(s.mean(pl_metric));
          spreads.push_back(s.spread(pl_metric));
        }
        if (means.empty()) throw DataError(pl_in + ": no completed variants to plot");
        img = plot::bar_table(means, spreads);
      } else {
        throw FormatError(pl_in + ": neither an offset matrix nor an ablation grid");
      }
      if (fs::path(pl_out).has_parent_path()) fs::create_directories(fs::path(pl_out).parent_path());
      plot::write_png(img, pl_out);
      log_line("wrote " + pl_out);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kUsage;
}

}  // namespace vocl::cli
