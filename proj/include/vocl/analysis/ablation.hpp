#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vocl/eval/evaluate.hpp"
#include "vocl/train/trainer.hpp"

namespace vocl::analysis {

namespace fs = std::filesystem;

/// One config key and the values it is swept over; every value yields a variant that differs
/// from the base config in this key only.
struct Axis {
  std::string key;
  std::vector<Json> values;
};

struct Variant {
  std::string name;
  RunConfig config;
  Json diff;  // keys that differ from the base, as {"section.key": [base, variant]}
  std::optional<std::string> skip_reason;
};

/// Flat {"section.key": value} view of a config, for diffs.
inline Json flatten(const Json& j, const std::string& prefix = "") {
  Json out = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      out.update(flatten(*it, key));
    else
      out[key] = *it;
  }
  return out;
}

inline Json config_diff(const RunConfig& base, const RunConfig& variant) {
  const Json a = flatten(to_json(base)), b = flatten(to_json(variant));
  Json d = Json::object();
  for (auto it = b.begin(); it != b.end(); ++it)
    if (a.at(it.key()) != *it) d[it.key()] = Json::array({a.at(it.key()), *it});
  return d;
}

/// Combinations that parse but make no sense; nullopt when the config is meaningful.
inline std::optional<std::string> incompatibility(const RunConfig& c) {
  const auto& m = c.model;
  if (m.transitioner != TransitionerKind::randsfq) {
    if (m.time_injection != TimeInjection::none && m.time_injection != TimeInjection::sum)
      return "time injection method only applies to randsfq";
    if (!m.use_next_feature) return "next-feature input only exists in randsfq";
  }
  return std::nullopt;
}

inline std::string variant_name(const std::string& key, const Json& value) {
  std::string v = value.is_string() ? value.get<std::string>() : value.dump();
  std::string k = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
  return k + "=" + v;
}

/// The base run ("full") followed by one variant per axis value. Values equal to the base
/// collapse into "full"; invalid or meaningless combinations are kept with a skip reason.
inline std::vector<Variant> expand_variants(const RunConfig& base, const std::vector<Axis>& axes) {
  std::vector<Variant> out{{"full", base, Json::object(), std::nullopt}};
  const Json base_json = to_json(base);
  for (const auto& axis : axes)
    for (const auto& value : axis.values) {
      Variant v;
      v.name = variant_name(axis.key, value);
      try {
        const Json doc = apply_overrides(base_json, {axis.key + "=" + value.dump()});
        v.config = config_from_json(doc);
      } catch (const ConfigError& e) {
        v.config = base;
        v.skip_reason = e.what();
        out.push_back(v);
        continue;
      }
      v.diff = config_diff(base, v.config);
      if (v.diff.empty()) continue;
      v.skip_reason = incompatibility(v.config);
      out.push_back(v);
    }
  return out;
}

/// Score of one trained job on the evaluation clips.
struct JobResult {
  std::string variant;
  std::uint64_t seed = 0;
  eval::Aggregate scores;
};

inline Json to_json(const JobResult& r) {
  const auto& a = r.scores;
  return {{"variant", r.variant}, {"seed", r.seed}, {"ARI", a.ari}, {"ARI_fg", a.ari_fg}, {"mBO", a.mbo},
          {"mIoU", a.miou}, {"ARI_plus_ARIfg", a.ari_plus_ari_fg()}, {"loss", a.loss}, {"n_clips", a.n_clips}};
}

inline JobResult job_result_from_json(const Json& j) {
  JobResult r;
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.scores.ari = j.at("ARI").get<double>();
  r.scores.ari_fg = j.at("ARI_fg").get<double>();
  r.scores.mbo = j.at("mBO").get<double>();
  r.scores.miou = j.at("mIoU").get<double>();
  r.scores.loss = j.at("loss").get<double>();
  r.scores.n_clips = j.at("n_clips").get<int>();
  return r;
}

/// Trains `cfg` on `train_data` and evaluates the final model on `eval_data`. With a job
/// directory, the checkpoint, training log and result land there, and an existing result is
/// reused instead of retraining.
inline JobResult run_job(const std::string& variant, const RunConfig& cfg, const train::Dataset& train_data,
                         const train::Dataset& eval_data, const fs::path& job_dir = {}, int workers = 1) {
  const fs::path result_path = job_dir.empty() ? fs::path{} : job_dir / "result.json";
  if (!result_path.empty() && fs::exists(result_path)) {
    std::ifstream in(result_path);
    const Json j = Json::parse(in, nullptr, false);
    if (!j.is_discarded()) return job_result_from_json(j);
  }
  train::TrainOptions opt;
  opt.out_dir = job_dir;
  const auto trained = train::train_loop(cfg, train_data, opt);
  eval::EvalOptions eo;
  eo.workers = workers;
  JobResult r{variant, cfg.seed, eval::aggregate(eval::evaluate_clips(trained.model, eval_data, 0, eval_data.size(), eo))};
  if (!result_path.empty()) {
    std::ofstream out(result_path);
    out << to_json(r).dump(1);
  }
  return r;
}

struct VariantSummary {
  std::string name;
  Json diff;
  std::optional<std::string> skip_reason;
  std::vector<JobResult> runs;

  double mean(const std::string& metric) const {
    if (runs.empty()) return std::nan("");
    double s = 0;
    for (const auto& r : runs) s += eval::metric_value(r.scores, metric);
    return s / static_cast<double>(runs.size());
  }
  /// Sample standard deviation across seeds (0 for a single run).
  double spread(const std::string& metric) const {
    if (runs.size() < 2) return 0.0;
    const double mu = mean(metric);
    double s = 0;
    for (const auto& r : runs) s += std::pow(eval::metric_value(r.scores, metric) - mu, 2);
    return std::sqrt(s / static_cast<double>(runs.size() - 1));
  }
};

inline Json to_json(const VariantSummary& v, const std::string& metric = "ARI_plus_ARIfg") {
  Json runs = Json::array();
  for (const auto& r : v.runs) runs.push_back(to_json(r));
  Json j = {{"variant", v.name}, {"diff", v.diff}, {"runs", runs}};
  if (v.skip_reason) {
    j["skipped"] = *v.skip_reason;
  } else {
    j["metric"] = metric;
    j["mean"] = v.mean(metric);
    j["spread"] = v.spread(metric);
  }
  return j;
}

struct GridOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  fs::path out_dir;  // empty: nothing persisted, nothing resumed
  int workers = 1;
  std::function<void(const std::string&, std::uint64_t)> on_job;
};

/// Trains every non-skipped variant once per seed. Jobs live in `<out>/jobs/<variant>/seed<k>`
/// and `<out>/jobs.json` tracks their status, so an interrupted grid resumes where it stopped.
inline std::vector<VariantSummary> ablation_grid(const RunConfig& base, const std::vector<Axis>& axes,
                                                 const train::Dataset& train_data, const train::Dataset& eval_data,
                                                 const GridOptions& opt = {}) {
  const auto variants = expand_variants(base, axes);
  Json manifest = Json::array();
  auto write_manifest = [&] {
    if (opt.out_dir.empty()) return;
    fs::create_directories(opt.out_dir);
    std::ofstream(opt.out_dir / "jobs.json") << manifest.dump(1);
  };
  for (const auto& v : variants)
    for (auto seed : opt.seeds) {
      Json job = {{"variant", v.name}, {"seed", seed}};
      if (v.skip_reason) {
        job["status"] = "skipped";
        job["reason"] = *v.skip_reason;
      } else {
        const bool done = !opt.out_dir.empty() &&
                          fs::exists(opt.out_dir / "jobs" / v.name / ("seed" + std::to_string(seed)) / "result.json");
        job["status"] = done ? "done" : "pending";
      }
      manifest.push_back(job);
    }
  write_manifest();

  std::vector<VariantSummary> out;
  std::size_t job_index = 0;
  for (const auto& v : variants) {
    VariantSummary s{v.name, v.diff, v.skip_reason, {}};
    for (auto seed : opt.seeds) {
      Json& job = manifest[job_index++];
      if (v.skip_reason) continue;
      RunConfig cfg = v.config;
      cfg.seed = seed;
      if (opt.on_job) opt.on_job(v.name, seed);
      const fs::path dir =
          opt.out_dir.empty() ? fs::path{} : opt.out_dir / "jobs" / v.name / ("seed" + std::to_string(seed));
      s.runs.push_back(run_job(v.name, cfg, train_data, eval_data, dir, opt.workers));
      job["status"] = "done";
      write_manifest();
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline const VariantSummary& find_variant(const std::vector<VariantSummary>& grid, const std::string& name) {
  for (const auto& v : grid)
    if (v.name == name) return v;
  throw PreconditionError("ablation grid has no variant '" + name + "'");
}

}  // namespace vocl::analysis
