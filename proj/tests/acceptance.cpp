// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Criteria 6-10 train a small grid of models. Jobs persist under $VOCL_ACCEPT_DIR
// (default ./acceptance_runs) and are reused on the next invocation; delete the directory
// to retrain from scratch. $VOCL_ACCEPT_STEPS overrides the training length.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "vocl/analysis/ablation.hpp"
#include "vocl/analysis/offset_matrix.hpp"
#include "vocl/data/generate.hpp"
#include "vocl/eval/metrics.hpp"
#include "vocl/eval/probe.hpp"

using namespace vocl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1: metric oracles ------------------------------------------------------------------

void metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(2024, "acceptance-metrics");
  double worst = 0;
  bool applicability = true;
  for (int i = 0; i < 200; ++i) {
    const auto [p, g] = oracle::random_pair(rng);
    const std::pair<std::optional<double>, std::optional<double>> cmp[] = {
        {eval::ari(p, g, false), oracle::ari(p, g, false)},
        {eval::ari(p, g, true), oracle::ari(p, g, true)},
        {eval::miou(p, g), oracle::miou(p, g)}};
    for (const auto& [a, b] : cmp) {
      if (a.has_value() != b.has_value()) applicability = false;
      if (a && b) worst = std::max(worst, std::abs(*a - *b));
    }
  }
  const double secs = seconds_since(t0);
  report(1, applicability && worst < 1e-9 && secs < 60, fmt("max |diff| %.3g over 200 pairs, %.1fs", worst, secs));
}

// ---- 2: finite-difference gradients -----------------------------------------------------

using Params = std::vector<std::pair<std::string, Var>>;

void jitter(Params& ps, Rng& rng) {
  for (auto& [n, p] : ps) p.mutable_value() += nn::normal_matrix(p.rows(), p.cols(), 0.3, rng);
}

void gradients() {
  const auto t0 = Clock::now();
  constexpr int c = 8, s = 3, side = 4;
  constexpr double h = 1e-4;
  Rng rng = make_rng(77, "acceptance-grad");
  std::vector<std::pair<std::string, double>> errs;

  {
    auto sa = model::SlotAttention::init(c, 2 * c, rng);
    Var q = ad::parameter(nn::normal_matrix(s, c, 1, rng)), x = ad::parameter(nn::normal_matrix(side * side, c, 1, rng));
    Params ps = {{"query", q}, {"inputs", x}};
    sa.visit("sa", [&](const std::string& n, Var& p) { ps.emplace_back(n, p); });
    jitter(ps, rng);
    Rng dir = make_rng(1, "dir");
    const Matrix w = nn::normal_matrix(s, c, 1, dir);
    errs.emplace_back("aggregate", check::check_gradients(
                                       [&] { return ad::sum_all(ad::mul(sa(q, x, 3).slots, ad::constant(w))); }, ps, h)
                                       .worst_rel);
  }
  {
    RunConfig cfg;
    cfg.model.n_slots = s;
    cfg.model.channels = c;
    cfg.model.heads = 2;
    cfg.model.ffn_hidden = 2 * c;
    cfg.train.window_size = 3;
    auto tr = model::Transitioner::init(cfg, rng);
    Var slots = ad::parameter(nn::normal_matrix(s, c, 1, rng)), f = ad::parameter(nn::normal_matrix(side * side, c, 1, rng));
    Params ps = {{"slots", slots}, {"feats", f}};
    tr.visit("tr", [&](const std::string& n, Var& p) { ps.emplace_back(n, p); });
    jitter(ps, rng);
    Rng dir = make_rng(2, "dir");
    const Matrix w = nn::normal_matrix(s, c, 1, dir);
    errs.emplace_back("transit_randsfq",
                      check::check_gradients(
                          [&] { return ad::sum_all(ad::mul(tr.transit_randsfq(slots, 2, f, 1), ad::constant(w))); }, ps, h)
                          .worst_rel);
  }
  {
    auto dec = model::Decoder::init(side, c, 2 * c, rng);
    Var slots = ad::parameter(nn::normal_matrix(s, c, 1, rng));
    Params ps = {{"slots", slots}};
    dec.visit("dec", [&](const std::string& n, Var& p) { ps.emplace_back(n, p); });
    jitter(ps, rng);
    Rng dir = make_rng(3, "dir");
    const Matrix w = nn::normal_matrix(side * side, c, 1, dir);
    errs.emplace_back("decode", check::check_gradients(
                                    [&] { return ad::sum_all(ad::mul(dec(slots).reconstruction, ad::constant(w))); }, ps, h)
                                    .worst_rel);
  }
  {
    std::vector<Var> recon;
    std::vector<FeatureMap> feats;
    for (int t = 0; t < 3; ++t) {
      recon.push_back(ad::parameter(nn::normal_matrix(side * side, c, 1, rng)));
      feats.push_back({ad::constant(nn::normal_matrix(side * side, c, 1, rng)), side, side, c, t + 1, true});
    }
    errs.emplace_back("objective", check::check_gradients([&] { return model::objective(recon, feats); },
                                                          {{"r0", recon[0]}, {"r1", recon[1]}, {"r2", recon[2]}}, h)
                                       .worst_rel);
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 120;
  std::string detail;
  for (const auto& [n, e] : errs) {
    ok = ok && e < 1e-3;
    detail += fmt("%s %.2e  ", n.c_str(), e);
  }
  report(2, ok, detail + fmt("(%.1fs)", secs));
}

// ---- 3-5: structural properties ---------------------------------------------------------

void stop_gradient() {
  const auto r = props::stop_gradient(100);
  report(3, r.max_target_grad == 0.0 && r.encoder_hash_stable,
         fmt("max |grad| at targets %.3g, frozen encoder hash %s over 100 steps", r.max_target_grad,
             r.encoder_hash_stable ? "unchanged" : "CHANGED"));
}

void delta_one() {
  bool ok = true;
  for (std::uint64_t seed : {0, 1, 2}) ok = ok && props::delta_one_matches_eval(seed);
  report(4, ok, ok ? "train unroll with window 1 is bitwise equal to eval (3 seeds)" : "bitwise mismatch");
}

void equivariance() {
  bool ok = true;
  std::string detail;
  for (auto kind : {TransitionerKind::randsfq, TransitionerKind::encoder_block, TransitionerKind::identity}) {
    const auto r = props::permutation_equivariance(kind);
    ok = ok && r.slots < 1e-9 && r.queries < 1e-9 && r.attention < 1e-9 && r.loss < 1e-5 && r.masks_ok;
    detail += fmt("%s: state %.1e loss %.1e  ", Json(kind).get<std::string>().c_str(),
                  std::max({r.slots, r.queries, r.attention}), r.loss);
  }
  report(5, ok, detail);
}

// ---- 6-10: trained models ---------------------------------------------------------------

struct Workspace {
  fs::path root;
  RunConfig base;
  train::Dataset train_ds, eval_ds;
};

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::atoi(v) : fallback;
}

train::Dataset dataset(const fs::path& dir, const RunConfig& cfg, int n, std::uint64_t seed) {
  if (!fs::exists(dir / "manifest.json")) {
    std::printf("  generating %d clips in %s\n", n, dir.c_str());
    data::generate_dataset(dir, cfg.data, cfg.model.n_slots, n, seed);
  }
  return train::Dataset::load(dir);
}

Workspace workspace() {
  Workspace w;
  const char* dir = std::getenv("VOCL_ACCEPT_DIR");
  w.root = dir && *dir ? fs::path(dir) : fs::current_path() / "acceptance_runs";
  RunConfig& b = w.base;  // defaults: 64px, T=20, 6 slots, window 5, randsfq with sum injection
  b.train.steps = env_int("VOCL_ACCEPT_STEPS", 2000);
  b.train.val_every = b.train.steps;
  validate(b);
  w.train_ds = dataset(w.root / "data_train", b, 200, 1);
  w.eval_ds = dataset(w.root / "data_eval", b, 50, 2);
  return w;
}

const std::vector<analysis::Axis> kAxes = {
    {"transitioner", {"identity", "encoder_block"}},
    {"time_injection", {"none", "append"}},
    {"window_size", {2, 3, 4}},
};

double mean_of(const std::vector<analysis::VariantSummary>& g, const std::string& v, const std::string& metric) {
  return analysis::find_variant(g, v).mean(metric);
}

fs::path job_dir(const Workspace& w, const std::string& variant, int seed) {
  return w.root / "grid" / "jobs" / variant / ("seed" + std::to_string(seed));
}

void figure_ordering(const std::vector<analysis::VariantSummary>& g) {
  const double r = mean_of(g, "full", "ARI_fg"), id = mean_of(g, "transitioner=identity", "ARI_fg"),
               eb = mean_of(g, "transitioner=encoder_block", "ARI_fg");
  report(6, r > id && id >= eb && r - eb >= 0.03,
         fmt("ARI_fg randsfq %.4f, identity %.4f, encoder_block %.4f (randsfq - encoder_block = %+.4f)", r, id, eb,
             r - eb));
}

void ablation_table(const std::vector<analysis::VariantSummary>& g) {
  const std::string m = "ARI_plus_ARIfg";
  const double full = mean_of(g, "full", m), none = mean_of(g, "time_injection=none", m),
               append = mean_of(g, "time_injection=append", m);
  const double w[] = {mean_of(g, "window_size=2", m), mean_of(g, "window_size=3", m), mean_of(g, "window_size=4", m),
                      full};
  const bool monotone = w[0] <= w[1] && w[1] <= w[2] && w[2] <= w[3];
  report(7, full > none && monotone && w[3] >= w[0] + 0.03 && full >= append,
         fmt("ARI+ARI_fg full/sum %.4f, none %.4f, append %.4f; window 2..5: %.4f %.4f %.4f %.4f", full, none, append,
             w[0], w[1], w[2], w[3]));
}

void offset_matrix(const Workspace& w, const model::Model& m, const std::vector<analysis::VariantSummary>& g) {
  const auto om = analysis::offset_matrix(m, w.eval_ds, 0, w.eval_ds.size(), 5, "ARI_fg");
  std::ofstream(w.root / "matrix.json") << analysis::to_json(om).dump(1);
  const double standard = eval::aggregate(eval::evaluate_clips(m, w.eval_ds, 0, w.eval_ds.size())).ari_fg;
  const double identity = mean_of(g, "transitioner=identity", "ARI_fg");
  const double br = om.block_mean(3, 3, 2), tl = om.block_mean(0, 0, 2);
  report(8, br > tl && om.values(0, 0) == standard && om.values.minCoeff() >= identity,
         fmt("bottom-right %.4f vs top-left %.4f; cell(1,0) %.6f vs eval %.6f; min cell %.4f vs identity %.4f", br, tl,
             om.values(0, 0), standard, om.values.minCoeff(), identity));
}

void determinism(const Workspace& w) {
  const auto full = analysis::expand_variants(w.base, kAxes).front();
  RunConfig cfg = full.config;
  cfg.seed = 0;
  const fs::path again = w.root / "rerun_full_seed0";
  fs::remove_all(again);
  train::TrainOptions opt;
  opt.out_dir = again;
  train::train_loop(cfg, w.train_ds, opt);
  bool ok = true;
  std::string detail;
  for (const char* f : {"last.ckpt", "best.ckpt", "metrics.jsonl"}) {
    const auto a = slurp(job_dir(w, "full", 0) / f), b = slurp(again / f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt("%s %s (%zu bytes)  ", f, same ? "identical" : "DIFFERS", a.size());
  }
  report(9, ok, detail);
}

void probe(const Workspace& w, const model::Model& trained) {
  // Fit on slots from training clips, score on held-out clips.
  const std::size_t n_fit = 100;
  auto scores = [&](const model::Model& m) {
    eval::ProbeConfig pc;
    pc.n_classes = m.config.data.n_classes;
    const auto p = eval::probe_train(eval::collect_probe_data(m, w.train_ds, 0, n_fit), pc);
    return eval::probe_eval(p, eval::collect_probe_data(m, w.eval_ds, 0, w.eval_ds.size()));
  };
  const auto a = scores(trained);
  Rng init = make_rng(0, "init");
  const auto b = scores(model::Model::init(trained.config, init));
  report(10, a.top1 >= 0.8 && a.box_r2 >= 0.5 && a.top1 > b.top1 && a.box_r2 > b.box_r2,
         fmt("trained top1 %.3f box R2 %.3f; untrained top1 %.3f box R2 %.3f", a.top1, a.box_r2, b.top1, b.box_r2));
}

}  // namespace

int main() {
  std::printf("acceptance: structural checks\n");
  metric_oracles();
  gradients();
  stop_gradient();
  delta_one();
  equivariance();

  const auto w = workspace();
  std::printf("acceptance: training grid in %s (%d steps per job)\n", w.root.c_str(), w.base.train.steps);
  analysis::GridOptions go;
  go.out_dir = w.root / "grid";
  go.on_job = [&](const std::string& v, std::uint64_t seed) {
    const bool cached = fs::exists(job_dir(w, v, static_cast<int>(seed)) / "result.json");
    std::printf("  %s %s seed %llu\n", cached ? "cached " : "training", v.c_str(), static_cast<unsigned long long>(seed));
    std::fflush(stdout);
  };
  const auto t0 = Clock::now();
  const auto grid = analysis::ablation_grid(w.base, kAxes, w.train_ds, w.eval_ds, go);
  {
    Json j = {{"variants", Json::array()}};
    for (const auto& v : grid) j["variants"].push_back(analysis::to_json(v));
    std::ofstream(w.root / "grid" / "grid.json") << j.dump(1);
  }
  std::printf("  grid finished in %.0fs\n", seconds_since(t0));

  figure_ordering(grid);
  ablation_table(grid);
  const auto trained = model::load_checkpoint(job_dir(w, "full", 0) / "last.ckpt").model;
  offset_matrix(w, trained, grid);
  determinism(w);
  probe(w, trained);

  std::printf("acceptance: %d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
