#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "vocl/cli/app.hpp"

using namespace vocl;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "vocl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

// Tiny run shape shared by every command below.
const std::vector<std::string> kTiny = {
    "--set", "image_size=16", "--set", "clip_len=6", "--set", "max_objects=2", "--set", "n_slots=3",
    "--set", "channels=8", "--set", "heads=2", "--set", "patch_size=4", "--set", "window_size=3",
    "--set", "steps=3", "--set", "val_every=3", "--set", "val_clips=2", "--set", "warmup_steps=1"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fixtures::temp_dir("cli");
    ASSERT_EQ(run(with_tiny({"gen-data", "--out", (dir / "data").string(), "--n-clips", "5"})), 0);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

}  // namespace

TEST(CliUsage, UnknownCommandOrFlagIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(run({"train", "--bogus"}), cli::kUsage);
  EXPECT_EQ(run({}), cli::kUsage);
}

TEST_F(Cli, WindowLargerThanClipIsConfigError) {
  EXPECT_EQ(run({"train", "--data", (dir / "data").string(), "--out", (dir / "r").string(), "--set", "clip_len=8",
                 "--set", "window_size=9"}),
            cli::kConfig);
  EXPECT_EQ(run(with_tiny({"--device", "cuda", "train", "--data", (dir / "data").string()})), cli::kConfig);
}

TEST_F(Cli, MissingDataIsDataError) {
  EXPECT_EQ(run(with_tiny({"train", "--data", (dir / "nope").string(), "--out", (dir / "r").string()})), cli::kData);
}

TEST_F(Cli, GenDataWritesManifestAndSnapshot) {
  const auto man = data::read_manifest(dir / "data");
  EXPECT_EQ(man.clips.size(), 5u);
  const RunConfig snap = config_from_json(Json::parse(fixtures::read_file(dir / "data" / "config.json")));
  EXPECT_EQ(snap.data.clip_len, 6);
}

TEST_F(Cli, TrainTwiceIsIdenticalAndEvalMatrixProbePlotRun) {
  const auto data_dir = (dir / "data").string();
  ASSERT_EQ(run(with_tiny({"--seed", "1", "train", "--data", data_dir, "--out", (dir / "a").string()})), 0);
  ASSERT_EQ(run(with_tiny({"--seed", "1", "train", "--data", data_dir, "--out", (dir / "b").string()})), 0);
  EXPECT_EQ(fixtures::read_file(dir / "a" / "metrics.jsonl"), fixtures::read_file(dir / "b" / "metrics.jsonl"));
  EXPECT_EQ(fixtures::read_file(dir / "a" / "last.ckpt"), fixtures::read_file(dir / "b" / "last.ckpt"));

  // Snapshot round-trips and records the seed override.
  const RunConfig snap = config_from_json(Json::parse(fixtures::read_file(dir / "a" / "config.json")));
  EXPECT_EQ(snap.seed, 1u);
  const Json manifest = Json::parse(fixtures::read_file(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "train");
  for (const auto& f : manifest.at("artifacts")) EXPECT_TRUE(fs::exists(dir / "a" / f.get<std::string>())) << f;

  const auto before = fixtures::read_file(dir / "data" / "manifest.json");
  const auto ckpt = (dir / "a" / "last.ckpt").string();
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt, "--data", data_dir, "--out", (dir / "e").string()}), 0);
  const Json report = Json::parse(fixtures::read_file(dir / "e" / "report.json"));
  EXPECT_EQ(report.at("per_clip").size(), 5u);
  for (const char* k : {"ARI", "ARI_fg", "mBO", "mIoU", "ARI_plus_ARIfg"})
    EXPECT_TRUE(std::isfinite(report.at("aggregate").at(k).get<double>())) << k;

  ASSERT_EQ(run({"matrix", "--checkpoint", ckpt, "--data", data_dir, "--delta", "2", "--run-dir",
                 (dir / "m").string()}),
            0);
  EXPECT_EQ(run({"matrix", "--checkpoint", ckpt, "--data", data_dir, "--delta", "5", "--run-dir",
                 (dir / "m2").string()}),
            cli::kOther);
  ASSERT_EQ(run({"plot", "--input", (dir / "m" / "matrix.json").string(), "--out", (dir / "m" / "matrix.png").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "m" / "matrix.png"));

  ASSERT_EQ(run({"probe", "--checkpoint", ckpt, "--data", data_dir, "--eval-data", data_dir, "--steps", "20",
                 "--out", (dir / "p").string()}),
            0);
  const Json probe = Json::parse(fixtures::read_file(dir / "p" / "probe.json"));
  EXPECT_TRUE(probe.at("top1").get<double>() >= 0.0);
  // Commands never write into their input dataset.
  EXPECT_EQ(fixtures::read_file(dir / "data" / "manifest.json"), before);
}

TEST_F(Cli, AblateAndPlotBars) {
  const auto data_dir = (dir / "data").string();
  ASSERT_EQ(run(with_tiny({"ablate", "--data", data_dir, "--eval-data", data_dir, "--axes", "time_injection=none",
                           "--seeds", "0", "--run-dir", (dir / "g").string(), "--set", "steps=1"})),
            0);
  const Json grid = Json::parse(fixtures::read_file(dir / "g" / "grid.json"));
  EXPECT_EQ(grid.at("variants").size(), 2u);
  ASSERT_EQ(run({"plot", "--input", (dir / "g" / "grid.json").string(), "--out", (dir / "g" / "bars.png").string()}), 0);
  EXPECT_EQ(run({"ablate", "--data", data_dir, "--eval-data", data_dir, "--axes", "time_injection"}), cli::kConfig);
}

TEST_F(Cli, OutputRootFromEnvironment) {
  const auto root = dir / "root";
  ::setenv(cli::kOutputRootEnv, root.c_str(), 1);
  const int rc = run(with_tiny({"train", "--data", (dir / "data").string()}));
  ::unsetenv(cli::kOutputRootEnv);
  ASSERT_EQ(rc, 0);
  EXPECT_TRUE(fs::exists(root / "train" / "last.ckpt"));
}
