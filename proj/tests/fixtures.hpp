#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "vocl/data/sprites.hpp"
#include "vocl/train/dataset.hpp"

namespace vocl::fixtures {

namespace fs = std::filesystem;

/// Small enough that a full unroll takes milliseconds.
inline RunConfig tiny_config(TransitionerKind kind = TransitionerKind::randsfq) {
  RunConfig cfg;
  cfg.data.image_size = 16;
  cfg.data.clip_len = 6;
  cfg.data.max_objects = 2;
  cfg.model.n_slots = 3;
  cfg.model.channels = 8;
  cfg.model.heads = 2;
  cfg.model.patch_size = 4;
  cfg.model.ffn_hidden = 16;
  cfg.model.sa_mlp_hidden = 16;
  cfg.model.decoder_hidden = 16;
  cfg.model.transitioner = kind;
  cfg.train.window_size = 3;
  cfg.train.steps = 4;
  cfg.train.warmup_steps = 1;
  cfg.train.val_every = 2;
  cfg.train.val_clips = 2;
  return cfg;
}

inline train::Dataset tiny_dataset(const RunConfig& cfg, int n, std::uint64_t seed = 1) {
  train::Dataset ds;
  for (auto s : data::clip_seeds(seed, n)) ds.clips.push_back(data::generate_clip(cfg.data, cfg.model.n_slots, s));
  return ds;
}

inline fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vocl_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace vocl::fixtures
