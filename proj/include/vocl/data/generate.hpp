#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <thread>
#include <vector>

#include "vocl/data/clip_io.hpp"
#include "vocl/data/sprites.hpp"

namespace vocl::data {

/// Generates `n` clips into `dir` (one archive + sidecar each) and writes the manifest.
/// Clips are independent, so they are rendered across `workers` threads.
inline Manifest generate_dataset(const fs::path& dir, const DataConfig& cfg, int n_slots, int n,
                                 std::uint64_t seed, int workers = 1) {
  if (n < 1) throw PreconditionError("n_clips must be >= 1");
  fs::create_directories(dir);
  Manifest man;
  man.data = cfg;
  man.n_slots = n_slots;
  const auto seeds = clip_seeds(seed, n);
  man.clips.resize(n);
  auto run = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const VideoClip clip = generate_clip(cfg, n_slots, seeds[i]);
      const std::string file = clip.clip_id + ".clip";
      save_clip(clip, dir / file);
      man.clips[i] = {clip.clip_id, seeds[i], file};
    }
  };
  const int w = std::clamp(workers, 1, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (int k = 0; k < w; ++k)
    pool.emplace_back([&, k] {
      try {
        run(n * k / w, n * (k + 1) / w);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  write_manifest(dir, man);
  return man;
}

}  // namespace vocl::data
