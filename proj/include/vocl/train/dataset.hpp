#pragma once

#include <filesystem>
#include <vector>

#include "vocl/data/clip_io.hpp"
#include "vocl/model/model.hpp"

namespace vocl::train {

namespace fs = std::filesystem;

/// Clips plus the directory they came from (needed for external feature files).
struct Dataset {
  std::vector<data::VideoClip> clips;
  fs::path dir;

  static Dataset load(const fs::path& dir) { return {data::load_dataset(dir), dir}; }
  std::size_t size() const { return clips.size(); }
};

inline fs::path external_features_path(const fs::path& dir, const data::VideoClip& clip) {
  return dir / (clip.clip_id + ".features");
}

/// Encoder output for every frame of a clip, or the precomputed features when the
/// encoder is external.
inline std::vector<FeatureMap> clip_features(const model::Model& m, const data::VideoClip& clip,
                                             const fs::path& dir = {}) {
  if (m.encoder.kind == EncoderKind::external) {
    const int g = m.grid();
    return data::ingest_external_features(external_features_path(dir, clip), clip.length, g, g, m.channels());
  }
  return m.encoder.encode_clip(clip);
}

}  // namespace vocl::train
