#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vocl/core/config.hpp"
#include "vocl/core/rng.hpp"
#include "vocl/data/clip.hpp"
#include "vocl/encoder/feature_map.hpp"
#include "vocl/io/tensor_file.hpp"

namespace vocl::data {

namespace fs = std::filesystem;

/// Sidecar path holding classes, boxes and metadata next to a clip payload.
inline fs::path sidecar_path(const fs::path& clip_path) {
  fs::path p = clip_path;
  p.replace_extension(".json");
  return p;
}

/// Writes `<path>` (tensor payloads) and its `.json` sidecar.
inline void save_clip(const VideoClip& clip, const fs::path& path) {
  const auto T = static_cast<std::uint32_t>(clip.length);
  const auto H = static_cast<std::uint32_t>(clip.height);
  const auto W = static_cast<std::uint32_t>(clip.width);
  io::TensorArchive a;
  a.meta = {{"kind", "clip"}, {"clip_id", clip.clip_id}, {"seed", clip.seed}};
  a.tensors.push_back(io::make_entry("frames", {T, H, W, static_cast<std::uint32_t>(clip.channels)}, clip.frames));
  a.tensors.push_back(io::make_entry("masks", {T, H, W}, clip.masks));
  io::write_archive(path, a);

  Json side;
  side["clip_id"] = clip.clip_id;
  side["seed"] = clip.seed;
  side["classes"] = clip.classes;
  side["boxes"] = clip.boxes;
  side["visible"] = clip.visible;
  std::ofstream out(sidecar_path(path));
  if (!out) throw Error("cannot write sidecar for " + path.string());
  out << side.dump(1);
}

inline VideoClip load_clip(const fs::path& path) {
  const io::TensorArchive a = io::read_archive(path);
  if (a.meta.value("kind", "") != "clip") throw FormatError(path.string() + ": not a clip archive");
  const auto& frames = a.at("frames");
  const auto& masks = a.at("masks");
  if (frames.dims.size() != 4 || masks.dims.size() != 3 || frames.dims[0] != masks.dims[0] ||
      frames.dims[1] != masks.dims[1] || frames.dims[2] != masks.dims[2])
    throw FormatError(path.string() + ": inconsistent clip tensor shapes");

  VideoClip clip;
  clip.length = static_cast<int>(frames.dims[0]);
  clip.height = static_cast<int>(frames.dims[1]);
  clip.width = static_cast<int>(frames.dims[2]);
  clip.channels = static_cast<int>(frames.dims[3]);
  clip.frames = frames.as<float>();
  clip.masks = masks.as<std::int32_t>();

  std::ifstream in(sidecar_path(path));
  if (!in) throw DataError(path.string() + ": missing sidecar " + sidecar_path(path).string());
  const Json side = Json::parse(in, nullptr, false);
  if (side.is_discarded()) throw FormatError(path.string() + ": sidecar is not JSON");
  try {
    clip.clip_id = side.at("clip_id").get<std::string>();
    clip.seed = side.at("seed").get<std::uint64_t>();
    clip.classes = side.at("classes").get<std::vector<int>>();
    clip.boxes = side.at("boxes").get<std::vector<Box>>();
    clip.visible = side.at("visible").get<std::vector<std::uint8_t>>();
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": malformed sidecar: " + e.what());
  }
  if (clip.boxes.size() != static_cast<std::size_t>(clip.length) * clip.classes.size() ||
      clip.visible.size() != clip.boxes.size())
    throw FormatError(path.string() + ": sidecar box count does not match clip");
  return clip;
}

/// Writes per-frame features as one [T, h, w, c] float64 tensor.
inline void export_features(const std::vector<FeatureMap>& features, const fs::path& path) {
  if (features.empty()) throw PreconditionError("no features to export");
  const auto& f0 = features.front();
  std::vector<double> values;
  values.reserve(features.size() * f0.values.value().size());
  for (const auto& f : features) {
    f.check(f0.height, f0.width, f0.channels, "export_features");
    values.insert(values.end(), f.values.value().data(), f.values.value().data() + f.values.value().size());
  }
  io::TensorArchive a;
  a.meta = {{"kind", "features"}};
  a.tensors.push_back(io::make_entry("features",
                                     {static_cast<std::uint32_t>(features.size()), static_cast<std::uint32_t>(f0.height),
                                      static_cast<std::uint32_t>(f0.width), static_cast<std::uint32_t>(f0.channels)},
                                     values));
  io::write_archive(path, a);
}

/// Loads externally computed frozen features. The declared [T, h, w, c] must match the run.
inline std::vector<FeatureMap> ingest_external_features(const fs::path& path, int T, int h, int w, int c) {
  const io::TensorArchive a = io::read_archive(path);
  const auto& e = a.at("features");
  if (e.dims.size() != 4) throw ShapeError(path.string() + ": features must be rank 4 [T, h, w, c]");
  const int dT = static_cast<int>(e.dims[0]), dh = static_cast<int>(e.dims[1]), dw = static_cast<int>(e.dims[2]),
            dc = static_cast<int>(e.dims[3]);
  if (dT != T || dh != h || dw != w || dc != c)
    throw ShapeError(path.string() + ": declared features [T=" + std::to_string(dT) + ", h=" + std::to_string(dh) +
                     ", w=" + std::to_string(dw) + ", c=" + std::to_string(dc) + "] do not match config [T=" +
                     std::to_string(T) + ", h=" + std::to_string(h) + ", w=" + std::to_string(w) +
                     ", c=" + std::to_string(c) + "]");
  std::vector<double> values;
  if (e.dtype == io::DType::f64) {
    values = e.as<double>();
  } else if (e.dtype == io::DType::f32) {
    const auto f = e.as<float>();
    values.assign(f.begin(), f.end());
  } else {
    throw FormatError(path.string() + ": features must be float32 or float64");
  }
  std::vector<FeatureMap> out;
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  for (int t = 0; t < T; ++t) {
    Matrix m(h * w, c);
    std::copy(values.begin() + t * per, values.begin() + (t + 1) * per, m.data());
    out.push_back(FeatureMap{ad::constant(std::move(m)), h, w, c, t + 1, true});
  }
  return out;
}

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::string file;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ManifestEntry, id, seed, file)

struct Manifest {
  int schema_version = 1;
  DataConfig data;
  int n_slots = 6;
  std::vector<ManifestEntry> clips;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Manifest, schema_version, data, n_slots, clips)

inline fs::path manifest_path(const fs::path& dir) { return dir / "manifest.json"; }

inline Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(manifest_path(dir));
  if (!in) throw DataError("no manifest.json in " + dir.string());
  const Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(manifest_path(dir).string() + " is not JSON");
  try {
    return j.get<Manifest>();
  } catch (const Json::exception& e) {
    throw FormatError(manifest_path(dir).string() + ": " + e.what());
  }
}

inline void write_manifest(const fs::path& dir, const Manifest& m) {
  std::ofstream out(manifest_path(dir));
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << Json(m).dump(1);
}

/// Per-clip seeds drawn from the "data" stream of the dataset seed.
inline std::vector<std::uint64_t> clip_seeds(std::uint64_t dataset_seed, int n) {
  Rng rng = make_rng(dataset_seed, "data");
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng() >> 16;
  return seeds;
}

inline std::vector<VideoClip> load_dataset(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  std::vector<VideoClip> clips;
  clips.reserve(m.clips.size());
  for (const auto& e : m.clips) clips.push_back(load_clip(dir / e.file));
  return clips;
}

}  // namespace vocl::data
