#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "vocl/core/error.hpp"

namespace vocl {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

enum class TransitionerKind { randsfq, encoder_block, identity };
enum class TimeInjection { sum, append, none };
enum class EncoderKind { patch, conv, external };
enum class InitialQueryKind { gaussian, learned, conditional };

NLOHMANN_JSON_SERIALIZE_ENUM(TransitionerKind, {{TransitionerKind::randsfq, "randsfq"},
                                                {TransitionerKind::encoder_block, "encoder_block"},
                                                {TransitionerKind::identity, "identity"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TimeInjection,
                             {{TimeInjection::sum, "sum"}, {TimeInjection::append, "append"}, {TimeInjection::none, "none"}})
NLOHMANN_JSON_SERIALIZE_ENUM(EncoderKind,
                             {{EncoderKind::patch, "patch"}, {EncoderKind::conv, "conv"}, {EncoderKind::external, "external"}})
NLOHMANN_JSON_SERIALIZE_ENUM(InitialQueryKind, {{InitialQueryKind::gaussian, "gaussian"},
                                                {InitialQueryKind::learned, "learned"},
                                                {InitialQueryKind::conditional, "conditional"}})

struct DataConfig {
  int image_size = 64;
  int clip_len = 20;
  int min_objects = 2;
  int max_objects = 4;
  double min_scale = 0.2;  // sprite extent as a fraction of frame height
  double max_scale = 0.35;
  double max_speed = 0.04;  // per-frame displacement, normalized coordinates
  int n_classes = 3;
};

struct ModelConfig {
  int n_slots = 6;
  int channels = 32;
  int n_sa_iters = 3;
  int n_sa_iters_next = 2;  // iterations on frames after the first, which start from a predicted query
  EncoderKind encoder = EncoderKind::patch;
  int patch_size = 4;
  bool encoder_frozen = true;
  TransitionerKind transitioner = TransitionerKind::randsfq;
  TimeInjection time_injection = TimeInjection::sum;
  bool use_next_feature = true;
  int heads = 4;
  int ffn_hidden = 64;
  int sa_mlp_hidden = 64;
  int decoder_hidden = 64;
  InitialQueryKind initial_query = InitialQueryKind::gaussian;
};

struct TrainConfig {
  int window_size = 5;
  bool sample_pairs = true;
  int steps = 2000;
  int batch_size = 1;
  double lr = 3e-3;
  int warmup_steps = 100;
  double min_lr_ratio = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip = 1.0;
  int val_every = 500;
  int val_clips = 10;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;

  /// Feature grid side after encoding.
  int grid_size() const {
    return model.encoder == EncoderKind::conv ? data.image_size / 8 : data.image_size / model.patch_size;
  }
  int n_tokens() const { return grid_size() * grid_size(); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, image_size, clip_len, min_objects, max_objects, min_scale,
                                                max_scale, max_speed, n_classes)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, n_slots, channels, n_sa_iters, n_sa_iters_next, encoder, patch_size,
                                                encoder_frozen, transitioner, time_injection, use_next_feature, heads,
                                                ffn_hidden, sa_mlp_hidden, decoder_hidden, initial_query)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, window_size, sample_pairs, steps, batch_size, lr,
                                                warmup_steps, min_lr_ratio, beta1, beta2, grad_clip, val_every,
                                                val_clips)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, schema_version, seed, data, model, train)

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.schema_version != kConfigSchemaVersion)
    fail("unsupported config schema_version " + std::to_string(c.schema_version));
  const auto& d = c.data;
  const auto& m = c.model;
  const auto& t = c.train;
  if (d.clip_len < 2) fail("clip_len must be >= 2");
  if (t.window_size < 1) fail("window_size must be >= 1");
  if (t.window_size > d.clip_len - 1)
    fail("window_size " + std::to_string(t.window_size) + " exceeds clip_len - 1 = " + std::to_string(d.clip_len - 1));
  if (m.n_slots < 1) fail("n_slots must be >= 1");
  if (m.channels < 1) fail("channels must be >= 1");
  if (m.n_sa_iters < 1 || m.n_sa_iters_next < 1) fail("n_sa_iters and n_sa_iters_next must be >= 1");
  if (m.heads < 1 || m.channels % m.heads != 0) fail("channels must be divisible by heads");
  if (d.image_size < 1) fail("image_size must be positive");
  if (m.encoder == EncoderKind::conv && d.image_size % 8 != 0) fail("conv encoder needs image_size divisible by 8");
  if (m.encoder != EncoderKind::conv && (m.patch_size < 1 || d.image_size % m.patch_size != 0))
    fail("image_size must be divisible by patch_size");
  if (d.min_objects < 0 || d.max_objects < d.min_objects) fail("object count range is empty");
  if (d.max_objects >= m.n_slots) fail("max_objects must be <= n_slots - 1 (one slot is reserved for background)");
  if (d.min_scale <= 0 || d.max_scale > 0.4 || d.min_scale > d.max_scale) fail("sprite scale range must lie in (0, 0.4]");
  if (d.n_classes < 1 || d.n_classes > 3) fail("n_classes must be in 1..3");
  if (t.steps < 0 || t.batch_size < 1) fail("steps must be >= 0 and batch_size >= 1");
  if (t.lr <= 0) fail("lr must be positive");
  if (t.val_every < 1) fail("val_every must be >= 1");
}

inline Json to_json(const RunConfig& c) { return Json(c); }

inline RunConfig config_from_json(const Json& j) {
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

/// Applies `key=value` overrides. Keys are dotted paths ("train.window_size") or a leaf name
/// that is unique across sections ("window_size"). Values are parsed as JSON, falling back to string.
inline Json apply_overrides(Json doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    std::vector<std::string> path;
    if (key.find('.') != std::string::npos) {
      std::stringstream ss(key);
      for (std::string part; std::getline(ss, part, '.');) path.push_back(part);
    } else if (doc.contains(key)) {
      path = {key};
    } else {
      for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it->is_object() && it->contains(key)) {
          if (!path.empty()) throw ConfigError("override key '" + key + "' is ambiguous");
          path = {it.key(), key};
        }
    }
    if (path.empty()) throw ConfigError("unknown config key '" + key + "'");

    Json* node = &doc;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->contains(path[i])) throw ConfigError("unknown config key '" + key + "'");
      node = &(*node)[path[i]];
    }
    if (!node->contains(path.back())) throw ConfigError("unknown config key '" + key + "'");
    (*node)[path.back()] = value;
  }
  return doc;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return j;
}

/// Resolved config = file (or defaults) with overrides applied; overrides win.
inline RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json base = to_json(RunConfig{});
  if (!path.empty()) {
    Json file = read_json_file(path);
    if (!file.contains("schema_version")) throw ConfigError("config is missing schema_version");
    base.merge_patch(file);
  }
  return config_from_json(apply_overrides(base, overrides));
}

inline std::uint32_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

}  // namespace vocl
