#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vocl/core/config.hpp"
#include "vocl/data/clip.hpp"
#include "vocl/encoder/encoder.hpp"
#include "vocl/io/tensor_file.hpp"
#include "vocl/model/decoder.hpp"
#include "vocl/model/slot_attention.hpp"
#include "vocl/model/transitioner.hpp"
#include "vocl/nn/optim.hpp"

namespace vocl::model {

/// Encoder, aggregator, transitioner and decoder with their shared embeddings.
struct Model {
  RunConfig config;
  encoder::Encoder encoder;
  nn::Linear position;  // grid coordinates (y, x, 1-y, 1-x) -> c, added to features
  nn::LayerNorm input_norm;
  nn::Mlp input_mlp;  // per-token map applied after the positional term
  Var initial_slots;  // [s, c] learned first-frame query; [2, c] (mean, log-scale) when gaussian
  std::optional<nn::Mlp> conditional;  // box center -> query offset
  SlotAttention aggregator;
  Transitioner transitioner;
  Decoder decoder;

  static Model init(const RunConfig& cfg, Rng& rng) {
    validate(cfg);
    Model m;
    m.config = cfg;
    const int c = cfg.model.channels;
    const int s = cfg.model.n_slots;
    m.encoder = encoder::Encoder::init(cfg, rng);
    m.position = nn::Linear::init(4, c, rng);
    m.input_norm = nn::LayerNorm::init(c);
    m.input_mlp = nn::Mlp::init(c, c, c, rng);
    if (cfg.model.initial_query == InitialQueryKind::gaussian) {
      Matrix ms(2, c);
      ms.row(0) = nn::xavier_uniform(1, c, rng);
      ms.row(1).setConstant(std::log(0.5));
      m.initial_slots = ad::parameter(ms);
    } else {
      m.initial_slots = ad::parameter(nn::xavier_uniform(s, c, rng));
    }
    if (cfg.model.initial_query == InitialQueryKind::conditional) m.conditional = nn::Mlp::init(3, c, c, rng);
    m.aggregator = SlotAttention::init(c, cfg.model.sa_mlp_hidden, rng);
    m.transitioner = Transitioner::init(cfg, rng);
    m.decoder = Decoder::init(cfg.grid_size(), c, cfg.model.decoder_hidden, rng);
    return m;
  }

  int n_slots() const { return config.model.n_slots; }
  int channels() const { return config.model.channels; }
  int grid() const { return config.grid_size(); }

  /// Feature tokens as seen by the aggregator and the transitioner memory.
  Var tokens(const FeatureMap& f) const {
    f.check(grid(), grid(), channels(), "model input");
    return input_mlp(input_norm(ad::add(f.values, position(ad::constant(grid_coordinates(grid()))))));
  }

  /// First-frame noise for gaussian queries. Keyed by clip id, so a clip always starts from
  /// the same draw regardless of mode or visiting order.
  Matrix query_noise(const data::VideoClip* clip) const {
    Rng rng = make_rng(config.seed, "query/" + (clip ? clip->clip_id : std::string()));
    return nn::normal_matrix(n_slots(), channels(), 1.0, rng);
  }

  /// Q_1. Gaussian mode draws s slots from a learned diagonal Gaussian (shared across slots, so
  /// slots can only specialise by competing for content). Conditional mode adds an MLP
  /// embedding of each object's first-frame box center (slot k <- object k); remaining slots
  /// receive a zero "absent" code.
  Var initial_query(const data::VideoClip* clip, const Matrix* noise = nullptr) const {
    if (config.model.initial_query == InitialQueryKind::gaussian) {
      const Matrix eps = noise ? *noise : query_noise(clip);
      if (eps.rows() != n_slots() || eps.cols() != channels()) throw ShapeError("query noise must be [s, c]");
      const Var mean = ad::slice_rows(initial_slots, 0, 1);
      const Var scale = ad::tile_rows(ad::exp(ad::slice_rows(initial_slots, 1, 1)), n_slots());
      return ad::add_row(ad::mul(ad::constant(eps), scale), mean);
    }
    if (!conditional) return initial_slots;
    if (!clip) throw PreconditionError("conditional initial query needs ground-truth boxes");
    Matrix cond = Matrix::Zero(n_slots(), 3);
    for (int k = 0; k < std::min(clip->n_objects(), n_slots()); ++k)
      if (clip->is_visible(0, k)) cond.row(k) << clip->box(0, k)[0], clip->box(0, k)[1], 1.0;
    return ad::add(initial_slots, (*conditional)(ad::constant(cond)));
  }

  /// Visits every parameter in a fixed order (also the checkpoint order).
  void visit(const nn::ParamVisitor& v) {
    encoder.visit("encoder", v);
    position.visit("position", v);
    input_norm.visit("input_norm", v);
    input_mlp.visit("input_mlp", v);
    v("initial_slots", initial_slots);
    if (conditional) conditional->visit("conditional", v);
    aggregator.visit("aggregator", v);
    transitioner.visit("transitioner", v);
    decoder.visit("decoder", v);
  }

  nn::NamedParams parameters() {
    nn::NamedParams out;
    visit([&](const std::string& name, Var& p) { out.emplace_back(name, p); });
    return out;
  }
};

/// Mean squared error between reconstructions and stop-gradient feature targets,
/// averaged over frames, locations and channels.
inline Var objective(const std::vector<Var>& reconstructions, const std::vector<FeatureMap>& features) {
  if (reconstructions.size() != features.size() || reconstructions.empty())
    throw PreconditionError("objective: " + std::to_string(reconstructions.size()) + " reconstructions vs " +
                            std::to_string(features.size()) + " targets");
  std::vector<Var> per_frame;
  per_frame.reserve(features.size());
  for (std::size_t t = 0; t < features.size(); ++t)
    per_frame.push_back(ad::mse(reconstructions[t], features[t].values.value()));
  return ad::mean_of(per_frame);
}

// --- checkpoints --------------------------------------------------------------------

inline std::uint64_t parameter_hash(Model& m, bool encoder_only = false) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  m.visit([&](const std::string& name, Var& p) {
    if (encoder_only && name.rfind("encoder.", 0) != 0) return;
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value().data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p.value().size()) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ull;
    }
  });
  return h;
}

inline void save_checkpoint(Model& m, long long step, const std::filesystem::path& path) {
  io::TensorArchive a;
  a.meta = {{"kind", "checkpoint"}, {"config_hash", config_hash(m.config)}, {"step", step},
            {"config", to_json(m.config)}};
  m.visit([&](const std::string& name, Var& p) { a.tensors.push_back(io::matrix_entry(name, p.value())); });
  io::write_archive(path, a);
}

struct LoadedCheckpoint {
  Model model;
  long long step = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const io::TensorArchive a = io::read_archive(path);
  if (a.meta.value("kind", "") != "checkpoint") throw FormatError(path.string() + ": not a checkpoint");
  const RunConfig cfg = config_from_json(a.meta.at("config"));
  if (a.meta.at("config_hash").get<std::uint32_t>() != config_hash(cfg))
    throw FormatError(path.string() + ": config hash does not match embedded config");
  Rng rng = make_rng(cfg.seed, "init");
  LoadedCheckpoint out{Model::init(cfg, rng), a.meta.at("step").get<long long>()};
  std::size_t seen = 0;
  out.model.visit([&](const std::string& name, Var& p) {
    const Matrix v = io::entry_matrix(a.at(name));
    if (v.rows() != p.rows() || v.cols() != p.cols()) throw FormatError(path.string() + ": shape mismatch for " + name);
    p.mutable_value() = v;
    ++seen;
  });
  if (seen != a.tensors.size()) throw FormatError(path.string() + ": unexpected extra tensors");
  return out;
}

}  // namespace vocl::model
