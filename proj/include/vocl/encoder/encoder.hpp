#pragma once

#include <span>
#include <string>
#include <vector>

#include "vocl/core/config.hpp"
#include "vocl/data/clip.hpp"
#include "vocl/encoder/feature_map.hpp"
#include "vocl/nn/layers.hpp"

namespace vocl::encoder {

/// Frame pixels as a channel-last [H*W, C] matrix.
inline Matrix frame_matrix(std::span<const float> frame, int height, int width, int channels) {
  if (frame.size() != static_cast<std::size_t>(height) * width * channels)
    throw ShapeError("frame has " + std::to_string(frame.size()) + " values, expected " +
                     std::to_string(height * width * channels));
  Matrix m(height * width, channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = frame[i];
  return m;
}

/// Frames -> features. `patch` is one linear map on non-overlapping patches; `conv` is three
/// stride-2, kernel-2 convolutions with ReLU between them. `external` has no parameters and
/// reads precomputed features instead.
struct Encoder {
  EncoderKind kind = EncoderKind::patch;
  int image_size = 64;
  int in_channels = 3;
  int patch = 8;
  int channels = 32;
  bool frozen = true;
  std::vector<nn::Linear> layers;

  static Encoder init(const RunConfig& cfg, Rng& rng) {
    Encoder e;
    e.kind = cfg.model.encoder;
    e.image_size = cfg.data.image_size;
    e.patch = cfg.model.encoder == EncoderKind::conv ? 8 : cfg.model.patch_size;
    e.channels = cfg.model.channels;
    e.frozen = cfg.model.encoder_frozen || cfg.model.encoder == EncoderKind::external;
    const int c = cfg.model.channels;
    if (e.kind == EncoderKind::patch) {
      e.layers.push_back(nn::Linear::init(e.patch * e.patch * e.in_channels, c, rng));
    } else if (e.kind == EncoderKind::conv) {
      e.layers.push_back(nn::Linear::init(4 * e.in_channels, c, rng));
      e.layers.push_back(nn::Linear::init(4 * c, c, rng));
      e.layers.push_back(nn::Linear::init(4 * c, c, rng));
    }
    e.set_frozen(e.frozen);
    return e;
  }

  void set_frozen(bool on) {
    frozen = on;
    for (auto& l : layers) {
      l.weight.set_requires_grad(!on);
      l.bias.set_requires_grad(!on);
    }
  }

  int grid() const { return image_size / patch; }

  /// Encodes `n_frames` frames stacked as [n_frames * H*W, C]; returns [n_frames * h*w, c].
  Var apply(const Matrix& pixels, int n_frames) const {
    if (kind == EncoderKind::external) throw PreconditionError("external encoder has no forward pass");
    const int hw0 = image_size * image_size;
    if (pixels.rows() != static_cast<Eigen::Index>(n_frames) * hw0 || pixels.cols() != in_channels)
      throw ShapeError("encoder input is " + std::to_string(pixels.rows()) + "x" + std::to_string(pixels.cols()) +
                       ", expected frames of " + std::to_string(image_size) + "x" + std::to_string(image_size) + "x" +
                       std::to_string(in_channels));
    std::vector<Var> per_frame;
    for (int f = 0; f < n_frames; ++f)
      per_frame.push_back(ad::constant(pixels.middleRows(static_cast<Eigen::Index>(f) * hw0, hw0)));
    int side = image_size;
    const int stride = kind == EncoderKind::patch ? patch : 2;
    Var x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      // Patch gathering is per frame; the affine map runs once over the whole stack.
      for (auto& p : per_frame) p = ad::space_to_depth(p, side, side, stride);
      side /= stride;
      x = layers[l](n_frames == 1 ? per_frame[0] : ad::concat_rows(per_frame));
      if (l + 1 < layers.size()) {
        x = ad::relu(x);
        const Eigen::Index rows = static_cast<Eigen::Index>(side) * side;
        for (int f = 0; f < n_frames; ++f) per_frame[f] = ad::slice_rows(x, f * rows, rows);
      }
    }
    return x;
  }

  FeatureMap encode(std::span<const float> frame, int frame_index) const {
    for (float v : frame)
      if (!(v >= 0.0f && v <= 1.0f)) throw PreconditionError("frame values must lie in [0, 1]");
    const Var out = apply(frame_matrix(frame, image_size, image_size, in_channels), 1);
    return FeatureMap{out, grid(), grid(), channels, frame_index, frozen};
  }

  std::vector<FeatureMap> encode_clip(const data::VideoClip& clip) const {
    if (clip.height != image_size || clip.width != image_size || clip.channels != in_channels)
      throw ShapeError("clip frames " + clip.frames_spec().str() + " do not match encoder input " +
                       std::to_string(image_size) + "x" + std::to_string(image_size));
    std::vector<FeatureMap> out;
    out.reserve(clip.length);
    for (int t = 0; t < clip.length; ++t) out.push_back(encode(clip.frame(t), t + 1));
    return out;
  }

  void visit(const std::string& prefix, const nn::ParamVisitor& v) {
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].visit(prefix + ".layer" + std::to_string(l), v);
  }
};

}  // namespace vocl::encoder
