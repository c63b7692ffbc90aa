#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vocl/core/tensor_spec.hpp"

namespace vocl::data {

/// Normalized (cx, cy, w, h) box.
using Box = std::array<double, 4>;

/// A rendered clip with exact ground truth. Frames are [T, H, W, 3] in [0, 1]; masks are
/// [T, H, W] with 0 for background and k in 1..K for the k-th sprite.
struct VideoClip {
  int length = 0;
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> frames;
  std::vector<std::int32_t> masks;
  std::vector<int> classes;      // [K], each in 1..n_classes
  std::vector<Box> boxes;        // [T * K]
  std::vector<std::uint8_t> visible;  // [T * K]
  std::string clip_id;
  std::uint64_t seed = 0;

  int n_objects() const { return static_cast<int>(classes.size()); }
  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * channels; }
  std::size_t mask_size() const { return static_cast<std::size_t>(height) * width; }

  std::span<const float> frame(int t) const { return {frames.data() + t * frame_size(), frame_size()}; }
  std::span<const std::int32_t> mask(int t) const { return {masks.data() + t * mask_size(), mask_size()}; }
  const Box& box(int t, int k) const { return boxes[static_cast<std::size_t>(t) * n_objects() + k]; }
  bool is_visible(int t, int k) const { return visible[static_cast<std::size_t>(t) * n_objects() + k] != 0; }

  TensorSpec frames_spec() const { return {{"T", length}, {"h0", height}, {"w0", width}, {"c0", channels}}; }

  bool operator==(const VideoClip&) const = default;
};

}  // namespace vocl::data
