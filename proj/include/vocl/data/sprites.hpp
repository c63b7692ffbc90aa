#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vocl/core/config.hpp"
#include "vocl/core/error.hpp"
#include "vocl/core/rng.hpp"
#include "vocl/data/clip.hpp"

namespace vocl::data {

enum class ShapeClass { circle = 1, square = 2, triangle = 3 };

struct SpriteSpec {
  ShapeClass shape = ShapeClass::circle;
  std::array<double, 3> color{1.0, 1.0, 1.0};
  double scale = 0.2;                  // side / diameter as a fraction of frame height
  std::array<double, 2> position{0.5, 0.5};  // center, normalized (x, y)
  std::array<double, 2> velocity{0.0, 0.0};  // per-frame displacement, normalized
  int depth = 0;                       // larger is drawn on top
};

inline constexpr std::array<float, 3> kBackground{0.08f, 0.08f, 0.08f};

/// Does the pixel center (x, y) (normalized) fall inside the sprite?
inline bool covers(const SpriteSpec& s, double x, double y) {
  const double r = 0.5 * s.scale;
  const double dx = x - s.position[0], dy = y - s.position[1];
  switch (s.shape) {
    case ShapeClass::circle: return dx * dx + dy * dy <= r * r;
    case ShapeClass::square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeClass::triangle: return dy >= -r && dy <= r && std::abs(dx) <= 0.5 * (dy + r);
  }
  return false;
}

/// Linear motion with elastic reflection off the walls; the sprite extent stays inside [0, 1].
inline void advance(SpriteSpec& s) {
  const double r = 0.5 * s.scale;
  for (int a = 0; a < 2; ++a) {
    double p = s.position[a] + s.velocity[a];
    if (p < r) {
      p = 2 * r - p;
      s.velocity[a] = -s.velocity[a];
    } else if (p > 1 - r) {
      p = 2 * (1 - r) - p;
      s.velocity[a] = -s.velocity[a];
    }
    s.position[a] = p;
  }
}

/// Hard rasterization at pixel centers. Label k + 1 belongs to sprites[k]; the topmost
/// covering sprite (highest depth) owns the pixel.
inline VideoClip render_clip(std::vector<SpriteSpec> sprites, int length, int image_size, std::string clip_id,
                             std::uint64_t seed) {
  if (length < 2) throw PreconditionError("clip length must be >= 2");
  const int K = static_cast<int>(sprites.size());
  std::vector<int> draw_order(K);
  std::iota(draw_order.begin(), draw_order.end(), 0);
  std::stable_sort(draw_order.begin(), draw_order.end(),
                   [&](int a, int b) { return sprites[a].depth < sprites[b].depth; });
  for (int i = 1; i < K; ++i)
    if (sprites[draw_order[i]].depth == sprites[draw_order[i - 1]].depth)
      throw PreconditionError("sprite depths must be distinct");

  VideoClip clip;
  clip.length = length;
  clip.height = clip.width = image_size;
  clip.clip_id = std::move(clip_id);
  clip.seed = seed;
  const std::size_t hw = static_cast<std::size_t>(image_size) * image_size;
  clip.frames.resize(length * hw * 3);
  clip.masks.assign(length * hw, 0);
  for (const auto& s : sprites) clip.classes.push_back(static_cast<int>(s.shape));
  clip.boxes.assign(static_cast<std::size_t>(length) * K, Box{0, 0, 0, 0});
  clip.visible.assign(static_cast<std::size_t>(length) * K, 0);

  for (int t = 0; t < length; ++t) {
    if (t > 0)
      for (auto& s : sprites) advance(s);
    float* frame = clip.frames.data() + t * hw * 3;
    std::int32_t* mask = clip.masks.data() + t * hw;
    for (std::size_t p = 0; p < hw; ++p) std::copy(kBackground.begin(), kBackground.end(), frame + 3 * p);
    for (int k : draw_order) {
      const auto& s = sprites[k];
      for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
          if (!covers(s, (x + 0.5) / image_size, (y + 0.5) / image_size)) continue;
          const std::size_t p = static_cast<std::size_t>(y) * image_size + x;
          mask[p] = k + 1;
          for (int ch = 0; ch < 3; ++ch) frame[3 * p + ch] = static_cast<float>(s.color[ch]);
        }
    }
    // Boxes are derived from the final labels, so they are tight by construction.
    for (int k = 0; k < K; ++k) {
      int x0 = image_size, y0 = image_size, x1 = -1, y1 = -1;
      for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x)
          if (mask[static_cast<std::size_t>(y) * image_size + x] == k + 1) {
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, y), y1 = std::max(y1, y);
          }
      if (x1 < 0) continue;
      const double n = image_size;
      clip.visible[static_cast<std::size_t>(t) * K + k] = 1;
      clip.boxes[static_cast<std::size_t>(t) * K + k] = {(x0 + x1 + 1) / (2 * n), (y0 + y1 + 1) / (2 * n),
                                                         (x1 - x0 + 1) / n, (y1 - y0 + 1) / n};
    }
  }
  return clip;
}

inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  for (auto& ch : rgb) ch += v - c;
  return rgb;
}

/// Samples a sprite scene and renders it. A pure function of (cfg, n_slots, seed).
inline VideoClip generate_clip(const DataConfig& cfg, int n_slots, std::uint64_t seed) {
  if (cfg.max_objects >= n_slots)
    throw PreconditionError("max_objects " + std::to_string(cfg.max_objects) + " must be < n_slots " +
                            std::to_string(n_slots) + " (one slot covers the background)");
  if (cfg.clip_len < 2) throw PreconditionError("clip_len must be >= 2");
  Rng rng = make_rng(seed, "clip");
  const int K = uniform_int(rng, cfg.min_objects, cfg.max_objects);
  std::vector<SpriteSpec> sprites(K);
  std::vector<int> depths(K);
  std::iota(depths.begin(), depths.end(), 0);
  std::shuffle(depths.begin(), depths.end(), rng);
  for (int k = 0; k < K; ++k) {
    auto& s = sprites[k];
    s.shape = static_cast<ShapeClass>(uniform_int(rng, 1, cfg.n_classes));
    s.color = hsv_to_rgb(uniform_real(rng, 0.0, 1.0), uniform_real(rng, 0.6, 1.0), uniform_real(rng, 0.6, 1.0));
    s.scale = uniform_real(rng, cfg.min_scale, cfg.max_scale);
    const double r = 0.5 * s.scale;
    s.position = {uniform_real(rng, r, 1 - r), uniform_real(rng, r, 1 - r)};
    const double angle = uniform_real(rng, 0.0, 2.0 * 3.141592653589793);
    const double speed = uniform_real(rng, 0.25, 1.0) * cfg.max_speed;
    s.velocity = {speed * std::cos(angle), speed * std::sin(angle)};
    s.depth = depths[k];
  }
  return render_clip(std::move(sprites), cfg.clip_len, cfg.image_size, "clip_" + std::to_string(seed), seed);
}

}  // namespace vocl::data
