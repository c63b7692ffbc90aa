#pragma once

#include "vocl/ad/var.hpp"
#include "vocl/core/error.hpp"
#include "vocl/core/tensor_spec.hpp"

namespace vocl {

/// Per-frame feature grid F_t, stored channel-last as an [h*w, c] matrix.
struct FeatureMap {
  Var values;
  int height = 0;
  int width = 0;
  int channels = 0;
  int frame_index = 0;  // 1-based
  bool frozen = false;

  TensorSpec spec() const { return {{"h", height}, {"w", width}, {"c", channels}}; }
  int n_tokens() const { return height * width; }

  void check(int h, int w, int c, const char* where) const {
    if (height != h || width != w || channels != c || values.rows() != h * w || values.cols() != c)
      throw ShapeError(std::string(where) + ": feature map " + spec().str() + " does not match [h=" +
                       std::to_string(h) + ", w=" + std::to_string(w) + ", c=" + std::to_string(c) + "]");
  }
};

}  // namespace vocl
