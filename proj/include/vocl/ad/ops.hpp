#pragma once

#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "vocl/ad/var.hpp"
#include "vocl/core/error.hpp"

// Differentiable operations on row-major 2-D tensors. Rows are tokens, columns channels.

namespace vocl::ad {

namespace detail {
inline void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}
inline std::string dims(const Var& v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }
}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::require(a.cols() == b.rows(), "matmul", detail::dims(a) + " * " + detail::dims(b));
  return make_op(a.value() * b.value(), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) accumulate(a, self.grad * b.value().transpose());
    if (b.requires_grad()) accumulate(b, a.value().transpose() * self.grad);
  });
}

/// a * b^T
inline Var matmul_bt(const Var& a, const Var& b) {
  detail::require(a.cols() == b.cols(), "matmul_bt", detail::dims(a) + " * (" + detail::dims(b) + ")^T");
  return make_op(a.value() * b.value().transpose(), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) accumulate(a, self.grad * b.value());
    if (b.requires_grad()) accumulate(b, self.grad.transpose() * a.value());
  });
}

/// a^T * b
inline Var matmul_at(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows(), "matmul_at", "(" + detail::dims(a) + ")^T * " + detail::dims(b));
  return make_op(a.value().transpose() * b.value(), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) accumulate(a, b.value() * self.grad.transpose());
    if (b.requires_grad()) accumulate(b, a.value() * self.grad);
  });
}

/// x * W + b, with b a 1 x out row broadcast over rows.
inline Var affine(const Var& x, const Var& w, const Var& b) {
  detail::require(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "affine",
                  detail::dims(x) + " * " + detail::dims(w) + " + " + detail::dims(b));
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return make_op(std::move(out), {x, w, b}, [x, w, b](const Node& self) {
    if (x.requires_grad()) accumulate(x, self.grad * w.value().transpose());
    if (w.requires_grad()) accumulate(w, x.value().transpose() * self.grad);
    if (b.requires_grad()) accumulate(b, self.grad.colwise().sum());
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add", detail::dims(a) + " + " + detail::dims(b));
  return make_op(a.value() + b.value(), {a, b}, [a, b](const Node& self) {
    accumulate(a, self.grad);
    accumulate(b, self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", detail::dims(a) + " - " + detail::dims(b));
  return make_op(a.value() - b.value(), {a, b}, [a, b](const Node& self) {
    accumulate(a, self.grad);
    accumulate(b, -self.grad);
  });
}

/// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", detail::dims(a) + " .* " + detail::dims(b));
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) accumulate(a, self.grad.cwiseProduct(b.value()));
    if (b.requires_grad()) accumulate(b, self.grad.cwiseProduct(a.value()));
  });
}

/// Adds a 1 x n row to every row of a.
inline Var add_row(const Var& a, const Var& row) {
  detail::require(row.rows() == 1 && row.cols() == a.cols(), "add_row", detail::dims(a) + " + " + detail::dims(row));
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_op(std::move(out), {a, row}, [a, row](const Node& self) {
    accumulate(a, self.grad);
    if (row.requires_grad()) accumulate(row, self.grad.colwise().sum());
  });
}

inline Var scale(const Var& a, Scalar k) {
  return make_op(a.value() * k, {a}, [a, k](const Node& self) { accumulate(a, self.grad * k); });
}

/// 1 - a
inline Var one_minus(const Var& a) {
  Matrix out = (-a.value().array() + 1.0).matrix();
  return make_op(std::move(out), {a}, [a](const Node& self) { accumulate(a, -self.grad); });
}

inline Var relu(const Var& a) {
  return make_op(a.value().cwiseMax(0.0), {a}, [a](const Node& self) {
    accumulate(a, (a.value().array() > 0.0).select(self.grad.array(), 0.0).matrix());
  });
}

inline Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_op(std::move(out), {a}, [a](const Node& self) {
    const auto y = self.value.array();
    accumulate(a, (self.grad.array() * y * (1.0 - y)).matrix());
  });
}

inline Var exp(const Var& a) {
  return make_op(a.value().array().exp().matrix(), {a}, [a](const Node& self) {
    accumulate(a, self.grad.cwiseProduct(self.value));
  });
}

inline Var tanh(const Var& a) {
  return make_op(a.value().array().tanh().matrix(), {a}, [a](const Node& self) {
    const auto y = self.value.array();
    accumulate(a, (self.grad.array() * (1.0 - y * y)).matrix());
  });
}

/// Softmax along each row.
inline Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() -= out.row(r).maxCoeff();
    out.row(r) = out.row(r).array().exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_op(std::move(out), {a}, [a](const Node& self) {
    const Matrix& y = self.value;
    Matrix g = y.cwiseProduct(self.grad);
    const Eigen::VectorXd dots = g.rowwise().sum();
    g -= (y.array().colwise() * dots.array()).matrix();
    accumulate(a, g);
  });
}

/// Row-wise layer normalization with learnable 1 x n gain and bias.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, Scalar eps = 1e-5) {
  const Eigen::Index n = x.cols();
  detail::require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n, "layer_norm",
                  detail::dims(x) + " with gain " + detail::dims(gain));
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.value().row(r).mean();
    const auto centered = x.value().row(r).array() - mean;
    const Scalar var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return make_op(std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv_std](const Node& self) {
    const Matrix& g = self.grad;
    if (gain.requires_grad()) accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
    if (bias.requires_grad()) accumulate(bias, g.colwise().sum());
    if (x.requires_grad()) {
      const Matrix gx = g.array().rowwise() * gain.value().row(0).array();
      const Eigen::VectorXd mean_g = gx.rowwise().mean();
      const Eigen::VectorXd mean_gx = gx.cwiseProduct(xhat).rowwise().mean();
      Matrix dx = gx;
      dx.colwise() -= mean_g;
      dx -= (xhat.array().colwise() * mean_gx.array()).matrix();
      dx = (dx.array().colwise() * inv_std.array()).matrix();
      accumulate(x, dx);
    }
  });
}

/// Divides each column by (its sum + eps): attention-weighted mean weights.
inline Var normalize_cols(const Var& a, Scalar eps) {
  const Eigen::RowVectorXd denom = (a.value().colwise().sum().array() + eps).matrix();
  Matrix out = a.value().array().rowwise() / denom.array();
  return make_op(std::move(out), {a}, [a, denom](const Node& self) {
    // d out_ij / d a_kj = delta_ik / D_j - a_ij / D_j^2
    const Eigen::RowVectorXd gy = self.grad.cwiseProduct(self.value).colwise().sum();
    Matrix g = self.grad;
    g.rowwise() -= gy;
    g = g.array().rowwise() / denom.array();
    accumulate(a, g);
  });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  detail::require(start >= 0 && start + n <= a.cols(), "slice_cols", "out of range");
  return make_op(a.value().middleCols(start, n), {a}, [a, start, n](const Node& self) {
    if (a.requires_grad()) a.node()->grad_buffer().middleCols(start, n) += self.grad;
  });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n) {
  detail::require(start >= 0 && start + n <= a.rows(), "slice_rows", "out of range");
  return make_op(a.value().middleRows(start, n), {a}, [a, start, n](const Node& self) {
    if (a.requires_grad()) a.node()->grad_buffer().middleRows(start, n) += self.grad;
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "concat_cols", "no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == parts[0].rows(), "concat_cols", "row mismatch");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_op(std::move(out), parts, [parts](const Node& self) {
    Eigen::Index c0 = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) accumulate(p, self.grad.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "concat_rows", "no inputs");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == parts[0].cols(), "concat_rows", "column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(out), parts, [parts](const Node& self) {
    Eigen::Index r0 = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) accumulate(p, self.grad.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

/// [m, c] -> [m * n, c]; output row i * n + k is input row i.
inline Var repeat_rows(const Var& a, Eigen::Index n) {
  Matrix out(a.rows() * n, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.middleRows(i * n, n).rowwise() = a.value().row(i);
  return make_op(std::move(out), {a}, [a, n](const Node& self) {
    Matrix g(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) g.row(i) = self.grad.middleRows(i * n, n).colwise().sum();
    accumulate(a, g);
  });
}

/// [m, c] -> [n * m, c]; n stacked copies.
inline Var tile_rows(const Var& a, Eigen::Index n) {
  Matrix out(a.rows() * n, a.cols());
  for (Eigen::Index k = 0; k < n; ++k) out.middleRows(k * a.rows(), a.rows()) = a.value();
  return make_op(std::move(out), {a}, [a, n](const Node& self) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index k = 0; k < n; ++k) g += self.grad.middleRows(k * a.rows(), a.rows());
    accumulate(a, g);
  });
}

/// Non-overlapping k x k patch gather on a channel-last [H*W, C] grid -> [(H/k)*(W/k), k*k*C].
/// Output channel order is (dy, dx, c).
inline Var space_to_depth(const Var& a, int height, int width, int k) {
  detail::require(a.rows() == static_cast<Eigen::Index>(height) * width && height % k == 0 && width % k == 0,
                  "space_to_depth", detail::dims(a) + " vs grid " + std::to_string(height) + "x" + std::to_string(width));
  const int ho = height / k, wo = width / k;
  const Eigen::Index c = a.cols();
  Matrix out(static_cast<Eigen::Index>(ho) * wo, k * k * c);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x)
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
          out.row(y * wo + x).segment((dy * k + dx) * c, c) = a.value().row((y * k + dy) * width + x * k + dx);
  return make_op(std::move(out), {a}, [a, width, k, ho, wo, c](const Node& self) {
    Matrix& g = a.node()->grad_buffer();
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x)
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            g.row((y * k + dy) * width + x * k + dx) += self.grad.row(y * wo + x).segment((dy * k + dx) * c, c);
  });
}

/// Mean squared error against a constant target. The target never receives a gradient.
inline Var mse(const Var& pred, const Matrix& target) {
  detail::require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse", "shape mismatch");
  const Matrix diff = pred.value() - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return make_op(std::move(out), {pred}, [pred, diff, n](const Node& self) {
    accumulate(pred, diff * (2.0 * self.grad(0, 0) / n));
  });
}

inline Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [a](const Node& self) {
    accumulate(a, Matrix::Constant(a.rows(), a.cols(), self.grad(0, 0)));
  });
}

/// Mean of a list of 1x1 scalars.
inline Var mean_of(const std::vector<Var>& scalars) {
  detail::require(!scalars.empty(), "mean_of", "no inputs");
  Matrix out(1, 1);
  out(0, 0) = 0;
  for (const auto& s : scalars) out(0, 0) += s.item();
  const Scalar n = static_cast<Scalar>(scalars.size());
  out(0, 0) /= n;
  return make_op(std::move(out), scalars, [scalars, n](const Node& self) {
    for (const auto& s : scalars) accumulate(s, Matrix::Constant(1, 1, self.grad(0, 0) / n));
  });
}

/// Softmax cross-entropy averaged over rows; `labels[r]` is the target column of row r.
inline Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
  detail::require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "cross_entropy", "label count mismatch");
  Matrix prob = logits.value();
  Scalar loss = 0;
  for (Eigen::Index r = 0; r < prob.rows(); ++r) {
    prob.row(r).array() -= prob.row(r).maxCoeff();
    prob.row(r) = prob.row(r).array().exp().matrix();
    prob.row(r) /= prob.row(r).sum();
    loss -= std::log(std::max(prob(r, labels[r]), 1e-300));
  }
  const Scalar n = static_cast<Scalar>(labels.size());
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  return make_op(std::move(out), {logits}, [logits, prob, labels, n](const Node& self) {
    Matrix g = prob;
    for (std::size_t r = 0; r < labels.size(); ++r) g(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
    accumulate(logits, g * (self.grad(0, 0) / n));
  });
}

/// Mixture weights [s, n] for slot-major logits [s*n, 1].
inline Matrix mixture_weights(const Matrix& logits, Eigen::Index n_slots) {
  const Eigen::Index n = logits.rows() / n_slots;
  Matrix w(n_slots, n);
  for (Eigen::Index i = 0; i < n_slots; ++i) w.row(i) = logits.middleRows(i * n, n).transpose();
  for (Eigen::Index p = 0; p < n; ++p) {
    w.col(p).array() -= w.col(p).maxCoeff();
    w.col(p) = w.col(p).array().exp().matrix();
    w.col(p) /= w.col(p).sum();
  }
  return w;
}

/// Softmax-over-slots mixture. `content` is [s*n, c] (slot-major), `logits` is [s*n, 1].
/// Returns the [n, c] reconstruction; mixture weights are a pure function of the logits
/// (see `mixture_weights`).
inline Var mixture(const Var& content, const Var& logits, Eigen::Index n_slots) {
  detail::require(logits.cols() == 1 && logits.rows() == content.rows() && content.rows() % n_slots == 0, "mixture",
                  detail::dims(content) + " / " + detail::dims(logits));
  const Eigen::Index n = content.rows() / n_slots;
  Matrix w = mixture_weights(logits.value(), n_slots);
  Matrix out = Matrix::Zero(n, content.cols());
  for (Eigen::Index i = 0; i < n_slots; ++i)
    out += (content.value().middleRows(i * n, n).array().colwise() * w.row(i).transpose().array()).matrix();
  return make_op(std::move(out), {content, logits}, [content, logits, n_slots, n, w](const Node& self) {
    const Matrix& g = self.grad;
    if (content.requires_grad()) {
      Matrix& gc = content.node()->grad_buffer();
      for (Eigen::Index i = 0; i < n_slots; ++i)
        gc.middleRows(i * n, n) += (g.array().colwise() * w.row(i).transpose().array()).matrix();
    }
    if (logits.requires_grad()) {
      Matrix dw(n_slots, n);
      for (Eigen::Index i = 0; i < n_slots; ++i)
        dw.row(i) = content.value().middleRows(i * n, n).cwiseProduct(g).rowwise().sum().transpose();
      const Eigen::RowVectorXd avg = w.cwiseProduct(dw).colwise().sum();
      Matrix dl = w.cwiseProduct(dw.rowwise() - avg);
      Matrix& gl = logits.node()->grad_buffer();
      for (Eigen::Index i = 0; i < n_slots; ++i) gl.middleRows(i * n, n) += dl.row(i).transpose();
    }
  });
}

}  // namespace vocl::ad
