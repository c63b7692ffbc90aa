#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vocl/ad/var.hpp"

namespace vocl::nn {

using NamedParams = std::vector<std::pair<std::string, ad::Var>>;

/// Linear warmup to `peak`, then cosine decay to `peak * min_ratio` at `total` steps.
struct WarmupCosine {
  double peak = 1e-3;
  int warmup = 0;
  int total = 1;
  double min_ratio = 0.0;

  double operator()(int step) const {
    if (warmup > 0 && step < warmup) return peak * (step + 1) / warmup;
    const double span = std::max(1, total - warmup);
    const double progress = std::min(1.0, (step - warmup) / span);
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return peak * (min_ratio + (1.0 - min_ratio) * cosine);
  }
};

inline double grad_norm(const NamedParams& params) {
  double sq = 0;
  for (const auto& [name, p] : params)
    if (p.has_grad()) sq += p.node()->grad.squaredNorm();
  return std::sqrt(sq);
}

/// Scales all gradients so their global L2 norm is at most `max_norm`. Returns the pre-clip norm.
inline double clip_grad_norm(NamedParams& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const double k = max_norm / norm;
    for (auto& [name, p] : params)
      if (p.has_grad()) p.node()->grad *= k;
  }
  return norm;
}

inline void zero_grads(NamedParams& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Updates every parameter that requires a gradient; parameters without one are skipped.
  void step(NamedParams& params, double lr) {
    if (m_.empty()) {
      for (const auto& [name, p] : params) {
        m_.push_back(Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(Matrix::Zero(p.rows(), p.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      ad::Var& p = params[i].second;
      if (!p.requires_grad() || !p.has_grad()) continue;
      const Matrix& g = p.node()->grad;
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
      p.mutable_value().array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  long long steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace vocl::nn
