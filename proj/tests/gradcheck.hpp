#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "vocl/ad/var.hpp"

namespace vocl::check {

struct GradReport {
  std::string worst_name;
  double worst_rel = 0;  // max over tensors of |analytic - numeric| / max(|analytic|, |numeric|)
};

/// Compares backprop gradients of a scalar-valued `f` against central differences for every
/// listed tensor. Norm-wise relative error per tensor, so tiny entries don't dominate;
/// gradients that are identically zero by symmetry (e.g. key biases under softmax) compare
/// against an absolute floor.
inline GradReport check_gradients(const std::function<Var()>& f, std::vector<std::pair<std::string, Var>> params,
                                  double h = 1e-4) {
  for (auto& [n, p] : params) p.zero_grad();
  ad::backward(f());
  GradReport rep;
  for (auto& [name, p] : params) {
    const Matrix analytic = p.grad();
    Matrix numeric(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.value().size(); ++i) {
      Scalar& x = p.mutable_value().data()[i];
      const Scalar x0 = x;
      x = x0 + h;
      const double up = f().item();
      x = x0 - h;
      const double down = f().item();
      x = x0;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-6});
    const double rel = (analytic - numeric).norm() / scale;
    if (rel >= rep.worst_rel) rep = {name, rel};
  }
  return rep;
}

}  // namespace vocl::check
