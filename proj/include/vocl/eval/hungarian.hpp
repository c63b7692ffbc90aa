#pragma once

#include <limits>
#include <vector>

#include "vocl/ad/var.hpp"
#include "vocl/core/error.hpp"

namespace vocl::eval {

/// Exact maximum-weight assignment (shortest augmenting paths with potentials, O(n^2 m)).
/// Returns, for each row, the matched column; every row is matched when rows <= cols.
/// Wider-than-tall inputs are handled by transposition; unmatched rows then get -1.
inline std::vector<int> hungarian_max(const Matrix& score) {
  const int rows = static_cast<int>(score.rows());
  const int cols = static_cast<int>(score.cols());
  if (rows == 0) return {};
  if (rows > cols) {
    const std::vector<int> by_col = hungarian_max(score.transpose());
    std::vector<int> out(rows, -1);
    for (int c = 0; c < cols; ++c) out[by_col[c]] = c;
    return out;
  }
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; cost = -score.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = -score(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j)
    if (p[j]) out[p[j] - 1] = j - 1;
  return out;
}

}  // namespace vocl::eval
