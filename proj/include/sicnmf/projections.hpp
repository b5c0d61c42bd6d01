// Copyright 2026 The sicnmf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sicnmf/core_model.hpp"
#include "sicnmf/error.hpp"

namespace sicnmf {

/// Radius of the simplex {y >= 0, sum(y) = radius} that factor columns live on.
struct SimplexTarget {
  double radius = 1.0;
};

/// Euclidean projection onto {y >= 0, sum(y) = radius} by sort-and-threshold.
/// Ties in the descending sort keep their original order.
template <class Derived>
Vector project_simplex(const Eigen::MatrixBase<Derived>& x, double radius = 1.0) {
  const Index d = x.size();
  if (d == 0) throw Error(ErrorCategory::shape, "cannot project an empty vector onto the simplex");
  if (!(radius > 0.0)) throw Error(ErrorCategory::config, "simplex radius must be positive");

  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return x(a) > x(b); });

  // largest j with x_(j) - (sum_{i<=j} x_(i) - radius) / j > 0
  double prefix = 0.0;
  double tau = 0.0;
  for (Index j = 0; j < d; ++j) {
    const double xj = x(order[static_cast<std::size_t>(j)]);
    prefix += xj;
    const double candidate = (prefix - radius) / static_cast<double>(j + 1);
    if (xj - candidate > 0.0) tau = candidate;
  }

  Vector y(d);
  for (Index i = 0; i < d; ++i) {
    const double v = x(i) - tau;
    y(i) = v > 0.0 ? v : 0.0;
  }
  return y;
}

/// Projects every column of M onto the simplex of the given radius, in place.
inline void project_columns_simplex(Eigen::Ref<Matrix> M, double radius = 1.0) {
  for (Index k = 0; k < M.cols(); ++k) M.col(k) = project_simplex(M.col(k), radius);
}

/// Entrywise max(M, 0). Signed zeros come out as +0.
template <class Derived>
Matrix project_nonneg(const Eigen::MatrixBase<Derived>& M) {
  return M.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
}

/// Projection onto {W >= 0, ||W||_F <= eta}: clamp to the orthant, then
/// rescale onto the ball. The order matters; the orthant is a cone and the
/// ball is centred at the origin. eta = infinity only clamps.
template <class Derived>
Matrix project_nonneg_ball(const Eigen::MatrixBase<Derived>& M, double eta) {
  Matrix out = project_nonneg(M);
  if (std::isinf(eta)) return out;
  const double norm = out.norm();
  if (norm > eta) out *= eta / norm;
  return out;
}

}  // namespace sicnmf
