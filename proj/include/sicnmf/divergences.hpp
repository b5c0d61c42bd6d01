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

// Bregman divergences D(X, Xhat) summed over all entries, and their
// gradients with respect to Xhat.
//
//   generalized_kl : Xhat - X + X log(X / Xhat)        (count data)
//   squared        : (X - Xhat)^2                      (real data)
//   logistic       : X log(X/Xhat) + (1-X) log((1-X)/(1-Xhat))   (binary)
//
// 0 log 0 is taken as 0. Xhat is floored at epsilon for generalized_kl and
// clamped into [epsilon, 1 - epsilon] for logistic.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sicnmf/core_model.hpp"
#include "sicnmf/error.hpp"

namespace sicnmf {

struct DivergenceSpec {
  Divergence kind = Divergence::generalized_kl;
  double epsilon = 1e-10;
};

namespace detail {

inline void check_pair(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Xhat) {
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols()) {
    throw Error(ErrorCategory::shape, "divergence operands differ in shape");
  }
}

inline double xlogy_ratio(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); }

inline double entry_value(Divergence kind, double eps, double x, double y) {
  switch (kind) {
    case Divergence::generalized_kl: {
      const double yc = std::max(y, eps);
      return yc - x + xlogy_ratio(x, yc);
    }
    case Divergence::squared: return (x - y) * (x - y);
    case Divergence::logistic: {
      const double yc = std::clamp(y, eps, 1.0 - eps);
      return xlogy_ratio(x, yc) + xlogy_ratio(1.0 - x, 1.0 - yc);
    }
  }
  return 0.0;
}

inline double entry_grad(Divergence kind, double eps, double x, double y) {
  switch (kind) {
    case Divergence::generalized_kl: return 1.0 - x / std::max(y, eps);
    case Divergence::squared: return 2.0 * (y - x);
    case Divergence::logistic: {
      const double yc = std::clamp(y, eps, 1.0 - eps);
      return (yc - x) / (yc * (1.0 - yc));
    }
  }
  return 0.0;
}

}  // namespace detail

/// Sum of entrywise divergences, accumulated in column-major storage order.
inline double div_value(const DivergenceSpec& spec, const Eigen::Ref<const Matrix>& X,
                        const Eigen::Ref<const Matrix>& Xhat) {
  detail::check_pair(X, Xhat);
  double total = 0.0;
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      const double x = X(i, j);
      const double y = Xhat(i, j);
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(ErrorCategory::numeric, "non-finite divergence operand");
      }
      total += detail::entry_value(spec.kind, spec.epsilon, x, y);
    }
  }
  return total;
}

/// True when no clamp acts on a term that depends on the data: for
/// generalized_kl every X > 0 entry has Xhat >= epsilon, for logistic every
/// Xhat lies in [epsilon, 1 - epsilon]. Outside this region the clamped value
/// is finite but no longer a divergence of the actual estimate.
inline bool in_domain(const DivergenceSpec& spec, const Eigen::Ref<const Matrix>& X,
                      const Eigen::Ref<const Matrix>& Xhat) {
  detail::check_pair(X, Xhat);
  switch (spec.kind) {
    case Divergence::generalized_kl:
      return ((X.array() <= 0.0) || (Xhat.array() >= spec.epsilon)).all();
    case Divergence::squared: return true;
    case Divergence::logistic:
      return ((Xhat.array() >= spec.epsilon) && (Xhat.array() <= 1.0 - spec.epsilon)).all();
  }
  return true;
}

inline Matrix div_grad(const DivergenceSpec& spec, const Eigen::Ref<const Matrix>& X,
                       const Eigen::Ref<const Matrix>& Xhat) {
  detail::check_pair(X, Xhat);
  Matrix g(X.rows(), X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      const double x = X(i, j);
      const double y = Xhat(i, j);
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(ErrorCategory::numeric, "non-finite divergence operand");
      }
      g(i, j) = detail::entry_grad(spec.kind, spec.epsilon, x, y);
    }
  }
  return g;
}

}  // namespace sicnmf
