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

// Test-only reference computations. Nothing here calls into the solver or
// projection code it is used to check.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "sicnmf/core_model.hpp"

namespace sicnmf::oracle {

/// Euclidean projection onto {y >= 0, sum y = radius} by enumerating every
/// support set: on a support S the equality-constrained least squares
/// solution is x_S - (sum x_S - radius)/|S|; keep the feasible candidate
/// closest to x.
inline Vector simplex_by_active_sets(const Vector& x, double radius = 1.0) {
  const Index d = x.size();
  double best_dist = std::numeric_limits<double>::infinity();
  Vector best = Vector::Zero(d);
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        sum += x(i);
        ++count;
      }
    }
    const double shift = (sum - radius) / count;
    Vector y = Vector::Zero(d);
    bool feasible = true;
    for (Index i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        y(i) = x(i) - shift;
        if (y(i) < 0.0) feasible = false;
      }
    }
    if (!feasible) continue;
    const double dist = (y - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = y;
    }
  }
  return best;
}

/// Minimizes ||Y - M||_F over {Y >= 0, ||Y||_F <= eta} for a 2x2 M by a
/// zooming grid search in polar coordinates Y = r u(t1, t2, t3), with
/// r in [0, eta] and angles in [0, pi/2], so the feasible set is a box.
inline Matrix ball_by_grid(const Matrix& M, double eta) {
  const double pi_2 = std::acos(0.0);
  // long double keeps the located minimizer accurate well below 1e-8
  using Point = Eigen::Matrix<long double, 4, 1>;
  auto point = [](const Eigen::Vector4d& q) {
    const long double r = q(0), a = q(1), b = q(2), c = q(3);
    return Point(r * std::cos(a), r * std::sin(a) * std::cos(b), r * std::sin(a) * std::sin(b) * std::cos(c),
                 r * std::sin(a) * std::sin(b) * std::sin(c));
  };
  const Eigen::Vector4d lo(0.0, 0.0, 0.0, 0.0), hi(eta, pi_2, pi_2, pi_2);
  const Point target = Eigen::Map<const Eigen::Vector4d>(M.data()).cast<long double>();
  Eigen::Vector4d center = 0.5 * (lo + hi);
  Eigen::Vector4d half = 0.5 * (hi - lo);
  const int steps = 8;
  long double best_val = std::numeric_limits<long double>::infinity();
  Eigen::Vector4d best = center;
  for (int level = 0; level < 90; ++level) {
    for (int i0 = 0; i0 <= steps; ++i0)
      for (int i1 = 0; i1 <= steps; ++i1)
        for (int i2 = 0; i2 <= steps; ++i2)
          for (int i3 = 0; i3 <= steps; ++i3) {
            Eigen::Vector4d q = center + half.cwiseProduct(Eigen::Vector4d(i0, i1, i2, i3) * (2.0 / steps) -
                                                           Eigen::Vector4d::Ones());
            q = q.cwiseMax(lo).cwiseMin(hi);
            const long double val = (point(q) - target).squaredNorm();
            if (val < best_val) {
              best_val = val;
              best = q;
            }
          }
    center = best;
    half *= 0.7;
  }
  Matrix out(2, 2);
  Eigen::Map<Eigen::Vector4d>(out.data()) = point(best).cast<double>();
  return out;
}

/// Central finite differences of a scalar function of a matrix.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      probe(i, j) = x(i, j) + h;
      const double up = f(probe);
      probe(i, j) = x(i, j) - h;
      const double down = f(probe);
      probe(i, j) = x(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// Generalized KL written out independently of the library.
inline double kl(const Matrix& X, const Matrix& Y) {
  double total = 0.0;
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i = 0; i < X.rows(); ++i) {
      const double x = X(i, j), y = Y(i, j);
      total += y - x + (x > 0.0 ? x * std::log(x / y) : 0.0);
    }
  return total;
}

/// Lee-Seung multiplicative updates for KL-NMF, X ~ W H^T with H n_cols x R.
struct MuResult {
  Matrix W;
  Matrix H;
  double objective = 0.0;
};

inline MuResult kl_nmf_multiplicative(const Matrix& X, Matrix W, Matrix H, int iterations) {
  const double tiny = 1e-300;
  for (int it = 0; it < iterations; ++it) {
    Matrix ratio = X.array() / (W * H.transpose()).array().max(tiny);
    Vector h_sum = H.colwise().sum().transpose();
    W = (W.array() * (ratio * H).array()).rowwise() / h_sum.transpose().array();
    ratio = X.array() / (W * H.transpose()).array().max(tiny);
    Vector w_sum = W.colwise().sum().transpose();
    H = (H.array() * (ratio.transpose() * W).array()).rowwise() / w_sum.transpose().array();
  }
  return {W, H, kl(X, W * H.transpose())};
}

/// KL loadings of a single row on frozen (H, b) by multiplicative updates:
/// w_k <- w_k * sum_j H_jk x_j / xhat_j / sum_j H_jk.
inline Vector kl_row_multiplicative(const Vector& x, const Matrix& H, const Vector& b, int iterations) {
  Vector w = Vector::Ones(H.cols());
  const Vector h_sum = H.colwise().sum().transpose();
  for (int it = 0; it < iterations; ++it) {
    const Vector xhat = H * w + b;
    const Vector ratio = (x.array() > 0.0).select(x.array() / xhat.array(), 0.0);
    w = w.array() * (H.transpose() * ratio).array() / h_sum.array();
  }
  return w;
}

/// Max-weight matching by trying every permutation (R <= 8 or so).
inline double best_permutation_mean(const Matrix& S) {
  std::vector<int> perm(static_cast<std::size_t>(S.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < S.rows(); ++i) total += S(i, perm[static_cast<std::size_t>(i)]);
    best = std::max(best, total / static_cast<double>(S.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Dense random collection with entries drawn from [lo, hi].
inline Collection random_collection(std::mt19937_64& rng, Index n, const std::vector<Index>& widths,
                                    const std::vector<Divergence>& kinds, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution coin(0.5);
  Collection c;
  auto labels = std::make_shared<Labels>();
  for (Index i = 0; i < n; ++i) labels->push_back("r" + std::to_string(i));
  c.patient_labels = labels;
  for (std::size_t v = 0; v < widths.size(); ++v) {
    SourceMatrix s;
    s.name = "s" + std::to_string(v);
    s.n_rows = n;
    s.n_cols = widths[v];
    s.divergence = kinds[v];
    s.row_labels = labels;
    for (Index j = 0; j < widths[v]; ++j) s.col_labels.push_back(s.name + "_" + std::to_string(j));
    for (Index j = 0; j < widths[v]; ++j)
      for (Index i = 0; i < n; ++i) {
        const double value = kinds[v] == Divergence::logistic ? (coin(rng) ? 1.0 : 0.0) : u(rng);
        if (value != 0.0) s.entries.push_back({i, j, value});
      }
    c.sources.push_back(std::move(s));
  }
  return c;
}

/// Collection holding the given dense matrices, zeros left unstored.
inline Collection dense_collection(const std::vector<Matrix>& X, const std::vector<Divergence>& kinds) {
  Collection c;
  auto labels = std::make_shared<Labels>();
  const Index n = X.empty() ? 0 : X.front().rows();
  for (Index i = 0; i < n; ++i) labels->push_back("r" + std::to_string(i));
  c.patient_labels = labels;
  for (std::size_t v = 0; v < X.size(); ++v) {
    SourceMatrix s;
    s.name = "s" + std::to_string(v);
    s.n_rows = n;
    s.n_cols = X[v].cols();
    s.divergence = kinds[v];
    s.row_labels = labels;
    for (Index j = 0; j < X[v].cols(); ++j) {
      s.col_labels.push_back(s.name + "_" + std::to_string(j));
      for (Index i = 0; i < n; ++i) {
        if (X[v](i, j) != 0.0) s.entries.push_back({i, j, X[v](i, j)});
      }
    }
    c.sources.push_back(std::move(s));
  }
  return c;
}

}  // namespace sicnmf::oracle
