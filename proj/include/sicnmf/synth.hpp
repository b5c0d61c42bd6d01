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

// Planted-model data: sparse simplex-column H_v, uniform W and b_v, and
// observations drawn around Lambda_v = W H_v^T + 1 b_v^T.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sicnmf/core_model.hpp"
#include "sicnmf/error.hpp"
#include "sicnmf/solver.hpp"

namespace sicnmf {

enum class Noise { none, poisson, gaussian };

struct SynthSource {
  std::string name;
  Index n_cols = 0;
  Index active = 0;  // nonzeros per H column
};

struct SynthSpec {
  Index n_patients = 0;
  std::vector<SynthSource> sources;
  int rank = 1;
  double loading_scale = 1.0;
  double bias_scale = 0.1;
  Noise noise = Noise::poisson;
  double gaussian_sigma = 1.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  Collection collection;
  FactorModel truth;
};

inline void validate_synth(const SynthSpec& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::config, what); };
  if (s.n_patients < 1) fail("n_patients must be >= 1");
  if (s.sources.empty()) fail("at least one source required");
  if (s.rank < 1) fail("rank must be >= 1");
  if (!(s.loading_scale > 0.0) || !(s.bias_scale > 0.0)) fail("scales must be positive");
  if (s.noise == Noise::gaussian && !(s.gaussian_sigma > 0.0)) fail("gaussian sigma must be positive");
  for (const SynthSource& src : s.sources) {
    if (src.n_cols < 1) fail("source '" + src.name + "' needs at least one column");
    if (src.active < 1 || src.active > src.n_cols) {
      fail("source '" + src.name + "': active entities must lie in [1, n_cols]");
    }
  }
}

inline std::string numbered_label(const std::string& prefix, Index i, Index n) {
  const std::string digits = std::to_string(i + 1);
  const std::size_t width = std::to_string(n).size();
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

/// Deterministic in spec.seed. Each source draws from its own derived stream.
inline SynthData generate(const SynthSpec& spec) {
  validate_synth(spec);
  const Index n = spec.n_patients;
  const Index R = spec.rank;
  SynthData out;

  auto patients = std::make_shared<Labels>();
  for (Index i = 0; i < n; ++i) patients->push_back(numbered_label("p", i, n));
  out.collection.patient_labels = patients;

  std::mt19937_64 w_rng(derive_seed(spec.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FactorModel& truth = out.truth;
  truth.rank = spec.rank;
  truth.mode = Mode::sicnmf;
  truth.W.resize(n, R);
  for (Index k = 0; k < R; ++k)
    for (Index i = 0; i < n; ++i) truth.W(i, k) = spec.loading_scale * unit(w_rng);
  truth.eta = truth.W.norm();
  truth.alpha = Vector::Ones(static_cast<Index>(spec.sources.size()));

  for (std::size_t v = 0; v < spec.sources.size(); ++v) {
    const SynthSource& src = spec.sources[v];
    std::mt19937_64 rng(derive_seed(spec.seed, v + 1));
    Matrix H = Matrix::Zero(src.n_cols, R);
    std::vector<Index> positions(static_cast<std::size_t>(src.n_cols));
    for (Index k = 0; k < R; ++k) {
      std::iota(positions.begin(), positions.end(), Index{0});
      std::shuffle(positions.begin(), positions.end(), rng);
      double total = 0.0;
      for (Index a = 0; a < src.active; ++a) {
        const double w = 1.0 - unit(rng);  // (0, 1]
        H(positions[static_cast<std::size_t>(a)], k) = w;
        total += w;
      }
      H.col(k) /= total;
    }
    Vector b(src.n_cols);
    for (Index j = 0; j < src.n_cols; ++j) b(j) = spec.bias_scale * unit(rng);

    Matrix lambda = truth.W * H.transpose();
    lambda.rowwise() += b.transpose();

    SourceMatrix s;
    s.name = src.name;
    s.n_rows = n;
    s.n_cols = src.n_cols;
    s.divergence = spec.noise == Noise::gaussian ? Divergence::squared : Divergence::generalized_kl;
    s.row_labels = patients;
    for (Index j = 0; j < src.n_cols; ++j) s.col_labels.push_back(numbered_label(src.name + "_", j, src.n_cols));

    std::normal_distribution<double> gauss(0.0, spec.gaussian_sigma);
    for (Index j = 0; j < src.n_cols; ++j) {
      for (Index i = 0; i < n; ++i) {
        double value = lambda(i, j);
        if (spec.noise == Noise::poisson) {
          std::poisson_distribution<long long> pois(lambda(i, j));
          value = static_cast<double>(pois(rng));
        } else if (spec.noise == Noise::gaussian) {
          value += gauss(rng);
        }
        if (value != 0.0) s.entries.push_back({i, j, value});
      }
    }
    truth.H.push_back(std::move(H));
    truth.b.push_back(std::move(b));
    truth.sources.push_back({s.name, s.divergence});
    out.collection.sources.push_back(std::move(s));
  }
  return out;
}

/// Maximum-weight perfect matching on a square score matrix (Hungarian
/// algorithm on cost = -score, O(n^3)). Returns assignment[row] = column.
inline std::vector<Index> max_weight_matching(const Matrix& score) {
  if (score.cols() != score.rows()) throw Error(ErrorCategory::shape, "matching needs a square matrix");
  const std::size_t n = static_cast<std::size_t>(score.rows());
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) {
    return -score(static_cast<Index>(i - 1), static_cast<Index>(j - 1));
  };
  // 1-based; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = static_cast<Index>(j - 1);
  return assignment;
}

/// Column k of every H_v stacked into one vector per latent dimension.
inline Matrix concatenated_factors(const FactorModel& m) {
  Index rows = 0;
  for (const Matrix& H : m.H) rows += H.rows();
  Matrix out(rows, m.rank);
  Index offset = 0;
  for (const Matrix& H : m.H) {
    out.middleRows(offset, H.rows()) = H;
    offset += H.rows();
  }
  return out;
}

/// R x R cosine similarities between concatenated factor columns. A zero
/// column has similarity 0 with everything.
inline Matrix cosine_similarity(const Matrix& A, const Matrix& B) {
  Matrix S(A.cols(), B.cols());
  for (Index i = 0; i < A.cols(); ++i) {
    for (Index j = 0; j < B.cols(); ++j) {
      const double denom = A.col(i).norm() * B.col(j).norm();
      S(i, j) = denom > 0.0 ? A.col(i).dot(B.col(j)) / denom : 0.0;
    }
  }
  return S;
}

/// Mean cosine similarity over the best one-to-one pairing of estimated and
/// true phenotypes.
inline double factor_match_score(const FactorModel& est, const FactorModel& truth) {
  if (est.rank != truth.rank) throw Error(ErrorCategory::shape, "factor_match_score needs equal ranks");
  if (est.H.size() != truth.H.size()) throw Error(ErrorCategory::shape, "factor_match_score needs equal sources");
  for (std::size_t v = 0; v < est.H.size(); ++v) {
    if (est.H[v].rows() != truth.H[v].rows()) throw Error(ErrorCategory::shape, "source widths differ");
  }
  const Matrix S = cosine_similarity(concatenated_factors(est), concatenated_factors(truth));
  const std::vector<Index> match = max_weight_matching(S);
  double total = 0.0;
  for (Index i = 0; i < S.rows(); ++i) total += S(i, match[static_cast<std::size_t>(i)]);
  return S.rows() > 0 ? total / static_cast<double>(S.rows()) : 0.0;
}

}  // namespace sicnmf
