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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sicnmf/synth.hpp"

namespace sicnmf {
namespace {

SynthSpec base_spec() {
  SynthSpec spec;
  spec.n_patients = 25;
  spec.sources = {{"dx", 12, 4}, {"rx", 7, 2}};
  spec.rank = 3;
  spec.loading_scale = 5.0;
  spec.seed = 17;
  return spec;
}

TEST(Generate, NoiseFreeDataIsExact) {
  SynthSpec spec = base_spec();
  spec.noise = Noise::none;
  const SynthData d = generate(spec);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_NEAR(div_value({Divergence::generalized_kl}, d.collection.sources[v].to_dense(), model_estimate(d.truth, v)),
                0.0, 1e-12);
  }
}

TEST(Generate, ColumnsHaveExactSupportAndUnitMass) {
  const SynthData d = generate(base_spec());
  const Index active[] = {4, 2};
  for (std::size_t v = 0; v < 2; ++v) {
    const Matrix& H = d.truth.H[v];
    for (Index k = 0; k < H.cols(); ++k) {
      EXPECT_EQ((H.col(k).array() > 0.0).count(), active[v]);
      EXPECT_NEAR(H.col(k).sum(), 1.0, 1e-12);
    }
  }
  EXPECT_GE(d.truth.W.minCoeff(), 0.0);
  EXPECT_LE(d.truth.W.maxCoeff(), 5.0);
  for (const Vector& b : d.truth.b) EXPECT_LE(b.maxCoeff(), 0.1);
  EXPECT_FALSE(check_model(d.truth, 1e-10).has_value());
}

TEST(Generate, FullActiveGivesDenseColumns) {
  SynthSpec spec = base_spec();
  spec.sources = {{"dx", 6, 6}};
  const SynthData d = generate(spec);
  EXPECT_GT(d.truth.H[0].minCoeff(), 0.0);
}

TEST(Generate, DeterministicInSeed) {
  const SynthData a = generate(base_spec());
  const SynthData b = generate(base_spec());
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& ea = a.collection.sources[v].entries;
    const auto& eb = b.collection.sources[v].entries;
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      EXPECT_EQ(ea[i].row, eb[i].row);
      EXPECT_EQ(ea[i].col, eb[i].col);
      EXPECT_EQ(ea[i].value, eb[i].value);
    }
  }
  SynthSpec other = base_spec();
  other.seed = 18;
  EXPECT_NE(generate(other).truth.W, a.truth.W);
}

TEST(Generate, PoissonCountsAreIntegers) {
  const SynthData d = generate(base_spec());
  EXPECT_TRUE(validate_collection(d.collection).empty());
  for (const SourceMatrix& s : d.collection.sources)
    for (const Entry& e : s.entries) EXPECT_EQ(e.value, std::round(e.value));
}

TEST(Generate, GaussianUsesSquaredLoss) {
  SynthSpec spec = base_spec();
  spec.noise = Noise::gaussian;
  spec.gaussian_sigma = 0.5;
  const SynthData d = generate(spec);
  for (const SourceMatrix& s : d.collection.sources) EXPECT_EQ(s.divergence, Divergence::squared);
}

TEST(Generate, RejectsInfeasibleSparsity) {
  SynthSpec spec = base_spec();
  spec.sources[1].active = 8;
  EXPECT_THROW(generate(spec), Error);
  spec = base_spec();
  spec.loading_scale = 0.0;
  EXPECT_THROW(generate(spec), Error);
}

TEST(Labels, ZeroPadded) {
  EXPECT_EQ(numbered_label("p", 0, 300), "p001");
  EXPECT_EQ(numbered_label("p", 299, 300), "p300");
  EXPECT_EQ(numbered_label("x_", 4, 9), "x_5");
}

TEST(MatchScore, IdentityIsOne) {
  const SynthData d = generate(base_spec());
  EXPECT_NEAR(factor_match_score(d.truth, d.truth), 1.0, 1e-12);
}

TEST(MatchScore, PermutationIsAbsorbed) {
  const SynthData d = generate(base_spec());
  FactorModel est = d.truth;
  for (Matrix& H : est.H) {
    Matrix P = H;
    P.col(0) = H.col(2);
    P.col(1) = H.col(0);
    P.col(2) = H.col(1);
    H = P;
  }
  EXPECT_NEAR(factor_match_score(est, d.truth), 1.0, 1e-12);
}

TEST(MatchScore, OrthogonalColumnHalvesScore) {
  FactorModel truth;
  truth.rank = 2;
  truth.H = {(Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished(), (Matrix(2, 2) << 0.0, 1.0, 0.0, 0.0).finished()};
  FactorModel est = truth;
  // column 1 moved onto an entity no true column touches
  est.H = {(Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished(), (Matrix(2, 2) << 0.0, 0.0, 0.0, 1.0).finished()};
  EXPECT_NEAR(factor_match_score(est, truth), 0.5, 1e-12);
}

TEST(MatchScore, ScaleInvariantAndSymmetric) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FactorModel a, b;
  a.rank = b.rank = 4;
  for (Index rows : {5, 3}) {
    Matrix A(rows, 4), B(rows, 4);
    for (Index i = 0; i < A.size(); ++i) {
      A.data()[i] = u(rng);
      B.data()[i] = u(rng);
    }
    a.H.push_back(A);
    b.H.push_back(B);
  }
  const double base = factor_match_score(a, b);
  FactorModel scaled = a;
  const double factors[] = {3.0, 0.1, 7.0, 1.5};
  for (Matrix& H : scaled.H)
    for (Index k = 0; k < 4; ++k) H.col(k) *= factors[k];
  EXPECT_NEAR(factor_match_score(scaled, b), base, 1e-12);
  EXPECT_NEAR(factor_match_score(b, a), base, 1e-12);
}

TEST(MatchScore, RankMismatchThrows) {
  FactorModel a, b;
  a.rank = 2;
  b.rank = 3;
  a.H = {Matrix::Ones(2, 2)};
  b.H = {Matrix::Ones(2, 3)};
  EXPECT_THROW(factor_match_score(a, b), Error);
}

TEST(Matching, HungarianMatchesBruteForce) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 7;
    Matrix S(n, n);
    for (Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng);
    const std::vector<Index> match = max_weight_matching(S);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Index j = match[static_cast<std::size_t>(i)];
      ASSERT_FALSE(used[static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = true;
      total += S(i, j);
    }
    EXPECT_NEAR(total / static_cast<double>(n), oracle::best_permutation_mean(S), 1e-12);
  }
}

}  // namespace
}  // namespace sicnmf
