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
#include "sicnmf/core_model.hpp"

namespace sicnmf {
namespace {

Collection two_sources() {
  std::mt19937_64 rng(3);
  return oracle::random_collection(rng, 4, {3, 2}, {Divergence::generalized_kl, Divergence::squared}, 0.5, 2.0);
}

TEST(ValidateCollection, WellFormedHasNoViolations) {
  EXPECT_TRUE(validate_collection(two_sources()).empty());
}

TEST(ValidateCollection, NegativeCountIsReported) {
  Collection c = two_sources();
  c.sources[0].entries.push_back({0, 0, -1.0});
  c.sources[0].entries.erase(c.sources[0].entries.begin());  // keep (0,0) unique
  const auto v = validate_collection(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].source, "s0");
  EXPECT_EQ(v[0].rule, "non_negative");
  EXPECT_NE(v[0].detail.find("-1"), std::string::npos);
}

TEST(ValidateCollection, RowCountMismatch) {
  Collection c = two_sources();
  auto labels = std::make_shared<Labels>();
  for (int i = 0; i < 12; ++i) labels->push_back("p" + std::to_string(i));
  c.patient_labels = labels;
  c.sources.resize(1);
  c.sources[0].n_rows = 10;
  c.sources[0].entries.clear();
  const auto v = validate_collection(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "row_count");
}

TEST(ValidateCollection, DuplicatesRangeAndBinaryRules) {
  Collection c = two_sources();
  c.sources[1].entries.push_back(c.sources[1].entries.front());
  c.sources[0].entries.push_back({9, 0, 1.0});
  auto v = validate_collection(c);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].rule, "index_range");
  EXPECT_EQ(v[1].rule, "duplicate_entry");

  Collection logistic = two_sources();
  logistic.sources[1].divergence = Divergence::logistic;
  v = validate_collection(logistic);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "binary_values");
}

TEST(ValidateCollection, SquaredAllowsNegativeValues) {
  Collection c = two_sources();
  c.sources[1].entries.front().value = -4.0;
  EXPECT_TRUE(validate_collection(c).empty());
}

TEST(ModelEstimate, ZeroLoadingsGiveBias) {
  FactorModel m;
  m.rank = 2;
  m.W = Matrix::Zero(3, 2);
  m.H = {Matrix::Ones(4, 2)};
  m.b = {Vector::Constant(4, 2.5)};
  m.alpha = Vector::Ones(1);
  EXPECT_TRUE(model_estimate(m, 0).isApprox(Matrix::Constant(3, 4, 2.5)));
}

TEST(ModelEstimate, HandMultiplication) {
  FactorModel m;
  m.rank = 1;
  m.W = (Matrix(2, 1) << 1, 2).finished();
  m.H = {Matrix::Constant(1, 1, 3.0)};
  m.b = {Vector::Zero(1)};
  m.alpha = Vector::Ones(1);
  const Matrix est = model_estimate(m, 0);
  EXPECT_EQ(est(0, 0), 3.0);
  EXPECT_EQ(est(1, 0), 6.0);
}

TEST(ModelEstimate, ZeroFactorsGiveZero) {
  FactorModel m;
  m.rank = 2;
  m.W = Matrix::Random(5, 2).cwiseAbs();
  m.H = {Matrix::Zero(3, 2)};
  m.b = {Vector::Zero(3)};
  EXPECT_TRUE(model_estimate(m, 0).isZero(0.0));
}

TEST(ModelEstimate, ShapeMismatchThrows) {
  FactorModel m;
  m.rank = 2;
  m.W = Matrix::Zero(3, 2);
  m.H = {Matrix::Zero(4, 3)};
  m.b = {Vector::Zero(4)};
  EXPECT_THROW(model_estimate(m, 0), Error);
  EXPECT_THROW(model_estimate(m, 1), Error);
}

// Linear in W: estimate(W1 + W2) = estimate(W1) + estimate(W2) - 1 b^T.
TEST(ModelEstimate, LinearInLoadings) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    FactorModel m1, m2, sum;
    const Matrix H = Matrix::NullaryExpr(5, 3, [&] { return u(rng); });
    const Vector b = Vector::NullaryExpr(5, [&] { return u(rng); });
    for (FactorModel* m : {&m1, &m2, &sum}) {
      m->rank = 3;
      m->H = {H};
      m->b = {b};
    }
    m1.W = Matrix::NullaryExpr(4, 3, [&] { return u(rng); });
    m2.W = Matrix::NullaryExpr(4, 3, [&] { return u(rng); });
    sum.W = m1.W + m2.W;
    Matrix bias = Matrix::Zero(4, 5);
    bias.rowwise() += b.transpose();
    const Matrix expected = model_estimate(m1, 0) + model_estimate(m2, 0) - bias;
    EXPECT_LT((model_estimate(sum, 0) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CheckModel, FlagsSimplexAndBallBreaches) {
  FactorModel m;
  m.rank = 1;
  m.mode = Mode::sicnmf;
  m.eta = 1.0;
  m.W = Matrix::Constant(2, 1, 0.5);
  m.H = {(Matrix(2, 1) << 0.25, 0.75).finished()};
  m.b = {Vector::Zero(2)};
  m.alpha = Vector::Ones(1);
  EXPECT_FALSE(check_model(m).has_value());
  m.H[0](0, 0) = 0.3;
  EXPECT_TRUE(check_model(m).has_value());
  m.H[0](0, 0) = 0.25;
  m.W *= 4.0;
  EXPECT_TRUE(check_model(m).has_value());
}

}  // namespace
}  // namespace sicnmf
