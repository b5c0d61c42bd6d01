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
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sicnmf/error.hpp"

namespace sicnmf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<std::string>;
using SharedLabels = std::shared_ptr<const Labels>;

enum class Divergence { generalized_kl, squared, logistic };

enum class Mode { cnmf, sicnmf };

enum class Weighting { uniform, independent_fit };

inline std::string to_string(Divergence d) {
  switch (d) {
    case Divergence::generalized_kl: return "generalized_kl";
    case Divergence::squared: return "squared";
    case Divergence::logistic: return "logistic";
  }
  return "?";
}

inline std::string to_string(Mode m) { return m == Mode::cnmf ? "cnmf" : "sicnmf"; }

inline std::string to_string(Weighting w) {
  return w == Weighting::uniform ? "uniform" : "independent_fit";
}

inline Divergence parse_divergence(const std::string& s) {
  if (s == "generalized_kl" || s == "kl") return Divergence::generalized_kl;
  if (s == "squared") return Divergence::squared;
  if (s == "logistic") return Divergence::logistic;
  throw Error(ErrorCategory::parse, "unknown divergence '" + s + "'");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "cnmf") return Mode::cnmf;
  if (s == "sicnmf") return Mode::sicnmf;
  throw Error(ErrorCategory::parse, "unknown mode '" + s + "'");
}

inline Weighting parse_weighting(const std::string& s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "independent_fit") return Weighting::independent_fit;
  throw Error(ErrorCategory::parse, "unknown weighting '" + s + "'");
}

struct Entry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

/// One patient-by-entity data matrix. Entries absent from the list are zeros.
struct SourceMatrix {
  std::string name;
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Entry> entries;
  Divergence divergence = Divergence::generalized_kl;
  Labels col_labels;
  SharedLabels row_labels;

  Matrix to_dense() const {
    Matrix dense = Matrix::Zero(n_rows, n_cols);
    for (const Entry& e : entries) dense(e.row, e.col) += e.value;
    return dense;
  }
};

/// V sources joined on a shared patient index.
struct Collection {
  std::vector<SourceMatrix> sources;
  SharedLabels patient_labels;

  Index n_patients() const {
    return patient_labels ? static_cast<Index>(patient_labels->size()) : 0;
  }
  std::size_t size() const { return sources.size(); }
};

struct Violation {
  std::string source;  // empty for collection-level breaches
  std::string rule;
  std::string detail;
};

namespace detail {

inline std::string describe_entry(const Entry& e) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << e.row << ", " << e.col << ") = " << e.value;
  return os.str();
}

inline void validate_source(const SourceMatrix& s, Index n_patients,
                            std::vector<Violation>& out) {
  if (s.n_rows != n_patients) {
    out.push_back({s.name, "row_count",
                   "n_rows = " + std::to_string(s.n_rows) + " but collection has " +
                       std::to_string(n_patients) + " patients"});
  }
  if (static_cast<Index>(s.col_labels.size()) != s.n_cols) {
    out.push_back({s.name, "col_labels",
                   std::to_string(s.col_labels.size()) + " labels for " +
                       std::to_string(s.n_cols) + " columns"});
  }
  std::optional<Entry> bad_range, bad_finite, bad_domain, duplicate;
  std::set<std::pair<Index, Index>> seen;
  for (const Entry& e : s.entries) {
    if (e.row < 0 || e.row >= s.n_rows || e.col < 0 || e.col >= s.n_cols) {
      if (!bad_range) bad_range = e;
      continue;
    }
    if (!std::isfinite(e.value)) {
      if (!bad_finite) bad_finite = e;
    } else if (s.divergence == Divergence::generalized_kl && e.value < 0.0) {
      if (!bad_domain) bad_domain = e;
    } else if (s.divergence == Divergence::logistic && e.value != 0.0 && e.value != 1.0) {
      if (!bad_domain) bad_domain = e;
    }
    if (!seen.emplace(e.row, e.col).second && !duplicate) duplicate = e;
  }
  if (bad_range) out.push_back({s.name, "index_range", describe_entry(*bad_range)});
  if (bad_finite) out.push_back({s.name, "finite", describe_entry(*bad_finite)});
  if (bad_domain) {
    out.push_back({s.name,
                   s.divergence == Divergence::logistic ? "binary_values" : "non_negative",
                   describe_entry(*bad_domain)});
  }
  if (duplicate) out.push_back({s.name, "duplicate_entry", describe_entry(*duplicate)});
}

}  // namespace detail

/// Checks every structural and datatype invariant. Violations are returned,
/// never thrown.
inline std::vector<Violation> validate_collection(const Collection& c) {
  std::vector<Violation> out;
  if (c.sources.empty()) out.push_back({"", "source_count", "collection has no sources"});
  std::set<std::string> names;
  for (const SourceMatrix& s : c.sources) {
    if (!names.insert(s.name).second) out.push_back({s.name, "unique_name", "duplicate source name"});
    detail::validate_source(s, c.n_patients(), out);
  }
  return out;
}

inline void require_valid(const Collection& c) {
  auto violations = validate_collection(c);
  if (violations.empty()) return;
  const Violation& v = violations.front();
  throw Error(ErrorCategory::validation,
              (v.source.empty() ? std::string("collection") : "source '" + v.source + "'") +
                  ": " + v.rule + ": " + v.detail);
}

struct SourceInfo {
  std::string name;
  Divergence divergence = Divergence::generalized_kl;
};

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
};

/// Factorization estimate X_v ~ W H_v^T + 1 b_v^T for every source v.
struct FactorModel {
  Matrix W;
  std::vector<Matrix> H;
  std::vector<Vector> b;
  Vector alpha;
  double eta = std::numeric_limits<double>::infinity();
  int rank = 0;
  Mode mode = Mode::sicnmf;
  std::vector<SourceInfo> sources;
  std::vector<TracePoint> objective_trace;

  std::size_t n_sources() const { return H.size(); }
};

/// W H_v^T + 1 b_v^T as a dense matrix.
inline Matrix model_estimate(const FactorModel& m, std::size_t v) {
  if (v >= m.H.size() || v >= m.b.size()) {
    throw Error(ErrorCategory::shape, "source index " + std::to_string(v) + " out of range");
  }
  const Matrix& H = m.H[v];
  const Vector& b = m.b[v];
  if (m.W.cols() != H.cols() || H.rows() != b.size()) {
    throw Error(ErrorCategory::shape, "factor shapes disagree for source " + std::to_string(v));
  }
  Matrix est = m.W * H.transpose();
  est.rowwise() += b.transpose();
  return est;
}

/// Structural checks on a fitted or loaded model; returns a description of
/// the first breach, or nothing.
inline std::optional<std::string> check_model(const FactorModel& m, double simplex_tol = 1e-10) {
  if (m.H.size() != m.b.size() || static_cast<Index>(m.H.size()) != m.alpha.size()) {
    return "source count mismatch between H, b and alpha";
  }
  if (m.W.cols() != m.rank) return "W has wrong column count";
  if ((m.W.array() < 0.0).any()) return "W has negative entries";
  for (std::size_t v = 0; v < m.H.size(); ++v) {
    if (m.H[v].cols() != m.rank) return "H[" + std::to_string(v) + "] has wrong column count";
    if (m.H[v].rows() != m.b[v].size()) return "b[" + std::to_string(v) + "] has wrong length";
    if ((m.H[v].array() < 0.0).any()) return "H[" + std::to_string(v) + "] has negative entries";
    if ((m.b[v].array() < 0.0).any()) return "b[" + std::to_string(v) + "] has negative entries";
    if (m.mode == Mode::sicnmf) {
      for (Index k = 0; k < m.rank; ++k) {
        if (std::abs(m.H[v].col(k).sum() - 1.0) > simplex_tol) {
          return "H[" + std::to_string(v) + "] column " + std::to_string(k) + " off the simplex";
        }
      }
    }
  }
  if (m.mode == Mode::sicnmf && m.W.norm() > m.eta * (1.0 + 1e-12)) return "W outside the Frobenius ball";
  if ((m.alpha.array() <= 0.0).any()) return "non-positive alpha";
  return std::nullopt;
}

}  // namespace sicnmf
