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
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sicnmf/core_model.hpp"
#include "sicnmf/divergences.hpp"
#include "sicnmf/error.hpp"
#include "sicnmf/projections.hpp"
#include "sicnmf/solver.hpp"

namespace sicnmf {

struct WeightedEntity {
  std::string label;
  double weight = 0.0;
};

/// One latent dimension read as a phenotype: a ranked entity list per source.
struct Phenotype {
  std::vector<std::vector<WeightedEntity>> per_source;
};

struct PhenotypeSet {
  int rank = 0;
  std::vector<std::string> source_names;
  std::vector<Phenotype> per_phenotype;
  std::optional<std::size_t> truncation_k;
  double zero_threshold = 1e-4;
};

/// Ranks the entities of every H_v column by weight (descending, ties by
/// entity index) and keeps the top k when k is given.
inline PhenotypeSet extract_phenotypes(const FactorModel& m, std::span<const Labels> labels,
                                       std::optional<std::size_t> k = std::nullopt) {
  if (labels.size() != m.H.size()) {
    throw Error(ErrorCategory::shape, "need one label list per source");
  }
  PhenotypeSet set;
  set.rank = m.rank;
  set.truncation_k = k;
  for (std::size_t v = 0; v < m.sources.size(); ++v) set.source_names.push_back(m.sources[v].name);
  for (std::size_t v = 0; v < m.H.size(); ++v) {
    if (static_cast<Index>(labels[v].size()) != m.H[v].rows()) {
      throw Error(ErrorCategory::shape, "label count differs from H rows for source " + std::to_string(v));
    }
  }
  for (Index r = 0; r < m.rank; ++r) {
    Phenotype ph;
    for (std::size_t v = 0; v < m.H.size(); ++v) {
      const auto col = m.H[v].col(r);
      std::vector<Index> order(static_cast<std::size_t>(col.size()));
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return col(a) > col(b); });
      const std::size_t keep = k ? std::min(*k, order.size()) : order.size();
      std::vector<WeightedEntity> list;
      list.reserve(keep);
      for (std::size_t i = 0; i < keep; ++i) {
        const Index e = order[i];
        list.push_back({labels[v][static_cast<std::size_t>(e)], col(e)});
      }
      ph.per_source.push_back(std::move(list));
    }
    set.per_phenotype.push_back(std::move(ph));
  }
  return set;
}

struct SparsityProfile {
  std::vector<int> per_phenotype_nnz;
  double median_nnz = 0.0;
  std::vector<std::vector<int>> per_source_nnz;  // [source][phenotype]
  double zero_threshold = 1e-4;
};

inline double median_of(std::vector<int> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Non-zero counts (entries strictly above zero_threshold) of the phenotype
/// columns concatenated across sources.
inline SparsityProfile sparsity_profile(const FactorModel& m, double zero_threshold = 1e-4) {
  SparsityProfile p;
  p.zero_threshold = zero_threshold;
  p.per_phenotype_nnz.assign(static_cast<std::size_t>(m.rank), 0);
  for (const Matrix& H : m.H) {
    std::vector<int> counts(static_cast<std::size_t>(m.rank), 0);
    for (Index k = 0; k < m.rank; ++k) {
      counts[static_cast<std::size_t>(k)] = static_cast<int>((H.col(k).array() > zero_threshold).count());
      p.per_phenotype_nnz[static_cast<std::size_t>(k)] += counts[static_cast<std::size_t>(k)];
    }
    p.per_source_nnz.push_back(std::move(counts));
  }
  p.median_nnz = median_of(p.per_phenotype_nnz);
  return p;
}

struct TransformOptions {
  int max_iter = 2000;
  double tol = 1e-10;          // relative projected-gradient norm
  bool rescale_budget = true;  // eta * sqrt(n_new / n_train) in sicnmf mode
};

struct TransformResult {
  Matrix loadings;
  double objective = 0.0;
  double eta = 0.0;
};

namespace detail {

inline void check_transform_inputs(const Collection& c, const FactorModel& m) {
  if (c.size() != m.H.size()) throw Error(ErrorCategory::shape, "new rows have a different number of sources");
  for (std::size_t v = 0; v < c.size(); ++v) {
    const SourceMatrix& s = c.sources[v];
    if (s.n_cols != m.H[v].rows()) {
      throw Error(ErrorCategory::shape, "source '" + s.name + "' has " + std::to_string(s.n_cols) +
                                            " columns, model expects " + std::to_string(m.H[v].rows()));
    }
    if (v < m.sources.size() && m.sources[v].divergence != s.divergence) {
      throw Error(ErrorCategory::validation, "source '" + s.name + "' uses a different divergence than the model");
    }
  }
}

// Row-wise constant start matching each row's excess mass over the bias.
inline Matrix transform_start(const DenseProblem& p, const FactorModel& m) {
  double h_mass = 0.0;
  for (const Matrix& H : m.H) h_mass += H.sum();
  Vector excess = Vector::Zero(p.n_patients);
  for (std::size_t v = 0; v < p.size(); ++v) {
    excess += p.X[v].rowwise().sum() - Vector::Constant(p.n_patients, m.b[v].sum());
  }
  Matrix W(p.n_patients, m.rank);
  for (Index i = 0; i < p.n_patients; ++i) {
    const double c = h_mass > 0.0 ? std::max(excess(i), 0.0) / h_mass : 0.0;
    W.row(i).setConstant(c);
  }
  return W;
}

inline Matrix solve_loadings(const DenseProblem& p, const FactorModel& frozen, double eta,
                             const SolverConfig& cfg, const TransformOptions& opts) {
  FactorModel work = frozen;
  work.W = project_nonneg_ball(transform_start(p, frozen), eta);
  BlockControl ctl{opts.max_iter, opts.tol, cfg.line_search};
  BlockState state{cfg.line_search.initial_step, -1.0};
  update_W(p, work, eta, ctl, state);
  return work.W;
}

}  // namespace detail

/// Loadings of new rows on frozen (H_v, b_v, alpha): the W-only problem.
/// cnmf mode solves each row independently; sicnmf mode solves the batch under
/// the shared Frobenius budget.
inline TransformResult transform(const Collection& new_rows, const FactorModel& m, const SolverConfig& cfg,
                                 const TransformOptions& opts = {}) {
  require_valid(new_rows);
  detail::check_transform_inputs(new_rows, m);
  DenseProblem p(new_rows, cfg.epsilon);
  const Index n = p.n_patients;

  FactorModel frozen = m;
  TransformResult result;
  if (m.mode == Mode::sicnmf && std::isfinite(m.eta)) {
    const double n_train = static_cast<double>(std::max<Index>(m.W.rows(), 1));
    result.eta = opts.rescale_budget ? m.eta * std::sqrt(static_cast<double>(n) / n_train) : m.eta;
    frozen.W = Matrix::Zero(n, m.rank);
    result.loadings = n > 0 ? detail::solve_loadings(p, frozen, result.eta, cfg, opts) : Matrix(0, m.rank);
  } else {
    result.eta = std::numeric_limits<double>::infinity();
    result.loadings = Matrix::Zero(n, m.rank);
    frozen.W = Matrix::Zero(1, m.rank);
    // Rows are independent; each worker takes every threads-th row.
    auto solve_rows = [&](Index first, Index stride) {
      DenseProblem row;
      row.spec = p.spec;
      row.n_patients = 1;
      row.X.resize(p.size());
      for (Index i = first; i < n; i += stride) {
        for (std::size_t v = 0; v < p.size(); ++v) row.X[v] = p.X[v].row(i);
        result.loadings.row(i) = detail::solve_loadings(row, frozen, result.eta, cfg, opts);
      }
    };
    const Index threads = std::min<Index>(resolve_threads(cfg.threads), std::max<Index>(n, 1));
    if (threads <= 1) {
      solve_rows(0, 1);
    } else {
      std::vector<std::thread> pool;
      std::exception_ptr failure;
      std::mutex failure_mutex;
      for (Index t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            solve_rows(t, threads);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }
  }
  frozen.W = result.loadings;
  result.objective = n > 0 ? objective(p, frozen) : 0.0;
  return result;
}

// ---- feature table --------------------------------------------------------

inline std::string format_double(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline void export_features(std::ostream& os, const Matrix& loadings, const Labels& patient_labels) {
  if (static_cast<Index>(patient_labels.size()) != loadings.rows()) {
    throw Error(ErrorCategory::shape, "one label per loading row required");
  }
  os << "patient";
  for (Index k = 0; k < loadings.cols(); ++k) os << "\tp" << (k + 1);
  os << '\n';
  for (Index i = 0; i < loadings.rows(); ++i) {
    os << patient_labels[static_cast<std::size_t>(i)];
    for (Index k = 0; k < loadings.cols(); ++k) os << '\t' << format_double(loadings(i, k));
    os << '\n';
  }
}

struct FeatureTable {
  Labels patients;
  Matrix loadings;
};

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::parse, "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

inline FeatureTable read_features(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCategory::parse, "feature table is empty");
  const auto header = split_tabs(line);
  if (header.empty() || header[0] != "patient") throw Error(ErrorCategory::parse, "line 1: bad feature header");
  const Index R = static_cast<Index>(header.size()) - 1;
  FeatureTable t;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (static_cast<Index>(fields.size()) != R + 1) {
      throw Error(ErrorCategory::parse, "line " + std::to_string(line_no) + ": expected " +
                                            std::to_string(R + 1) + " fields");
    }
    t.patients.push_back(fields[0]);
    std::vector<double> row;
    for (Index k = 0; k < R; ++k) row.push_back(parse_double(fields[static_cast<std::size_t>(k + 1)], line_no));
    rows.push_back(std::move(row));
  }
  t.loadings.resize(static_cast<Index>(rows.size()), R);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index k = 0; k < R; ++k) t.loadings(static_cast<Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return t;
}

// ---- phenotype export -------------------------------------------------------
//
//   phenotype<TAB>1
//   source<TAB>diagnosis
//   <label><TAB><weight, 6 significant digits>
//   ...
//   <blank line between phenotypes>

inline void export_phenotypes(std::ostream& os, const PhenotypeSet& set) {
  for (std::size_t r = 0; r < set.per_phenotype.size(); ++r) {
    if (r > 0) os << '\n';
    os << "phenotype\t" << (r + 1) << '\n';
    const Phenotype& ph = set.per_phenotype[r];
    for (std::size_t v = 0; v < ph.per_source.size(); ++v) {
      os << "source\t" << (v < set.source_names.size() ? set.source_names[v] : std::to_string(v)) << '\n';
      for (const WeightedEntity& e : ph.per_source[v]) os << e.label << '\t' << format_double(e.weight, 6) << '\n';
    }
  }
}

inline PhenotypeSet read_phenotypes(std::istream& is) {
  PhenotypeSet set;
  std::string line;
  std::size_t line_no = 0;
  Phenotype* current = nullptr;
  std::size_t source_idx = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) throw Error(ErrorCategory::parse, "line " + std::to_string(line_no) + ": expected 2 fields");
    if (fields[0] == "phenotype") {
      set.per_phenotype.emplace_back();
      current = &set.per_phenotype.back();
      source_idx = 0;
    } else if (fields[0] == "source") {
      if (!current) throw Error(ErrorCategory::parse, "line " + std::to_string(line_no) + ": source before phenotype");
      if (set.per_phenotype.size() == 1) set.source_names.push_back(fields[1]);
      current->per_source.emplace_back();
      source_idx = current->per_source.size();
    } else {
      if (!current || source_idx == 0) {
        throw Error(ErrorCategory::parse, "line " + std::to_string(line_no) + ": entity outside a source block");
      }
      current->per_source.back().push_back({fields[0], parse_double(fields[1], line_no)});
    }
  }
  set.rank = static_cast<int>(set.per_phenotype.size());
  return set;
}

}  // namespace sicnmf
