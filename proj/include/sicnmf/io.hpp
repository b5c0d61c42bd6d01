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

// On-disk formats.
//
// Manifest (JSON):
//   { "format": "triplet_tsv" | "matrix_market",
//     "patients": "patients.txt",
//     "sources": [ { "name": "diagnosis", "matrix": "diagnosis.tsv",
//                    "divergence": "generalized_kl", "columns": "diagnosis_labels.txt" } ] }
// Relative paths resolve against the manifest's directory. Label files hold
// one label per line.
//
// Triplet TSV rows are "row_label<TAB>col_label<TAB>value"; repeated pairs are
// summed. MatrixMarket files are "coordinate real|integer|pattern general"
// with 1-based indices into the label files.
//
// Model archive (directory):
//   VERSION          format tag
//   model.json       mode, rank, eta, sources, patient count
//   config.json      solver configuration snapshot
//   alpha.tsv        source<TAB>alpha
//   W.tsv            patient<TAB>p1..pR
//   H_<source>.tsv   entity<TAB>p1..pR
//   b_<source>.tsv   entity<TAB>bias
//   trace.tsv        iteration<TAB>objective
// Numbers are written with 17 significant digits so a reload is bit-exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sicnmf/core_model.hpp"
#include "sicnmf/error.hpp"
#include "sicnmf/phenotype.hpp"
#include "sicnmf/solver.hpp"

namespace sicnmf {

namespace fs = std::filesystem;

inline constexpr const char* kArchiveVersion = "sicnmf-archive/1";

enum class MatrixFormat { triplet_tsv, matrix_market };

inline std::string to_string(MatrixFormat f) {
  return f == MatrixFormat::triplet_tsv ? "triplet_tsv" : "matrix_market";
}

inline MatrixFormat parse_format(const std::string& s) {
  if (s == "triplet_tsv") return MatrixFormat::triplet_tsv;
  if (s == "matrix_market") return MatrixFormat::matrix_market;
  throw Error(ErrorCategory::parse, "unknown matrix format '" + s + "'");
}

struct SourceDescriptor {
  std::string name;
  fs::path matrix;
  Divergence divergence = Divergence::generalized_kl;
  fs::path columns;
};

struct SourceManifest {
  std::vector<SourceDescriptor> sources;
  fs::path patients;
  MatrixFormat format = MatrixFormat::triplet_tsv;
};

// ---- small file helpers -----------------------------------------------------

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path.string() + "'");
  return in;
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error(ErrorCategory::io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot rename into '" + path.string() + "': " + ec.message());
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

inline bool is_safe_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && name != "." && name != "..";
}

inline Labels read_labels(const fs::path& path) {
  std::ifstream in = open_input(path);
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.find('\t') != std::string::npos) {
      throw Error(ErrorCategory::parse, path.string() + ":" + std::to_string(line_no) + ": label contains a tab");
    }
    labels.push_back(line);
  }
  return labels;
}

inline std::string format_labels(const Labels& labels) {
  std::string out;
  for (const std::string& l : labels) out += l + '\n';
  return out;
}

inline std::unordered_map<std::string, Index> index_labels(const Labels& labels, const fs::path& origin) {
  std::unordered_map<std::string, Index> index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!index.emplace(labels[i], static_cast<Index>(i)).second) {
      throw Error(ErrorCategory::validation, origin.string() + ": duplicate label '" + labels[i] + "'");
    }
  }
  return index;
}

// ---- manifest ---------------------------------------------------------------

inline SourceManifest read_manifest(const fs::path& path) {
  std::ifstream in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  SourceManifest m;
  try {
    m.format = parse_format(j.value("format", std::string("triplet_tsv")));
    m.patients = resolve(j.at("patients").get<std::string>());
    for (const auto& s : j.at("sources")) {
      SourceDescriptor d;
      d.name = s.at("name").get<std::string>();
      d.matrix = resolve(s.at("matrix").get<std::string>());
      d.divergence = parse_divergence(s.value("divergence", std::string("generalized_kl")));
      d.columns = resolve(s.at("columns").get<std::string>());
      m.sources.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, path.string() + ": " + e.what());
  }
  std::vector<std::string> names;
  for (const auto& d : m.sources) {
    if (!is_safe_name(d.name)) throw Error(ErrorCategory::validation, "source name '" + d.name + "' is not file-safe");
    if (std::find(names.begin(), names.end(), d.name) != names.end()) {
      throw Error(ErrorCategory::validation, "duplicate source name '" + d.name + "'");
    }
    if (d.matrix.empty() || d.columns.empty()) throw Error(ErrorCategory::validation, "empty path for '" + d.name + "'");
    names.push_back(d.name);
  }
  if (m.sources.empty()) throw Error(ErrorCategory::validation, path.string() + ": manifest lists no sources");
  return m;
}

// ---- matrices ---------------------------------------------------------------

namespace detail {

inline void check_value_domain(Divergence d, double value, const std::string& where) {
  if (!std::isfinite(value)) throw Error(ErrorCategory::validation, where + ": non-finite value");
  if (d == Divergence::generalized_kl && value < 0.0) {
    throw Error(ErrorCategory::validation, where + ": negative value " + format_double(value) + " under generalized_kl");
  }
  if (d == Divergence::logistic && value != 0.0 && value != 1.0) {
    throw Error(ErrorCategory::validation, where + ": logistic source requires values in {0, 1}");
  }
}

// Sums repeated (row, col) pairs and drops exact zeros; result sorted
// column-major.
inline std::vector<Entry> merge_entries(std::map<std::pair<Index, Index>, double>& acc) {
  std::vector<Entry> out;
  out.reserve(acc.size());
  for (const auto& [key, value] : acc) {
    if (value != 0.0) out.push_back({key.second, key.first, value});
  }
  return out;
}

inline std::vector<Entry> read_triplets(const fs::path& path, Divergence div,
                                        const std::unordered_map<std::string, Index>& rows,
                                        const std::unordered_map<std::string, Index>& cols) {
  std::ifstream in = open_input(path);
  std::map<std::pair<Index, Index>, double> acc;  // keyed (col, row)
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 3) throw Error(ErrorCategory::parse, where + ": expected 3 tab-separated fields");
    const auto r = rows.find(fields[0]);
    if (r == rows.end()) throw Error(ErrorCategory::validation, where + ": unknown row label '" + fields[0] + "'");
    const auto c = cols.find(fields[1]);
    if (c == cols.end()) throw Error(ErrorCategory::validation, where + ": unknown column label '" + fields[1] + "'");
    double value = 0.0;
    try {
      value = parse_double(fields[2], line_no);
    } catch (const Error&) {
      throw Error(ErrorCategory::parse, where + ": bad value '" + fields[2] + "'");
    }
    check_value_domain(div, value, where);
    acc[{c->second, r->second}] += value;
  }
  return merge_entries(acc);
}

inline std::vector<Entry> read_matrix_market(const fs::path& path, Divergence div, Index n_rows, Index n_cols) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCategory::parse, path.string() + ": empty MatrixMarket file");
  ++line_no;
  std::istringstream banner(line);
  std::string tag, object, layout, field, symmetry;
  banner >> tag >> object >> layout >> field >> symmetry;
  std::transform(field.begin(), field.end(), field.begin(), ::tolower);
  if (tag != "%%MatrixMarket" || object != "matrix" || layout != "coordinate" ||
      (field != "real" && field != "integer" && field != "pattern") || symmetry != "general") {
    throw Error(ErrorCategory::parse, path.string() + ":1: unsupported MatrixMarket banner");
  }
  const bool pattern = field == "pattern";
  bool have_size = false;
  long long rows = 0, cols = 0, nnz = 0, seen = 0;
  std::map<std::pair<Index, Index>, double> acc;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    if (!have_size) {
      if (!(ls >> rows >> cols >> nnz)) throw Error(ErrorCategory::parse, where + ": bad size line");
      if (rows != n_rows || cols != n_cols) {
        throw Error(ErrorCategory::validation, where + ": matrix is " + std::to_string(rows) + "x" +
                                                   std::to_string(cols) + " but labels give " +
                                                   std::to_string(n_rows) + "x" + std::to_string(n_cols));
      }
      have_size = true;
      continue;
    }
    long long i = 0, j = 0;
    double value = 1.0;
    if (!(ls >> i >> j) || (!pattern && !(ls >> value))) throw Error(ErrorCategory::parse, where + ": bad entry");
    if (i < 1 || i > rows || j < 1 || j > cols) throw Error(ErrorCategory::validation, where + ": index out of range");
    check_value_domain(div, value, where);
    acc[{static_cast<Index>(j - 1), static_cast<Index>(i - 1)}] += value;
    ++seen;
  }
  if (!have_size) throw Error(ErrorCategory::parse, path.string() + ": missing size line");
  if (seen != nnz) {
    throw Error(ErrorCategory::parse, path.string() + ": header promises " + std::to_string(nnz) +
                                          " entries, found " + std::to_string(seen));
  }
  return merge_entries(acc);
}

}  // namespace detail

/// Loads and validates every source listed in the manifest.
inline Collection read_collection(const SourceManifest& manifest) {
  Collection c;
  auto patients = std::make_shared<Labels>(read_labels(manifest.patients));
  c.patient_labels = patients;
  const auto row_index = index_labels(*patients, manifest.patients);
  for (const SourceDescriptor& d : manifest.sources) {
    SourceMatrix s;
    s.name = d.name;
    s.divergence = d.divergence;
    s.col_labels = read_labels(d.columns);
    s.n_rows = static_cast<Index>(patients->size());
    s.n_cols = static_cast<Index>(s.col_labels.size());
    s.row_labels = patients;
    const auto col_index = index_labels(s.col_labels, d.columns);
    s.entries = manifest.format == MatrixFormat::triplet_tsv
                    ? detail::read_triplets(d.matrix, d.divergence, row_index, col_index)
                    : detail::read_matrix_market(d.matrix, d.divergence, s.n_rows, s.n_cols);
    c.sources.push_back(std::move(s));
  }
  require_valid(c);
  return c;
}

inline Collection read_collection(const fs::path& manifest_path) {
  return read_collection(read_manifest(manifest_path));
}

inline std::string format_triplets(const SourceMatrix& s) {
  const Labels& rows = *s.row_labels;
  std::string out;
  for (const Entry& e : s.entries) {
    out += rows[static_cast<std::size_t>(e.row)] + '\t' + s.col_labels[static_cast<std::size_t>(e.col)] + '\t' +
           format_double(e.value) + '\n';
  }
  return out;
}

inline std::string format_matrix_market(const SourceMatrix& s) {
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  out += std::to_string(s.n_rows) + ' ' + std::to_string(s.n_cols) + ' ' + std::to_string(s.entries.size()) + '\n';
  for (const Entry& e : s.entries) {
    out += std::to_string(e.row + 1) + ' ' + std::to_string(e.col + 1) + ' ' + format_double(e.value) + '\n';
  }
  return out;
}

/// Writes labels, matrices and a manifest.json into `dir`; returns the
/// manifest path.
inline fs::path write_collection(const fs::path& dir, const Collection& c,
                                 MatrixFormat format = MatrixFormat::triplet_tsv) {
  require_valid(c);
  ensure_directory(dir);
  nlohmann::ordered_json j;
  j["format"] = to_string(format);
  j["patients"] = "patients.txt";
  j["sources"] = nlohmann::ordered_json::array();
  write_file_atomic(dir / "patients.txt", format_labels(*c.patient_labels));
  for (const SourceMatrix& s : c.sources) {
    if (!is_safe_name(s.name)) throw Error(ErrorCategory::validation, "source name '" + s.name + "' is not file-safe");
    SourceMatrix named = s;
    if (!named.row_labels) named.row_labels = c.patient_labels;
    const std::string matrix = s.name + (format == MatrixFormat::triplet_tsv ? ".tsv" : ".mtx");
    const std::string columns = s.name + "_labels.txt";
    write_file_atomic(dir / matrix, format == MatrixFormat::triplet_tsv ? format_triplets(named)
                                                                        : format_matrix_market(named));
    write_file_atomic(dir / columns, format_labels(s.col_labels));
    j["sources"].push_back({{"name", s.name},
                            {"matrix", matrix},
                            {"divergence", to_string(s.divergence)},
                            {"columns", columns}});
  }
  const fs::path manifest = dir / "manifest.json";
  write_file_atomic(manifest, j.dump(2) + '\n');
  return manifest;
}

/// Drops patients whose row is empty in at least one source.
inline Collection drop_empty_rows(const Collection& c) {
  const Index n = c.n_patients();
  std::vector<bool> keep(static_cast<std::size_t>(n), true);
  for (const SourceMatrix& s : c.sources) {
    std::vector<bool> present(static_cast<std::size_t>(n), false);
    for (const Entry& e : s.entries)
      if (e.value != 0.0) present[static_cast<std::size_t>(e.row)] = true;
    for (Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = keep[static_cast<std::size_t>(i)] && present[static_cast<std::size_t>(i)];
  }
  std::vector<Index> remap(static_cast<std::size_t>(n), -1);
  auto labels = std::make_shared<Labels>();
  for (Index i = 0; i < n; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    remap[static_cast<std::size_t>(i)] = static_cast<Index>(labels->size());
    labels->push_back((*c.patient_labels)[static_cast<std::size_t>(i)]);
  }
  Collection out;
  out.patient_labels = labels;
  for (const SourceMatrix& s : c.sources) {
    SourceMatrix t = s;
    t.n_rows = static_cast<Index>(labels->size());
    t.row_labels = labels;
    t.entries.clear();
    for (const Entry& e : s.entries) {
      const Index r = remap[static_cast<std::size_t>(e.row)];
      if (r >= 0) t.entries.push_back({r, e.col, e.value});
    }
    out.sources.push_back(std::move(t));
  }
  return out;
}

/// Entity-by-entity co-occurrence counts: entry (i, j) is the number of
/// patients with a positive value for column i of `a` and column j of `b`.
inline SourceMatrix aggregate_cooccurrence(const SourceMatrix& a, const SourceMatrix& b) {
  if (a.n_rows != b.n_rows) throw Error(ErrorCategory::shape, "sources do not share a patient row set");
  if (a.row_labels && b.row_labels && a.row_labels != b.row_labels && *a.row_labels != *b.row_labels) {
    throw Error(ErrorCategory::shape, "sources have different patient labels");
  }
  const auto n = static_cast<std::size_t>(a.n_rows);
  std::vector<std::vector<Index>> a_cols(n), b_cols(n);
  for (const Entry& e : a.entries)
    if (e.value > 0.0) a_cols[static_cast<std::size_t>(e.row)].push_back(e.col);
  for (const Entry& e : b.entries)
    if (e.value > 0.0) b_cols[static_cast<std::size_t>(e.row)].push_back(e.col);

  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(a.n_cols, b.n_cols);
  for (std::size_t p = 0; p < n; ++p) {
    auto& ai = a_cols[p];
    auto& bj = b_cols[p];
    std::sort(ai.begin(), ai.end());
    ai.erase(std::unique(ai.begin(), ai.end()), ai.end());
    std::sort(bj.begin(), bj.end());
    bj.erase(std::unique(bj.begin(), bj.end()), bj.end());
    for (Index i : ai)
      for (Index j : bj) ++counts(i, j);
  }

  SourceMatrix out;
  out.name = a.name + "_x_" + b.name;
  out.n_rows = a.n_cols;
  out.n_cols = b.n_cols;
  out.divergence = Divergence::generalized_kl;
  out.row_labels = std::make_shared<Labels>(a.col_labels);
  out.col_labels = b.col_labels;
  for (Index j = 0; j < counts.cols(); ++j)
    for (Index i = 0; i < counts.rows(); ++i)
      if (counts(i, j) > 0) out.entries.push_back({i, j, static_cast<double>(counts(i, j))});
  return out;
}

/// Single-source collection whose rows are the aggregated matrix's rows.
inline Collection as_collection(const SourceMatrix& s) {
  Collection c;
  c.patient_labels = s.row_labels;
  c.sources.push_back(s);
  return c;
}

// ---- model archive ----------------------------------------------------------

struct ModelArchive {
  FactorModel model;
  SolverConfig config;
  Labels patient_labels;
  std::vector<Labels> col_labels;
};

inline nlohmann::ordered_json eta_to_json(double eta) {
  if (std::isinf(eta)) return "inf";
  return eta;
}

inline double eta_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorCategory::parse, "bad eta value");
  }
  return j.get<double>();
}

inline nlohmann::ordered_json config_to_json(const SolverConfig& c) {
  nlohmann::ordered_json j;
  j["rank"] = c.rank;
  j["mode"] = to_string(c.mode);
  j["eta"] = eta_to_json(c.eta);
  j["weighting"] = to_string(c.weighting);
  j["restarts"] = c.restarts;
  j["max_outer"] = c.max_outer;
  j["outer_tol"] = c.outer_tol;
  j["max_inner"] = c.max_inner;
  j["inner_tol"] = c.inner_tol;
  j["line_search"] = {{"beta", c.line_search.beta},
                      {"sigma", c.line_search.sigma},
                      {"initial_step", c.line_search.initial_step},
                      {"max_trials", c.line_search.max_trials}};
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["update_bias"] = c.update_bias;
  return j;
}

inline SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig c;
  c.rank = j.at("rank").get<int>();
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.eta = eta_from_json(j.at("eta"));
  c.weighting = parse_weighting(j.at("weighting").get<std::string>());
  c.restarts = j.at("restarts").get<int>();
  c.max_outer = j.at("max_outer").get<int>();
  c.outer_tol = j.at("outer_tol").get<double>();
  c.max_inner = j.at("max_inner").get<int>();
  c.inner_tol = j.at("inner_tol").get<double>();
  const auto& ls = j.at("line_search");
  c.line_search = {ls.at("beta").get<double>(), ls.at("sigma").get<double>(), ls.at("initial_step").get<double>(),
                   ls.at("max_trials").get<int>()};
  c.epsilon = j.at("epsilon").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.update_bias = j.at("update_bias").get<bool>();
  return c;
}

namespace detail {

inline std::string format_table(const std::string& key, const std::vector<std::string>& columns, const Labels& rows,
                                const Matrix& values) {
  std::string out = key;
  for (const auto& c : columns) out += '\t' + c;
  out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    out += rows[static_cast<std::size_t>(i)];
    for (Index k = 0; k < values.cols(); ++k) out += '\t' + format_double(values(i, k));
    out += '\n';
  }
  return out;
}

inline std::vector<std::string> factor_columns(int rank) {
  std::vector<std::string> cols;
  for (int k = 1; k <= rank; ++k) cols.push_back("p" + std::to_string(k));
  return cols;
}

inline std::pair<Labels, Matrix> read_table(const fs::path& path, Index expected_cols, Index expected_rows) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCategory::parse, path.string() + ": empty table");
  if (static_cast<Index>(split_tabs(line).size()) != expected_cols + 1) {
    throw Error(ErrorCategory::shape, path.string() + ": header has wrong column count");
  }
  Labels labels;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (static_cast<Index>(fields.size()) != expected_cols + 1) {
      throw Error(ErrorCategory::shape, path.string() + ":" + std::to_string(line_no) + ": wrong field count");
    }
    labels.push_back(fields[0]);
    for (Index k = 0; k < expected_cols; ++k) values.push_back(parse_double(fields[static_cast<std::size_t>(k + 1)], line_no));
  }
  if (static_cast<Index>(labels.size()) != expected_rows) {
    throw Error(ErrorCategory::shape, path.string() + ": expected " + std::to_string(expected_rows) + " rows, found " +
                                          std::to_string(labels.size()));
  }
  Matrix M(expected_rows, expected_cols);
  for (Index i = 0; i < expected_rows; ++i)
    for (Index k = 0; k < expected_cols; ++k) M(i, k) = values[static_cast<std::size_t>(i * expected_cols + k)];
  return {std::move(labels), std::move(M)};
}

}  // namespace detail

inline void write_model(const fs::path& dir, const ModelArchive& a) {
  const FactorModel& m = a.model;
  if (auto problem = check_model(m, 1e-8)) throw Error(ErrorCategory::validation, "refusing to archive: " + *problem);
  if (a.col_labels.size() != m.H.size() || m.sources.size() != m.H.size()) {
    throw Error(ErrorCategory::shape, "archive needs names and labels for every source");
  }
  if (static_cast<Index>(a.patient_labels.size()) != m.W.rows()) {
    throw Error(ErrorCategory::shape, "archive needs one patient label per W row");
  }
  ensure_directory(dir);

  nlohmann::ordered_json meta;
  meta["format_version"] = kArchiveVersion;
  meta["mode"] = to_string(m.mode);
  meta["rank"] = m.rank;
  meta["eta"] = eta_to_json(m.eta);
  meta["n_patients"] = m.W.rows();
  meta["sources"] = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < m.H.size(); ++v) {
    if (!is_safe_name(m.sources[v].name)) {
      throw Error(ErrorCategory::validation, "source name '" + m.sources[v].name + "' is not file-safe");
    }
    meta["sources"].push_back({{"name", m.sources[v].name},
                               {"divergence", to_string(m.sources[v].divergence)},
                               {"n_cols", m.H[v].rows()}});
  }

  const auto cols = detail::factor_columns(m.rank);
  std::string alpha = "source\talpha\n";
  for (std::size_t v = 0; v < m.H.size(); ++v) {
    alpha += m.sources[v].name + '\t' + format_double(m.alpha(static_cast<Index>(v))) + '\n';
  }
  std::string trace = "iteration\tobjective\n";
  for (const TracePoint& t : m.objective_trace) trace += std::to_string(t.iteration) + '\t' + format_double(t.objective) + '\n';

  write_file_atomic(dir / "W.tsv", detail::format_table("patient", cols, a.patient_labels, m.W));
  for (std::size_t v = 0; v < m.H.size(); ++v) {
    const std::string& name = m.sources[v].name;
    write_file_atomic(dir / ("H_" + name + ".tsv"), detail::format_table("entity", cols, a.col_labels[v], m.H[v]));
    write_file_atomic(dir / ("b_" + name + ".tsv"), detail::format_table("entity", {"bias"}, a.col_labels[v], m.b[v]));
  }
  write_file_atomic(dir / "alpha.tsv", alpha);
  write_file_atomic(dir / "trace.tsv", trace);
  write_file_atomic(dir / "config.json", config_to_json(a.config).dump(2) + '\n');
  write_file_atomic(dir / "model.json", meta.dump(2) + '\n');
  write_file_atomic(dir / "VERSION", std::string(kArchiveVersion) + '\n');
}

inline ModelArchive read_model(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCategory::io, "'" + dir.string() + "' is not a model archive directory");
  {
    std::ifstream in = open_input(dir / "VERSION");
    std::string tag;
    std::getline(in, tag);
    if (tag != kArchiveVersion) {
      throw Error(ErrorCategory::version, "archive version '" + tag + "' is not " + kArchiveVersion);
    }
  }
  ModelArchive a;
  FactorModel& m = a.model;
  std::vector<Index> widths;
  try {
    std::ifstream in = open_input(dir / "model.json");
    const nlohmann::json meta = nlohmann::json::parse(in);
    if (meta.at("format_version").get<std::string>() != kArchiveVersion) {
      throw Error(ErrorCategory::version, "model.json has an unsupported format_version");
    }
    m.mode = parse_mode(meta.at("mode").get<std::string>());
    m.rank = meta.at("rank").get<int>();
    m.eta = eta_from_json(meta.at("eta"));
    for (const auto& s : meta.at("sources")) {
      m.sources.push_back({s.at("name").get<std::string>(), parse_divergence(s.at("divergence").get<std::string>())});
      widths.push_back(s.at("n_cols").get<Index>());
    }
    const Index n_patients = meta.at("n_patients").get<Index>();
    std::ifstream cin = open_input(dir / "config.json");
    a.config = config_from_json(nlohmann::json::parse(cin));
    auto [patients, W] = detail::read_table(dir / "W.tsv", m.rank, n_patients);
    a.patient_labels = std::move(patients);
    m.W = std::move(W);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, dir.string() + ": " + e.what());
  }

  for (std::size_t v = 0; v < m.sources.size(); ++v) {
    const std::string& name = m.sources[v].name;
    const fs::path h_path = dir / ("H_" + name + ".tsv");
    const fs::path b_path = dir / ("b_" + name + ".tsv");
    if (!fs::exists(h_path)) throw Error(ErrorCategory::io, "archive is missing the H table for source '" + name + "'");
    if (!fs::exists(b_path)) throw Error(ErrorCategory::io, "archive is missing the b table for source '" + name + "'");
    auto [labels, H] = detail::read_table(h_path, m.rank, widths[v]);
    auto [b_labels, b] = detail::read_table(b_path, 1, widths[v]);
    if (b_labels != labels) throw Error(ErrorCategory::shape, "H and b tables disagree on entities for '" + name + "'");
    a.col_labels.push_back(std::move(labels));
    m.H.push_back(std::move(H));
    m.b.push_back(b.col(0));
  }

  {
    std::ifstream in = open_input(dir / "alpha.tsv");
    std::string line;
    std::getline(in, line);
    std::vector<double> alpha;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_tabs(line);
      if (f.size() != 2 || alpha.size() >= m.sources.size() || f[0] != m.sources[alpha.size()].name) {
        throw Error(ErrorCategory::shape, "alpha.tsv:" + std::to_string(line_no) + ": unexpected row");
      }
      alpha.push_back(parse_double(f[1], line_no));
    }
    if (alpha.size() != m.sources.size()) throw Error(ErrorCategory::shape, "alpha.tsv has the wrong number of rows");
    m.alpha = Eigen::Map<Vector>(alpha.data(), static_cast<Index>(alpha.size()));
  }
  {
    std::ifstream in = open_input(dir / "trace.tsv");
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_tabs(line);
      if (f.size() != 2) throw Error(ErrorCategory::parse, "trace.tsv:" + std::to_string(line_no) + ": expected 2 fields");
      m.objective_trace.push_back({static_cast<int>(parse_double(f[0], line_no)), parse_double(f[1], line_no)});
    }
  }
  if (auto problem = check_model(m, 1e-8)) throw Error(ErrorCategory::validation, "archive is inconsistent: " + *problem);
  return a;
}

}  // namespace sicnmf
