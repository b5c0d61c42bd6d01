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

// Command-line front end.
//
//   sicnmf fit        MANIFEST --out DIR [--rank --mode --eta --weighted ...]
//   sicnmf weights    MANIFEST [--rank --seed ...]
//   sicnmf transform  MODEL MANIFEST --out FEATURES
//   sicnmf phenotypes MODEL [--top-k 5] [--out FILE]
//   sicnmf sparsity   MODEL... [--threshold 1e-4] [--detail]
//   sicnmf synth      --out DIR [--patients --source name:cols:active ...]
//   sicnmf aggregate  MANIFEST --a NAME --b NAME --out DIR
//
// Failures print one line "error: <category>: <message>" on stderr and exit
// with status 2 for usage errors, 1 otherwise. Worker threads come from
// SICNMF_NUM_THREADS.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "sicnmf/sicnmf.hpp"

namespace {

using namespace sicnmf;

struct FitOptions {
  std::string manifest;
  std::string out;
  SolverConfig cfg;
  std::string mode = "sicnmf";
  bool weighted = false;
  bool drop_empty = false;
};

void add_solver_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--rank", o.cfg.rank, "latent dimension R")->capture_default_str();
  cmd->add_option("--mode", o.mode, "sicnmf or cnmf")->capture_default_str();
  cmd->add_option("--eta", o.cfg.eta, "Frobenius budget on W (sicnmf)")->capture_default_str();
  cmd->add_option("--restarts", o.cfg.restarts, "random restarts")->capture_default_str();
  cmd->add_option("--seed", o.cfg.seed, "master seed")->capture_default_str();
  cmd->add_option("--max-outer", o.cfg.max_outer, "outer iteration cap")->capture_default_str();
  cmd->add_option("--max-inner", o.cfg.max_inner, "projected-gradient steps per block")->capture_default_str();
  cmd->add_option("--tol", o.cfg.outer_tol, "relative objective change to stop")->capture_default_str();
  cmd->add_flag("--drop-empty-rows", o.drop_empty, "drop patients with no entries in some source");
}

SolverConfig finish_config(const FitOptions& o) {
  SolverConfig cfg = o.cfg;
  cfg.mode = parse_mode(o.mode);
  cfg.weighting = o.weighted ? Weighting::independent_fit : Weighting::uniform;
  validate_config(cfg);
  return cfg;
}

Collection load(const FitOptions& o) {
  Collection c = read_collection(fs::path(o.manifest));
  if (o.drop_empty) {
    const Index before = c.n_patients();
    c = drop_empty_rows(c);
    std::cerr << "dropped " << (before - c.n_patients()) << " of " << before << " patients\n";
    if (c.n_patients() == 0) throw Error(ErrorCategory::validation, "no patients left after --drop-empty-rows");
  }
  return c;
}

std::vector<Labels> column_labels(const Collection& c) {
  std::vector<Labels> out;
  for (const SourceMatrix& s : c.sources) out.push_back(s.col_labels);
  return out;
}

std::string eta_text(double eta) { return std::isinf(eta) ? "inf" : format_double(eta); }

int run_fit(const FitOptions& o) {
  const SolverConfig cfg = finish_config(o);
  const Collection c = load(o);
  const FitResult r = fit(c, cfg);
  for (const std::string& w : r.weights.warnings) std::cerr << "warning: " << w << '\n';

  const fs::path out(o.out);
  write_model(out, {r.model, cfg, *c.patient_labels, column_labels(c)});

  nlohmann::ordered_json metrics;
  metrics["final_objective"] = r.model.objective_trace.back().objective;
  metrics["best_restart"] = r.best_restart;
  metrics["outer_iterations"] = r.restarts[r.best_restart].outer_iterations;
  metrics["restarts"] = nlohmann::ordered_json::array();
  for (const RestartSummary& s : r.restarts) {
    nlohmann::ordered_json j{{"seed", s.seed}, {"stop", to_string(s.reason)}, {"outer_iterations", s.outer_iterations}};
    j["final_objective"] =
        std::isfinite(s.final_objective) ? nlohmann::ordered_json(s.final_objective) : nlohmann::ordered_json();
    if (!s.error.empty()) j["error"] = s.error;
    metrics["restarts"].push_back(j);
  }
  metrics["sources"] = nlohmann::ordered_json::array();
  DenseProblem p(c, cfg.epsilon);
  for (std::size_t v = 0; v < c.size(); ++v) {
    metrics["sources"].push_back(
        {{"name", c.sources[v].name},
         {"alpha", r.model.alpha(static_cast<Index>(v))},
         {"divergence", div_value(p.spec[v], p.X[v], model_estimate(r.model, v))}});
  }
  const SparsityProfile sp = sparsity_profile(r.model);
  metrics["median_nnz"] = sp.median_nnz;
  metrics["patients"] = c.n_patients();
  write_file_atomic(out / "metrics.json", metrics.dump(2) + '\n');

  std::cout << "objective\t" << format_double(r.model.objective_trace.back().objective) << '\n'
            << "median_nnz\t" << format_double(sp.median_nnz) << '\n'
            << "archive\t" << out.string() << '\n';
  return 0;
}

int run_weights(const FitOptions& o) {
  FitOptions weighted = o;
  weighted.weighted = true;
  const SolverConfig cfg = finish_config(weighted);
  const Collection c = load(o);
  const SourceWeights w = compute_source_weights(c, cfg);
  for (const std::string& msg : w.warnings) std::cerr << "warning: " << msg << '\n';
  std::cout << "source\talpha\tindependent_divergence\n";
  for (std::size_t v = 0; v < c.size(); ++v) {
    const Index i = static_cast<Index>(v);
    std::cout << c.sources[v].name << '\t' << format_double(w.alpha(i)) << '\t'
              << format_double(w.independent_divergence(i)) << '\n';
  }
  return 0;
}

struct TransformCli {
  std::string model;
  std::string manifest;
  std::string out;
  TransformOptions opts;
  bool fixed_budget = false;
};

int run_transform(const TransformCli& t) {
  const ModelArchive a = read_model(fs::path(t.model));
  const Collection c = read_collection(fs::path(t.manifest));
  for (std::size_t v = 0; v < c.size() && v < a.col_labels.size(); ++v) {
    if (c.sources[v].col_labels != a.col_labels[v]) {
      throw Error(ErrorCategory::validation, "source '" + c.sources[v].name + "' columns differ from the model's");
    }
  }
  TransformOptions opts = t.opts;
  opts.rescale_budget = !t.fixed_budget;
  const TransformResult r = transform(c, a.model, a.config, opts);
  std::ostringstream table;
  export_features(table, r.loadings, *c.patient_labels);
  write_file_atomic(fs::path(t.out), table.str());
  std::cout << "objective\t" << format_double(r.objective) << '\n'
            << "eta\t" << eta_text(r.eta) << '\n'
            << "patients\t" << c.n_patients() << '\n';
  return 0;
}

int run_phenotypes(const std::string& model, std::size_t top_k, const std::string& out) {
  const ModelArchive a = read_model(fs::path(model));
  const PhenotypeSet set = extract_phenotypes(a.model, a.col_labels, top_k > 0 ? std::optional(top_k) : std::nullopt);
  std::ostringstream os;
  export_phenotypes(os, set);
  if (out.empty()) {
    std::cout << os.str();
  } else {
    write_file_atomic(fs::path(out), os.str());
  }
  return 0;
}

double quartile(std::vector<int> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int run_sparsity(const std::vector<std::string>& models, double threshold, bool detail) {
  if (detail) {
    std::cout << "archive\tphenotype\tsource\tnnz\n";
  } else {
    std::cout << "archive\teta\tmedian_nnz\tq1_nnz\tq3_nnz\tobjective\n";
  }
  for (const std::string& path : models) {
    const ModelArchive a = read_model(fs::path(path));
    const SparsityProfile p = sparsity_profile(a.model, threshold);
    if (detail) {
      for (std::size_t k = 0; k < p.per_phenotype_nnz.size(); ++k) {
        for (std::size_t v = 0; v < p.per_source_nnz.size(); ++v) {
          std::cout << path << '\t' << (k + 1) << '\t' << a.model.sources[v].name << '\t' << p.per_source_nnz[v][k]
                    << '\n';
        }
        std::cout << path << '\t' << (k + 1) << "\tall\t" << p.per_phenotype_nnz[k] << '\n';
      }
    } else {
      const double objective = a.model.objective_trace.empty() ? std::nan("") : a.model.objective_trace.back().objective;
      std::cout << path << '\t' << eta_text(a.model.eta) << '\t' << format_double(p.median_nnz) << '\t'
                << format_double(quartile(p.per_phenotype_nnz, 0.25)) << '\t'
                << format_double(quartile(p.per_phenotype_nnz, 0.75)) << '\t' << format_double(objective) << '\n';
    }
  }
  return 0;
}

struct SynthCli {
  std::string out;
  SynthSpec spec;
  std::vector<std::string> sources{"diagnosis:80:6", "medication:40:6"};
  std::string noise = "poisson";
  std::string format = "triplet_tsv";
};

SynthSource parse_source(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  auto bad = [&] { return Error(ErrorCategory::usage, "--source expects name:columns:active, got '" + text + "'"); };
  if (parts.size() != 3) throw bad();
  try {
    return {parts[0], std::stoll(parts[1]), std::stoll(parts[2])};
  } catch (const std::exception&) {
    throw bad();
  }
}

int run_synth(const SynthCli& s) {
  SynthSpec spec = s.spec;
  spec.sources.clear();
  for (const std::string& text : s.sources) spec.sources.push_back(parse_source(text));
  if (s.noise == "poisson") {
    spec.noise = Noise::poisson;
  } else if (s.noise == "gaussian") {
    spec.noise = Noise::gaussian;
  } else if (s.noise == "none") {
    spec.noise = Noise::none;
  } else {
    throw Error(ErrorCategory::usage, "unknown noise model '" + s.noise + "'");
  }
  SynthData d = generate(spec);
  const fs::path out(s.out);
  const fs::path manifest = write_collection(out, d.collection, parse_format(s.format));

  d.truth.sources.clear();
  for (const SourceMatrix& src : d.collection.sources) d.truth.sources.push_back({src.name, src.divergence});
  d.truth.objective_trace = {{0, objective(d.collection, d.truth)}};
  SolverConfig cfg;
  cfg.rank = spec.rank;
  cfg.eta = d.truth.eta;
  cfg.seed = spec.seed;
  write_model(out / "truth", {d.truth, cfg, *d.collection.patient_labels, column_labels(d.collection)});
  std::cout << "manifest\t" << manifest.string() << '\n' << "truth\t" << (out / "truth").string() << '\n';
  return 0;
}

int run_aggregate(const std::string& manifest, const std::string& a, const std::string& b, const std::string& out) {
  const Collection c = read_collection(fs::path(manifest));
  auto find = [&](const std::string& name) -> const SourceMatrix& {
    for (const SourceMatrix& s : c.sources)
      if (s.name == name) return s;
    throw Error(ErrorCategory::usage, "manifest has no source named '" + name + "'");
  };
  const SourceMatrix agg = aggregate_cooccurrence(find(a), find(b));
  const fs::path path = write_collection(fs::path(out), as_collection(agg));
  std::cout << "manifest\t" << path.string() << '\n'
            << "shape\t" << agg.n_rows << 'x' << agg.n_cols << '\n'
            << "nonzeros\t" << agg.entries.size() << '\n';
  return 0;
}

int fail(const std::string& category, const std::string& message, int status) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "error: " << category << ": " << line << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse collective non-negative matrix factorization"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and write an archive");
  fit_cmd->add_option("manifest", fit_opts.manifest, "source manifest (JSON)")->required();
  fit_cmd->add_option("--out", fit_opts.out, "archive directory")->required();
  fit_cmd->add_flag("--weighted,!--unweighted", fit_opts.weighted, "weight sources by independent fits (default off)");
  add_solver_options(fit_cmd, fit_opts);

  FitOptions weight_opts;
  auto* weights_cmd = app.add_subcommand("weights", "print per-source weights from independent fits");
  weights_cmd->add_option("manifest", weight_opts.manifest, "source manifest (JSON)")->required();
  add_solver_options(weights_cmd, weight_opts);

  TransformCli tr;
  auto* transform_cmd = app.add_subcommand("transform", "project new patients onto a fitted model");
  transform_cmd->add_option("model", tr.model, "archive directory")->required();
  transform_cmd->add_option("manifest", tr.manifest, "manifest of the new patients")->required();
  transform_cmd->add_option("--out", tr.out, "feature table to write")->required();
  transform_cmd->add_option("--max-iter", tr.opts.max_iter, "projected-gradient step cap")->capture_default_str();
  transform_cmd->add_option("--tol", tr.opts.tol, "relative projected-gradient tolerance")->capture_default_str();
  transform_cmd->add_flag("--fixed-budget", tr.fixed_budget, "keep the training eta instead of rescaling it");

  std::string ph_model, ph_out;
  std::size_t top_k = 5;
  auto* phenotypes_cmd = app.add_subcommand("phenotypes", "list the top entities of every phenotype");
  phenotypes_cmd->add_option("model", ph_model, "archive directory")->required();
  phenotypes_cmd->add_option("--top-k", top_k, "entities per source (0 keeps all)")->capture_default_str();
  phenotypes_cmd->add_option("--out", ph_out, "output file (default stdout)");

  std::vector<std::string> sp_models;
  double threshold = 1e-4;
  bool detail = false;
  auto* sparsity_cmd = app.add_subcommand("sparsity", "nonzero counts of phenotype columns");
  sparsity_cmd->add_option("models", sp_models, "archive directories")->required();
  sparsity_cmd->add_option("--threshold", threshold, "entries above this count as nonzero")->capture_default_str();
  sparsity_cmd->add_flag("--detail", detail, "one row per phenotype and source");

  SynthCli sy;
  sy.spec.n_patients = 300;
  sy.spec.rank = 5;
  sy.spec.loading_scale = 10.0;
  sy.spec.bias_scale = 0.05;
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-model dataset");
  synth_cmd->add_option("--out", sy.out, "dataset directory")->required();
  synth_cmd->add_option("--patients", sy.spec.n_patients, "number of patients")->capture_default_str();
  synth_cmd->add_option("--source", sy.sources, "name:columns:active, repeatable")->capture_default_str();
  synth_cmd->add_option("--rank", sy.spec.rank, "planted rank")->capture_default_str();
  synth_cmd->add_option("--loading-scale", sy.spec.loading_scale, "W ~ U(0, scale)")->capture_default_str();
  synth_cmd->add_option("--bias-scale", sy.spec.bias_scale, "b ~ U(0, scale)")->capture_default_str();
  synth_cmd->add_option("--noise", sy.noise, "poisson, gaussian or none")->capture_default_str();
  synth_cmd->add_option("--sigma", sy.spec.gaussian_sigma, "gaussian noise level")->capture_default_str();
  synth_cmd->add_option("--seed", sy.spec.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--format", sy.format, "triplet_tsv or matrix_market")->capture_default_str();

  std::string ag_manifest, ag_a, ag_b, ag_out;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "entity-by-entity co-occurrence counts of two sources");
  aggregate_cmd->add_option("manifest", ag_manifest, "source manifest (JSON)")->required();
  aggregate_cmd->add_option("--a", ag_a, "row source")->required();
  aggregate_cmd->add_option("--b", ag_b, "column source")->required();
  aggregate_cmd->add_option("--out", ag_out, "output dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*fit_cmd) return run_fit(fit_opts);
    if (*weights_cmd) return run_weights(weight_opts);
    if (*transform_cmd) return run_transform(tr);
    if (*phenotypes_cmd) return run_phenotypes(ph_model, top_k, ph_out);
    if (*sparsity_cmd) return run_sparsity(sp_models, threshold, detail);
    if (*synth_cmd) return run_synth(sy);
    if (*aggregate_cmd) return run_aggregate(ag_manifest, ag_a, ag_b, ag_out);
  } catch (const Error& e) {
    return fail(std::string(category_name(e.category())), e.what(), e.category() == ErrorCategory::usage ? 2 : 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
