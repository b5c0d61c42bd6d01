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

// Alternating projected-gradient solver for collective non-negative matrix
// factorization
//
//   min  sum_v alpha_v D_v(X_v, W H_v^T + 1 b_v^T)
//   s.t. W >= 0, H_v >= 0, b_v >= 0
//        (sicnmf only) ||W||_F <= eta, every column of H_v on the unit simplex
//
// Each outer iteration minimizes over W with (H_v, b_v) fixed, then over each
// (H_v, b_v) in input order with W fixed. Every block is a smooth convex
// problem over a convex set and is handled by projected gradient steps with a
// backtracking Armijo search.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sicnmf/core_model.hpp"
#include "sicnmf/divergences.hpp"
#include "sicnmf/error.hpp"
#include "sicnmf/projections.hpp"

namespace sicnmf {

struct LineSearch {
  double beta = 0.5;          // step shrink factor
  double sigma = 0.01;        // sufficient-decrease constant
  double initial_step = 1.0;
  int max_trials = 30;
};

struct SolverConfig {
  int rank = 20;
  Mode mode = Mode::sicnmf;
  double eta = 500.0;  // ignored in cnmf mode
  Weighting weighting = Weighting::uniform;
  int restarts = 5;
  int max_outer = 200;
  double outer_tol = 1e-6;  // relative objective change
  int max_inner = 50;
  // Inner stop: projected-gradient norm <= inner_tol * (that block's norm at
  // its first update in the restart).
  double inner_tol = 1e-4;
  LineSearch line_search;
  double epsilon = 1e-10;
  std::uint64_t seed = 0;
  bool update_bias = true;
  int threads = 0;  // 0: SICNMF_NUM_THREADS or 1
};

inline void validate_config(const SolverConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::config, what); };
  if (cfg.rank < 1) fail("rank must be >= 1");
  if (cfg.restarts < 1) fail("restarts must be >= 1");
  if (cfg.max_outer < 0) fail("max_outer must be >= 0");
  if (cfg.max_inner < 1) fail("max_inner must be >= 1");
  if (!(cfg.outer_tol >= 0.0)) fail("outer_tol must be >= 0");
  if (!(cfg.inner_tol >= 0.0)) fail("inner_tol must be >= 0");
  if (!(cfg.line_search.beta > 0.0 && cfg.line_search.beta < 1.0)) fail("beta must lie in (0, 1)");
  if (!(cfg.line_search.sigma > 0.0 && cfg.line_search.sigma < 1.0)) fail("sigma must lie in (0, 1)");
  if (!(cfg.line_search.initial_step > 0.0)) fail("initial step must be positive");
  if (cfg.line_search.max_trials < 1) fail("line search trial cap must be >= 1");
  if (!(cfg.epsilon > 0.0)) fail("epsilon must be positive");
  if (cfg.mode == Mode::sicnmf && !(cfg.eta > 0.0)) fail("eta must be positive");
}

inline double effective_eta(const SolverConfig& cfg) {
  return cfg.mode == Mode::sicnmf ? cfg.eta : std::numeric_limits<double>::infinity();
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SICNMF_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Deterministic child seed for an independent random stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Dense copy of a collection's data, the form every solver step works on.
struct DenseProblem {
  std::vector<Matrix> X;
  std::vector<DivergenceSpec> spec;
  Index n_patients = 0;

  DenseProblem() = default;
  DenseProblem(const Collection& c, double epsilon) : n_patients(c.n_patients()) {
    X.reserve(c.size());
    spec.reserve(c.size());
    for (const SourceMatrix& s : c.sources) {
      X.push_back(s.to_dense());
      spec.push_back({s.divergence, epsilon});
    }
  }
  std::size_t size() const { return X.size(); }
};

namespace detail {

inline void check_shapes(const DenseProblem& p, const FactorModel& m) {
  if (p.size() != m.H.size() || p.size() != m.b.size() ||
      static_cast<Index>(p.size()) != m.alpha.size()) {
    throw Error(ErrorCategory::shape, "model and collection disagree on the number of sources");
  }
  if (m.W.rows() != p.n_patients) throw Error(ErrorCategory::shape, "W row count differs from patient count");
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (m.H[v].rows() != p.X[v].cols() || m.b[v].size() != p.X[v].cols() || m.H[v].cols() != m.W.cols()) {
      throw Error(ErrorCategory::shape, "factor shapes disagree for source " + std::to_string(v));
    }
  }
}

inline Matrix estimate(const Matrix& W, const Matrix& H, const Vector& b) {
  Matrix est = W * H.transpose();
  est.rowwise() += b.transpose();
  return est;
}

inline double source_term(const DenseProblem& p, std::size_t v, double alpha, const Matrix& W,
                          const Matrix& H, const Vector& b) {
  return alpha * div_value(p.spec[v], p.X[v], estimate(W, H, b));
}

inline double total_objective(const DenseProblem& p, const Matrix& W, const FactorModel& m) {
  double total = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) total += source_term(p, v, m.alpha(v), W, m.H[v], m.b[v]);
  return total;
}

inline constexpr double kOutOfDomain = std::numeric_limits<double>::infinity();

// Block objective used by the line search: +inf once an estimate leaves the
// divergence's domain, so a step can never land on the epsilon clamp.
inline double guarded_term(const DenseProblem& p, std::size_t v, double alpha, const Matrix& Xhat) {
  if (!in_domain(p.spec[v], p.X[v], Xhat)) return kOutOfDomain;
  return alpha * div_value(p.spec[v], p.X[v], Xhat);
}

inline double guarded_objective(const DenseProblem& p, const Matrix& W, const FactorModel& m) {
  double total = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    total += guarded_term(p, v, m.alpha(v), estimate(W, m.H[v], m.b[v]));
    if (std::isinf(total)) break;
  }
  return total;
}

}  // namespace detail

inline double objective(const DenseProblem& p, const FactorModel& m) {
  detail::check_shapes(p, m);
  return detail::total_objective(p, m.W, m);
}

/// sum_v alpha_v D_v(X_v, W H_v^T + 1 b_v^T)
inline double objective(const Collection& c, const FactorModel& m, double epsilon = 1e-10) {
  return objective(DenseProblem(c, epsilon), m);
}

struct BlockGradient {
  Matrix grad_W;
  std::vector<Matrix> grad_H;
  std::vector<Vector> grad_b;
};

inline BlockGradient block_gradients(const DenseProblem& p, const FactorModel& m) {
  detail::check_shapes(p, m);
  BlockGradient g;
  g.grad_W = Matrix::Zero(m.W.rows(), m.W.cols());
  for (std::size_t v = 0; v < p.size(); ++v) {
    const Matrix G = m.alpha(v) * div_grad(p.spec[v], p.X[v], detail::estimate(m.W, m.H[v], m.b[v]));
    g.grad_W += G * m.H[v];
    g.grad_H.push_back(G.transpose() * m.W);
    g.grad_b.push_back(G.colwise().sum().transpose());
  }
  return g;
}

inline BlockGradient block_gradients(const Collection& c, const FactorModel& m, double epsilon = 1e-10) {
  return block_gradients(DenseProblem(c, epsilon), m);
}

struct LineSearchResult {
  double accepted_step = 0.0;
  int trial_count = 0;
  double new_objective = 0.0;
  bool accepted = false;
};

/// Per-block solver memory carried across outer iterations.
struct BlockState {
  double step = 1.0;
  double pg_reference = -1.0;  // projected-gradient norm at first visit
};

struct BlockReport {
  int steps = 0;
  bool stalled = false;
  double pg_norm = 0.0;
  double objective = 0.0;
};

struct BlockControl {
  int max_inner = 50;
  double inner_tol = 1e-4;
  LineSearch line_search;
};

/// Projected gradient descent on one block. `f` evaluates the block
/// objective, `grad` its gradient, `project` the Euclidean projection onto the
/// block's feasible set. The step starts from the last accepted one; if that
/// already satisfies the Armijo test it is grown by 1/beta while the test
/// keeps holding, otherwise it is shrunk by beta. A candidate is accepted only
/// if it also does not increase f, so the block objective never rises.
///
/// `column_scale`, when non-empty, divides the search direction column by
/// column (a diagonal metric). Projections that act on each column separately
/// remain exact under it.
template <class Objective, class Gradient, class Projection>
BlockReport minimize_block(Matrix& x, Objective&& f, Gradient&& grad, Projection&& project,
                           const BlockControl& ctl, BlockState& state, const Vector& column_scale = {}) {
  const LineSearch& ls = ctl.line_search;
  BlockReport report;
  double fx = f(x);
  report.objective = fx;

  auto attempt = [&](const Matrix& g, const Matrix& d, double step, Matrix& cand, double& fc) {
    cand = project(x - step * d);
    try {
      fc = f(cand);
    } catch (const Error&) {
      return false;
    }
    if (!std::isfinite(fc) || fc > fx) return false;
    const double decrease = (g.array() * (cand - x).array()).sum();
    return fc - fx <= ls.sigma * decrease;
  };

  for (int it = 0; it < ctl.max_inner; ++it) {
    const Matrix g = grad(x);
    const double pg = (x - project(x - g)).norm();
    if (state.pg_reference < 0.0) state.pg_reference = pg;
    report.pg_norm = pg;
    if (pg == 0.0 || pg <= ctl.inner_tol * state.pg_reference) break;

    Matrix d = g;
    if (column_scale.size() > 0) d.array().rowwise() /= column_scale.transpose().array();

    LineSearchResult ls_result;
    Matrix cand, best;
    double fc = 0.0, fbest = fx;
    double step = state.step;
    ls_result.trial_count = 1;
    if (attempt(g, d, step, cand, fc)) {
      best = cand;
      fbest = fc;
      ls_result.accepted = true;
      ls_result.accepted_step = step;
      while (ls_result.trial_count < ls.max_trials) {
        const double bigger = step / ls.beta;
        ++ls_result.trial_count;
        if (!attempt(g, d, bigger, cand, fc) || cand == best) break;
        step = bigger;
        best = cand;
        fbest = fc;
        ls_result.accepted_step = step;
      }
    } else {
      while (ls_result.trial_count < ls.max_trials) {
        step *= ls.beta;
        ++ls_result.trial_count;
        if (attempt(g, d, step, cand, fc)) {
          best = cand;
          fbest = fc;
          ls_result.accepted = true;
          ls_result.accepted_step = step;
          break;
        }
      }
    }
    if (!ls_result.accepted) {
      report.stalled = report.steps == 0;
      break;
    }
    ls_result.new_objective = fbest;
    state.step = ls_result.accepted_step;
    x = std::move(best);
    fx = fbest;
    ++report.steps;
  }
  report.objective = fx;
  return report;
}

inline BlockControl block_control(const SolverConfig& cfg) {
  return {cfg.max_inner, cfg.inner_tol, cfg.line_search};
}

/// W-step with (H_v, b_v, alpha) frozen: projected onto W >= 0 and, for a
/// finite eta, ||W||_F <= eta.
inline BlockReport update_W(const DenseProblem& p, FactorModel& m, double eta, const BlockControl& ctl,
                            BlockState& state) {
  detail::check_shapes(p, m);
  auto f = [&](const Matrix& W) { return detail::guarded_objective(p, W, m); };
  auto grad = [&](const Matrix& W) {
    Matrix g = Matrix::Zero(W.rows(), W.cols());
    for (std::size_t v = 0; v < p.size(); ++v) {
      g += m.alpha(v) * div_grad(p.spec[v], p.X[v], detail::estimate(W, m.H[v], m.b[v])) * m.H[v];
    }
    return g;
  };
  auto project = [eta](const Matrix& W) { return project_nonneg_ball(W, eta); };
  return minimize_block(m.W, f, grad, project, ctl, state);
}

/// Runs the W-step from a fresh solver state and returns the new W.
inline Matrix update_W(const Collection& c, const FactorModel& m, const SolverConfig& cfg) {
  validate_config(cfg);
  DenseProblem p(c, cfg.epsilon);
  FactorModel work = m;
  BlockState state{cfg.line_search.initial_step, -1.0};
  update_W(p, work, effective_eta(cfg), block_control(cfg), state);
  return work.W;
}

/// (H_v, b_v)-step with W frozen. The two are stacked as Z = [H_v | b_v] so
/// the estimate is [W 1] Z^T and a single step length serves both.
inline BlockReport update_H_b(const DenseProblem& p, FactorModel& m, std::size_t v, Mode mode,
                              bool update_bias, const BlockControl& ctl, BlockState& state) {
  detail::check_shapes(p, m);
  const Index n_v = m.H[v].rows();
  const Index R = m.H[v].cols();
  Matrix W_aug(m.W.rows(), R + 1);
  W_aug.leftCols(R) = m.W;
  W_aug.col(R).setOnes();
  Matrix Z(n_v, R + 1);
  Z.leftCols(R) = m.H[v];
  Z.col(R) = m.b[v];

  const double alpha = m.alpha(v);
  const Vector frozen_b = m.b[v];
  auto f = [&](const Matrix& z) { return detail::guarded_term(p, v, alpha, W_aug * z.transpose()); };
  auto grad = [&](const Matrix& z) {
    Matrix g = alpha * div_grad(p.spec[v], p.X[v], W_aug * z.transpose()).transpose() * W_aug;
    if (!update_bias) g.col(R).setZero();
    return g;
  };
  auto project = [&](const Matrix& z) {
    Matrix out = project_nonneg(z);
    if (mode == Mode::sicnmf) project_columns_simplex(out.leftCols(R), 1.0);
    if (!update_bias) out.col(R) = frozen_b;
    return out;
  };
  // Curvature along column k of Z grows with ||W_aug e_k||^2; loading columns
  // and the bias column differ by orders of magnitude.
  Vector scale = W_aug.colwise().squaredNorm().transpose();
  for (Index k = 0; k <= R; ++k) {
    if (!(scale(k) > 0.0)) scale(k) = 1.0;
  }
  scale /= scale.maxCoeff();
  BlockReport report = minimize_block(Z, f, grad, project, ctl, state, scale);
  m.H[v] = Z.leftCols(R);
  m.b[v] = update_bias ? Vector(Z.col(R)) : frozen_b;
  return report;
}

inline std::pair<Matrix, Vector> update_H_b(const Collection& c, const FactorModel& m, std::size_t v,
                                            const SolverConfig& cfg) {
  validate_config(cfg);
  DenseProblem p(c, cfg.epsilon);
  FactorModel work = m;
  BlockState state{cfg.line_search.initial_step, -1.0};
  update_H_b(p, work, v, cfg.mode, cfg.update_bias, block_control(cfg), state);
  return {work.H[v], work.b[v]};
}

/// Feasible random start for one restart: W ~ U(0,1) projected onto the
/// W-constraint set, H_v columns ~ U(0,1) projected onto the simplex (or the
/// orthant in cnmf mode), b_v at the column means of X_v floored at epsilon.
inline FactorModel initialize_model(const DenseProblem& p, const SolverConfig& cfg, const Vector& alpha,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) M(i, j) = unit(rng);
    return M;
  };
  FactorModel m;
  m.rank = cfg.rank;
  m.mode = cfg.mode;
  m.eta = effective_eta(cfg);
  m.alpha = alpha;
  m.W = project_nonneg_ball(draw(p.n_patients, cfg.rank), m.eta);
  for (std::size_t v = 0; v < p.size(); ++v) {
    Matrix H = draw(p.X[v].cols(), cfg.rank);
    if (cfg.mode == Mode::sicnmf) project_columns_simplex(H, 1.0);
    m.H.push_back(std::move(H));
    if (cfg.update_bias) {
      Vector means = p.X[v].colwise().mean().transpose();
      m.b.push_back(means.cwiseMax(cfg.epsilon));
    } else {
      m.b.push_back(Vector::Zero(p.X[v].cols()));
    }
  }
  return m;
}

enum class StopReason { max_outer, converged, stalled, failed };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::max_outer: return "max_outer";
    case StopReason::converged: return "converged";
    case StopReason::stalled: return "stalled";
    case StopReason::failed: return "failed";
  }
  return "?";
}

struct RestartSummary {
  std::uint64_t seed = 0;
  StopReason reason = StopReason::max_outer;
  int outer_iterations = 0;
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct SourceWeights {
  Vector alpha;
  Vector independent_divergence;  // empty under uniform weighting
  std::vector<std::string> warnings;
};

struct FitResult {
  FactorModel model;
  std::size_t best_restart = 0;
  std::vector<RestartSummary> restarts;
  SourceWeights weights;
};

/// Called after every outer iteration as (restart, iteration, model).
using FitObserver = std::function<void(int, int, const FactorModel&)>;

namespace detail {

inline std::vector<SourceInfo> source_info(const Collection& c) {
  std::vector<SourceInfo> info;
  for (const SourceMatrix& s : c.sources) info.push_back({s.name, s.divergence});
  return info;
}

inline std::pair<FactorModel, RestartSummary> run_restart(const DenseProblem& p, const SolverConfig& cfg,
                                                          const Vector& alpha, std::uint64_t seed,
                                                          int restart, const FitObserver& observer) {
  RestartSummary summary;
  summary.seed = seed;
  FactorModel m = initialize_model(p, cfg, alpha, seed);
  const BlockControl ctl = block_control(cfg);
  const double eta = effective_eta(cfg);

  double f = objective(p, m);
  if (!std::isfinite(f)) throw Error(ErrorCategory::numeric, "non-finite objective at initialization");
  m.objective_trace.push_back({0, f});

  BlockState w_state{cfg.line_search.initial_step, -1.0};
  std::vector<BlockState> h_state(p.size(), BlockState{cfg.line_search.initial_step, -1.0});
  for (int it = 1; it <= cfg.max_outer; ++it) {
    bool all_stalled = update_W(p, m, eta, ctl, w_state).stalled;
    for (std::size_t v = 0; v < p.size(); ++v) {
      all_stalled = update_H_b(p, m, v, cfg.mode, cfg.update_bias, ctl, h_state[v]).stalled && all_stalled;
    }
    const double f_new = objective(p, m);
    if (!std::isfinite(f_new)) {
      throw Error(ErrorCategory::numeric, "non-finite objective at outer iteration " + std::to_string(it));
    }
    m.objective_trace.push_back({it, f_new});
    summary.outer_iterations = it;
    if (observer) observer(restart, it, m);
    const double change = std::abs(f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    f = f_new;
    if (all_stalled) {
      summary.reason = StopReason::stalled;
      break;
    }
    if (change < cfg.outer_tol) {
      summary.reason = StopReason::converged;
      break;
    }
  }
  summary.final_objective = f;
  return {std::move(m), summary};
}

inline FitResult fit_with_alpha(const Collection& c, const DenseProblem& p, const SolverConfig& cfg,
                                const Vector& alpha, const FitObserver& observer) {
  const int n = cfg.restarts;
  std::vector<std::optional<FactorModel>> models(static_cast<std::size_t>(n));
  std::vector<RestartSummary> summaries(static_cast<std::size_t>(n));
  std::mutex observer_mutex;
  FitObserver guarded;
  if (observer) {
    guarded = [&](int r, int it, const FactorModel& m) {
      std::lock_guard<std::mutex> lock(observer_mutex);
      observer(r, it, m);
    };
  }

  auto run = [&](int r) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    try {
      auto [m, s] = run_restart(p, cfg, alpha, seed, r, guarded);
      models[static_cast<std::size_t>(r)] = std::move(m);
      summaries[static_cast<std::size_t>(r)] = s;
    } catch (const Error& e) {
      RestartSummary& s = summaries[static_cast<std::size_t>(r)];
      s.seed = seed;
      s.reason = StopReason::failed;
      s.error = e.what();
    }
  };

  const int threads = std::min(resolve_threads(cfg.threads), n);
  if (threads <= 1) {
    for (int r = 0; r < n; ++r) run(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int r = next++; r < n; r = next++) run(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  FitResult result;
  bool found = false;
  for (int r = 0; r < n; ++r) {
    const auto& m = models[static_cast<std::size_t>(r)];
    if (!m) continue;
    if (!found || summaries[static_cast<std::size_t>(r)].final_objective <
                      summaries[result.best_restart].final_objective) {
      result.best_restart = static_cast<std::size_t>(r);
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorCategory::numeric, "all " + std::to_string(n) + " restarts failed: " + summaries.front().error);
  }
  result.model = std::move(*models[result.best_restart]);
  result.model.sources = source_info(c);
  result.restarts = std::move(summaries);
  return result;
}

}  // namespace detail

/// Per-source weights. Under independent_fit each source is factorized on its
/// own (cnmf mode, same rank, one restart, same seed) and weighted by the
/// reciprocal of the divergence it reaches, floored at 1e-8 per stored entry.
inline SourceWeights compute_source_weights(const Collection& c, const SolverConfig& cfg) {
  validate_config(cfg);
  require_valid(c);
  SourceWeights w;
  const Index V = static_cast<Index>(c.size());
  w.alpha = Vector::Ones(V);
  if (cfg.weighting == Weighting::uniform) return w;

  w.independent_divergence = Vector::Zero(V);
  SolverConfig ind = cfg;
  ind.mode = Mode::cnmf;
  ind.restarts = 1;
  ind.weighting = Weighting::uniform;
  for (Index v = 0; v < V; ++v) {
    const SourceMatrix& s = c.sources[static_cast<std::size_t>(v)];
    const bool degenerate = std::none_of(s.entries.begin(), s.entries.end(),
                                         [](const Entry& e) { return e.value != 0.0; });
    if (degenerate) {
      w.warnings.push_back("source '" + s.name + "' is all zeros; alpha set to 1");
      w.independent_divergence(v) = 0.0;
      continue;
    }
    Collection single{{s}, c.patient_labels};
    DenseProblem p(single, ind.epsilon);
    FitResult r = detail::fit_with_alpha(single, p, ind, Vector::Ones(1), {});
    const double d = div_value(p.spec[0], p.X[0], model_estimate(r.model, 0));
    w.independent_divergence(v) = d;
    const double floor = 1e-8 * static_cast<double>(s.entries.size());
    w.alpha(v) = 1.0 / std::max(d, floor);
  }
  return w;
}

/// Multi-restart alternating minimization. Returns the restart with the
/// lowest final objective; ties go to the earliest restart.
inline FitResult fit(const Collection& c, const SolverConfig& cfg, const FitObserver& observer = {}) {
  validate_config(cfg);
  require_valid(c);
  SourceWeights weights = compute_source_weights(c, cfg);
  DenseProblem p(c, cfg.epsilon);
  FitResult result = detail::fit_with_alpha(c, p, cfg, weights.alpha, observer);
  result.weights = std::move(weights);
  return result;
}

/// Fit with caller-supplied weights (skips the weighting preprocessor).
inline FitResult fit(const Collection& c, const SolverConfig& cfg, const Vector& alpha,
                     const FitObserver& observer = {}) {
  validate_config(cfg);
  require_valid(c);
  if (alpha.size() != static_cast<Index>(c.size()) || (alpha.array() <= 0.0).any()) {
    throw Error(ErrorCategory::config, "alpha must hold one positive weight per source");
  }
  DenseProblem p(c, cfg.epsilon);
  FitResult result = detail::fit_with_alpha(c, p, cfg, alpha, observer);
  result.weights.alpha = alpha;
  return result;
}

}  // namespace sicnmf
