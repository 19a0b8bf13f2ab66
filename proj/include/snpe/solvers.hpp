#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "snpe/averaging.hpp"
#include "snpe/oracles.hpp"
#include "snpe/problems.hpp"
#include "snpe/types.hpp"

namespace snpe {

enum class LinearSolverKind { direct, iterative };

std::string_view to_string(LinearSolverKind kind);
LinearSolverKind linear_solver_from_string(std::string_view name);

struct StopCriterion {
  /// Stop once ||grad f(x)|| <= grad_norm_tol (0 disables).
  double grad_norm_tol = 0.0;
  /// Stop once f(x) - f_ref <= f_gap_tol; requires f_ref.
  std::optional<double> f_gap_tol;
  std::optional<double> f_ref;
};

struct SnpeConfig {
  double alpha = 0.25;
  double beta = 0.5;
  double sigma0 = 1.0;
  /// Strong-convexity modulus used in gamma = 1 + 2 eta mu. Must not exceed
  /// the problem's declared modulus.
  double mu = 1e-3;
  WeightScheme averaging;
  OracleConfig oracle;
  LinearSolverKind linear_solver = LinearSolverKind::direct;
  bool disable_extragradient = false;
  int max_iters = 100;
  int max_ls_steps_per_iter = 60;
  StopCriterion stop;

  /// Reference minimizer; fills dist_to_ref in the records when set.
  std::optional<Vector> x_ref;
  /// Keep a copy of the averaged Hessian on backtracked iterations so that
  /// step-size bounds can be rechecked afterwards.
  bool keep_hessian_snapshots = false;

  void validate() const;
  void validate_against(const Problem& problem) const;
};

struct RejectedCandidate {
  double eta = 0.0;
  Vector x;
};

struct IterationRecord {
  int t = 0;
  /// Trial step size sigma_t handed to the line search.
  double sigma = 0.0;
  double eta = 0.0;
  double gamma = 1.0;
  int ls_steps = 0;
  bool backtracked = false;
  std::optional<RejectedCandidate> rejected;
  double accept_residual = 0.0;
  double accept_rhs = 0.0;
  /// Metrics at x_next.
  double grad_norm = 0.0;
  double f_value = 0.0;
  double f_gap = std::numeric_limits<double>::quiet_NaN();
  double dist_to_ref = std::numeric_limits<double>::quiet_NaN();
  double wall_time_ms = 0.0;
  /// Set when a baseline had to regularize a near-singular system.
  bool floored = false;

  Vector x;
  Vector x_hat;
  Vector x_next;
  std::optional<Matrix> hessian_snapshot;
};

struct Trajectory {
  std::string solver;
  std::vector<IterationRecord> records;
  Vector x_final;
  bool converged = false;
  /// Free-form warnings (e.g. power-iteration fallback).
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Regularized Newton step (I + eta H) d = -eta g

/// Direct solve through a Cholesky factorization of I + eta H.
Vector newton_step_direct(const Matrix& h_avg, const Vector& g, double eta);

/// Conjugate gradients on I + eta H, stopped at the first iterate with
/// ||(I + eta H) d + eta g|| <= (alpha / 2) ||d||. Throws after d^2 iterations.
Vector newton_step_iterative(const Matrix& h_avg, const Vector& g, double eta, double alpha);

Vector newton_step(LinearSolverKind kind, const Matrix& h_avg, const Vector& g, double eta,
                   double alpha);

// ---------------------------------------------------------------------------
// Backtracking line search

struct LineSearchParams {
  double alpha = 0.25;
  double beta = 0.5;
  double mu = 0.0;
  int max_steps = 60;
  LinearSolverKind solver = LinearSolverKind::direct;
};

struct LineSearchResult {
  double eta = 0.0;
  Vector x_hat;
  /// Gradient at x_hat; reused by the extragradient step.
  Vector g_hat;
  int ls_steps = 0;
  std::optional<RejectedCandidate> rejected;
  double residual = 0.0;
  double rhs = 0.0;
};

/// Tries eta = sigma, beta sigma, beta^2 sigma, ... and returns the first
/// candidate with ||x_hat - x + eta grad f(x_hat)|| <= alpha sqrt(1 + 2 eta mu) ||x_hat - x||.
LineSearchResult backtracking_line_search(const Problem& problem, const Vector& x, const Vector& g,
                                          const Matrix& h_avg, double sigma,
                                          const LineSearchParams& params);

/// x_next = (x - eta g_hat) / gamma + (1 - 1/gamma) x_hat, gamma = 1 + 2 eta mu.
Vector extragradient_update(const Vector& x, const Vector& x_hat, const Vector& g_hat, double eta,
                            double mu);

// ---------------------------------------------------------------------------
// SNPE

struct SolverState {
  Vector x;
  /// grad f(x), cached across iterations.
  Vector g;
  double sigma = 1.0;
  HessianAverager averager;
  HessianOracle oracle;
  int t = 0;

  SolverState(const SnpeConfig& config, const Problem& problem, Vector x0);
};

IterationRecord snpe_step(SolverState& state, const SnpeConfig& config, const Problem& problem);

Trajectory run_snpe(const SnpeConfig& config, const Problem& problem, const Vector& x0);

/// Newton proximal extragradient: SNPE with the exact Hessian oracle and no
/// averaging, so every step uses the Hessian at the current iterate.
Trajectory run_npe(SnpeConfig config, const Problem& problem, const Vector& x0);

// ---------------------------------------------------------------------------
// Baselines

struct StochasticNewtonOptions {
  /// Eigenvalues of the averaged Hessian are floored here before the solve.
  double eigen_floor = 1e-12;
  /// Backtrack the unit step on f (Armijo, halving) instead of taking it blindly.
  bool armijo = false;
  double armijo_c1 = 1e-4;
  int max_halvings = 60;
};

/// x_next = x - a H_avg^{-1} grad f(x) on the averaged Hessian, with a = 1 or
/// an Armijo step when enabled.
IterationRecord stochastic_newton_step(SolverState& state, const SnpeConfig& config,
                                       const Problem& problem,
                                       const StochasticNewtonOptions& options = {});

Trajectory run_stochastic_newton(const SnpeConfig& config, const Problem& problem,
                                 const Vector& x0, const StochasticNewtonOptions& options = {});

struct BaselineConfig {
  int max_iters = 1000;
  StopCriterion stop;
  std::optional<Vector> x_ref;
  /// Strong-convexity modulus for AGD momentum.
  double mu = 1e-3;
  /// Armijo constant and maximum halvings for damped Newton.
  double armijo_c1 = 1e-4;
  int max_halvings = 60;
  int power_iterations = 500;
  double power_tol = 1e-10;
};

Trajectory run_damped_newton(const BaselineConfig& config, const Problem& problem,
                             const Vector& x0);

struct PowerIterationResult {
  double value = 0.0;
  bool converged = false;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
PowerIterationResult power_iteration(const Matrix& h, int max_iters, double tol,
                                     std::uint64_t seed = 0);

Trajectory run_agd(const BaselineConfig& config, const Problem& problem, const Vector& x0);

// ---------------------------------------------------------------------------

/// Fills f_gap / dist_to_ref / grad_norm / f_value for a post-step iterate.
void fill_metrics(IterationRecord& rec, const Problem& problem, const Vector& x_next,
                  const Vector& g_next, const StopCriterion& stop,
                  const std::optional<Vector>& x_ref);

bool stop_reached(const IterationRecord& rec, const StopCriterion& stop);

}  // namespace snpe
