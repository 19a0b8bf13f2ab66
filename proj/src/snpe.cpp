#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "snpe/solvers.hpp"

namespace snpe {

void SnpeConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  if (max_ls_steps_per_iter < 1) throw std::invalid_argument("max_ls_steps_per_iter must be >= 1");
  if (stop.f_gap_tol && !stop.f_ref) {
    throw std::invalid_argument("f_gap stopping needs a reference value");
  }
  averaging.validate();
  oracle.validate();
}

void SnpeConfig::validate_against(const Problem& problem) const {
  validate();
  const double declared = problem.strong_convexity();
  if (mu > declared * (1.0 + 1e-12)) {
    throw std::invalid_argument(
        fmt::format("configured mu {} exceeds the problem's strong convexity {}", mu, declared));
  }
  if (x_ref && x_ref->size() != problem.dimension()) {
    throw std::invalid_argument("reference point has the wrong dimension");
  }
}

LineSearchResult backtracking_line_search(const Problem& problem, const Vector& x, const Vector& g,
                                          const Matrix& h_avg, double sigma,
                                          const LineSearchParams& params) {
  if (!(sigma > 0.0)) throw std::invalid_argument("trial step size must be positive");
  LineSearchResult out;
  double eta = sigma;
  for (int k = 1; k <= params.max_steps; ++k) {
    const Vector d = newton_step(params.solver, h_avg, g, eta, params.alpha);
    Vector x_hat = x + d;
    Vector g_hat = problem.gradient(x_hat);
    const double gamma = 1.0 + 2.0 * eta * params.mu;
    const double residual = (d + eta * g_hat).norm();
    const double rhs = params.alpha * std::sqrt(gamma) * d.norm();
    if (residual <= rhs) {
      out.eta = eta;
      out.x_hat = std::move(x_hat);
      out.g_hat = std::move(g_hat);
      out.ls_steps = k;
      out.residual = residual;
      out.rhs = rhs;
      return out;
    }
    out.rejected = RejectedCandidate{eta, std::move(x_hat)};
    eta *= params.beta;
  }
  throw std::runtime_error(fmt::format(
      "line search exceeded {} steps (eta fell to {:.3e})", params.max_steps, eta / params.beta));
}

Vector extragradient_update(const Vector& x, const Vector& x_hat, const Vector& g_hat, double eta,
                            double mu) {
  const double gamma = 1.0 + 2.0 * eta * mu;
  return (x - eta * g_hat) / gamma + (1.0 - 1.0 / gamma) * x_hat;
}

SolverState::SolverState(const SnpeConfig& config, const Problem& problem, Vector x0)
    : x(std::move(x0)),
      sigma(config.sigma0),
      averager(config.averaging, problem.dimension()),
      oracle(config.oracle) {
  if (x.size() != problem.dimension()) {
    throw std::invalid_argument(fmt::format("x0 has length {}, problem dimension is {}", x.size(),
                                            problem.dimension()));
  }
  g = problem.gradient(x);
}

void fill_metrics(IterationRecord& rec, const Problem& problem, const Vector& x_next,
                  const Vector& g_next, const StopCriterion& stop,
                  const std::optional<Vector>& x_ref) {
  rec.f_value = problem.value(x_next);
  rec.grad_norm = g_next.norm();
  if (stop.f_ref) rec.f_gap = rec.f_value - *stop.f_ref;
  if (x_ref) rec.dist_to_ref = (x_next - *x_ref).norm();
}

bool stop_reached(const IterationRecord& rec, const StopCriterion& stop) {
  if (stop.grad_norm_tol > 0.0 && rec.grad_norm <= stop.grad_norm_tol) return true;
  if (stop.f_gap_tol && rec.f_gap <= *stop.f_gap_tol) return true;
  return false;
}

IterationRecord snpe_step(SolverState& state, const SnpeConfig& config, const Problem& problem) {
  const auto start = std::chrono::steady_clock::now();
  IterationRecord rec;
  rec.t = state.t;
  rec.sigma = state.sigma;
  rec.x = state.x;

  state.averager.update(state.oracle.draw(problem, state.x).hessian);
  const Matrix& h_avg = state.averager.average();

  const LineSearchParams params{config.alpha, config.beta, config.mu,
                                config.max_ls_steps_per_iter, config.linear_solver};
  LineSearchResult ls = backtracking_line_search(problem, state.x, state.g, h_avg, state.sigma,
                                                 params);

  rec.eta = ls.eta;
  rec.gamma = 1.0 + 2.0 * ls.eta * config.mu;
  rec.ls_steps = ls.ls_steps;
  rec.backtracked = ls.ls_steps > 1;
  rec.rejected = std::move(ls.rejected);
  rec.accept_residual = ls.residual;
  rec.accept_rhs = ls.rhs;
  if (rec.backtracked && config.keep_hessian_snapshots) rec.hessian_snapshot = h_avg;

  Vector x_next;
  Vector g_next;
  if (config.disable_extragradient) {
    x_next = ls.x_hat;
    g_next = ls.g_hat;
  } else {
    x_next = extragradient_update(state.x, ls.x_hat, ls.g_hat, ls.eta, config.mu);
    g_next = problem.gradient(x_next);
  }
  rec.x_hat = std::move(ls.x_hat);

  fill_metrics(rec, problem, x_next, g_next, config.stop, config.x_ref);
  rec.x_next = x_next;

  state.x = std::move(x_next);
  state.g = std::move(g_next);
  state.sigma = ls.eta / config.beta;
  ++state.t;

  rec.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

namespace {

template <typename Step>
Trajectory drive(std::string name, const StopCriterion& stop, int max_iters, SolverState& state,
                 Step&& step) {
  Trajectory traj;
  traj.solver = std::move(name);
  if (stop.grad_norm_tol > 0.0 && state.g.norm() <= stop.grad_norm_tol) {
    traj.converged = true;
  }
  double elapsed = 0.0;
  for (int t = 0; t < max_iters && !traj.converged; ++t) {
    IterationRecord rec = step(state);
    elapsed += rec.wall_time_ms;
    rec.wall_time_ms = elapsed;
    traj.converged = stop_reached(rec, stop);
    traj.records.push_back(std::move(rec));
  }
  traj.x_final = state.x;
  return traj;
}

}  // namespace

Trajectory run_snpe(const SnpeConfig& config, const Problem& problem, const Vector& x0) {
  config.validate_against(problem);
  SolverState state(config, problem, x0);
  return drive("snpe", config.stop, config.max_iters, state,
               [&](SolverState& s) { return snpe_step(s, config, problem); });
}

Trajectory run_npe(SnpeConfig config, const Problem& problem, const Vector& x0) {
  config.oracle.mode = OracleMode::exact;
  config.averaging = WeightScheme::current();
  Trajectory traj = run_snpe(config, problem, x0);
  traj.solver = "npe";
  return traj;
}

IterationRecord stochastic_newton_step(SolverState& state, const SnpeConfig& config,
                                       const Problem& problem,
                                       const StochasticNewtonOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  IterationRecord rec;
  rec.t = state.t;
  rec.sigma = 1.0;
  rec.gamma = 1.0;
  rec.x = state.x;

  state.averager.update(state.oracle.draw(problem, state.x).hessian);
  Eigen::SelfAdjointEigenSolver<Matrix> es(state.averager.average());
  Vector evals = es.eigenvalues();
  if (evals.minCoeff() < options.eigen_floor) {
    rec.floored = true;
    evals = evals.cwiseMax(options.eigen_floor);
  }
  const Matrix& v = es.eigenvectors();
  const Vector step = -(v * (v.transpose() * state.g).cwiseQuotient(evals));

  double a = 1.0;
  int halvings = 0;
  Vector x_next = state.x + step;
  if (options.armijo) {
    const double f = problem.value(state.x);
    const double slope = state.g.dot(step);
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    while (problem.value(x_next) > f + options.armijo_c1 * a * slope + slack &&
           halvings < options.max_halvings) {
      a *= 0.5;
      ++halvings;
      x_next = state.x + a * step;
    }
  }
  rec.eta = a;
  rec.ls_steps = halvings + 1;
  rec.backtracked = halvings > 0;
  Vector g_next = problem.gradient(x_next);

  fill_metrics(rec, problem, x_next, g_next, config.stop, config.x_ref);
  rec.x_hat = x_next;
  rec.x_next = x_next;
  state.x = std::move(x_next);
  state.g = std::move(g_next);
  ++state.t;
  rec.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

Trajectory run_stochastic_newton(const SnpeConfig& config, const Problem& problem,
                                 const Vector& x0, const StochasticNewtonOptions& options) {
  config.validate();
  if (!(options.eigen_floor > 0.0)) throw std::invalid_argument("eigen_floor must be positive");
  SolverState state(config, problem, x0);
  return drive("stochastic_newton", config.stop, config.max_iters, state,
               [&](SolverState& s) { return stochastic_newton_step(s, config, problem, options); });
}

}  // namespace snpe
