#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "snpe/solvers.hpp"

namespace snpe {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_baseline(const BaselineConfig& config, const Problem& problem, const Vector& x0) {
  if (config.max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  if (config.stop.f_gap_tol && !config.stop.f_ref) {
    throw std::invalid_argument("f_gap stopping needs a reference value");
  }
  if (x0.size() != problem.dimension()) {
    throw std::invalid_argument(fmt::format("x0 has length {}, problem dimension is {}", x0.size(),
                                            problem.dimension()));
  }
}

}  // namespace

Trajectory run_damped_newton(const BaselineConfig& config, const Problem& problem,
                             const Vector& x0) {
  check_baseline(config, problem, x0);
  Trajectory traj;
  traj.solver = "damped_newton";
  Vector x = x0;
  Vector g = problem.gradient(x);
  double f = problem.value(x);
  if (config.stop.grad_norm_tol > 0.0 && g.norm() <= config.stop.grad_norm_tol) {
    traj.converged = true;
  }
  const auto start = Clock::now();
  for (int t = 0; t < config.max_iters && !traj.converged; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.x = x;
    rec.sigma = 1.0;
    Eigen::LLT<Matrix> llt(problem.hessian(x));
    if (llt.info() != Eigen::Success) throw std::runtime_error("damped Newton: Hessian not SPD");
    const Vector p = llt.solve(-g);
    const double slope = g.dot(p);
    // Function values carry rounding noise near the optimum; allow a few ulps.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    double a = 1.0;
    int halvings = 0;
    Vector x_trial = x + p;
    double f_trial = problem.value(x_trial);
    while (f_trial > f + config.armijo_c1 * a * slope + slack && halvings < config.max_halvings) {
      a *= 0.5;
      ++halvings;
      x_trial = x + a * p;
      f_trial = problem.value(x_trial);
    }
    rec.eta = a;
    rec.ls_steps = halvings + 1;
    rec.backtracked = halvings > 0;
    x = std::move(x_trial);
    f = f_trial;
    g = problem.gradient(x);
    fill_metrics(rec, problem, x, g, config.stop, config.x_ref);
    rec.x_hat = x;
    rec.x_next = x;
    rec.wall_time_ms = ms_since(start);
    traj.converged = stop_reached(rec, config.stop);
    traj.records.push_back(std::move(rec));
  }
  traj.x_final = x;
  return traj;
}

PowerIterationResult power_iteration(const Matrix& h, int max_iters, double tol,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(h.rows());
  for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v.normalize();
  PowerIterationResult out;
  double prev = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    const Vector hv = h * v;
    const double norm = hv.norm();
    if (norm == 0.0) {
      out.value = 0.0;
      out.converged = true;
      return out;
    }
    out.value = v.dot(hv);
    v = hv / norm;
    if (k > 0 && std::abs(out.value - prev) <= tol * std::abs(out.value)) {
      out.converged = true;
      return out;
    }
    prev = out.value;
  }
  return out;
}

Trajectory run_agd(const BaselineConfig& config, const Problem& problem, const Vector& x0) {
  check_baseline(config, problem, x0);
  if (!(config.mu > 0.0)) throw std::invalid_argument("AGD needs mu > 0");
  Trajectory traj;
  traj.solver = "agd";

  PowerIterationResult pi =
      power_iteration(problem.hessian(x0), config.power_iterations, config.power_tol);
  double lipschitz = pi.value;
  if (!pi.converged) {
    lipschitz *= 2.0;
    traj.notes.push_back(
        fmt::format("power iteration did not converge; L estimate inflated to {}", lipschitz));
  }
  lipschitz = std::max(lipschitz, config.mu);
  const double root_kappa = std::sqrt(lipschitz / config.mu);
  const double momentum = (root_kappa - 1.0) / (root_kappa + 1.0);

  Vector x = x0;
  Vector x_prev = x0;
  Vector g = problem.gradient(x);
  if (config.stop.grad_norm_tol > 0.0 && g.norm() <= config.stop.grad_norm_tol) {
    traj.converged = true;
  }
  const auto start = Clock::now();
  for (int t = 0; t < config.max_iters && !traj.converged; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.x = x;
    rec.sigma = 1.0 / lipschitz;
    rec.eta = 1.0 / lipschitz;
    rec.ls_steps = 1;
    const Vector y = x + momentum * (x - x_prev);
    Vector x_next = y - problem.gradient(y) / lipschitz;
    x_prev = std::move(x);
    x = std::move(x_next);
    g = problem.gradient(x);
    fill_metrics(rec, problem, x, g, config.stop, config.x_ref);
    rec.x_hat = y;
    rec.x_next = x;
    rec.wall_time_ms = ms_since(start);
    traj.converged = stop_reached(rec, config.stop);
    traj.records.push_back(std::move(rec));
  }
  traj.x_final = x;
  return traj;
}

}  // namespace snpe
