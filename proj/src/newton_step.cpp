#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "snpe/solvers.hpp"

namespace snpe {

std::string_view to_string(LinearSolverKind kind) {
  return kind == LinearSolverKind::direct ? "direct" : "iterative";
}

LinearSolverKind linear_solver_from_string(std::string_view name) {
  if (name == "direct") return LinearSolverKind::direct;
  if (name == "iterative") return LinearSolverKind::iterative;
  throw std::invalid_argument(fmt::format("unknown linear solver '{}'", name));
}

namespace {

Matrix shifted_system(const Matrix& h, double eta) {
  Matrix a = eta * h;
  a.diagonal().array() += 1.0;
  return a;
}

void check_inputs(const Matrix& h, const Vector& g, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("step size must be positive");
  if (h.rows() != h.cols() || h.rows() != g.size()) {
    throw std::invalid_argument(
        fmt::format("system is {}x{} but gradient has length {}", h.rows(), h.cols(), g.size()));
  }
}

}  // namespace

Vector newton_step_direct(const Matrix& h_avg, const Vector& g, double eta) {
  check_inputs(h_avg, g, eta);
  Eigen::LLT<Matrix> llt(shifted_system(h_avg, eta));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("Cholesky factorization of I + eta H failed (H not PSD?)");
  }
  return llt.solve(-eta * g);
}

Vector newton_step_iterative(const Matrix& h_avg, const Vector& g, double eta, double alpha) {
  check_inputs(h_avg, g, eta);
  const Matrix a = shifted_system(h_avg, eta);
  const Vector rhs = -eta * g;
  const Index n = g.size();
  const long max_iters = std::max<long>(1, static_cast<long>(n) * static_cast<long>(n));

  Vector d = Vector::Zero(n);
  Vector r = rhs;  // rhs - A d
  if (r.norm() <= 0.5 * alpha * d.norm()) return d;
  Vector p = r;
  double rr = r.squaredNorm();
  for (long k = 0; k < max_iters; ++k) {
    const Vector ap = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw std::runtime_error("conjugate gradients broke down (p^T A p <= 0)");
    const double step = rr / pap;
    d += step * p;
    r -= step * ap;
    if (r.norm() <= 0.5 * alpha * d.norm()) {
      // Confirm against the true residual; recurrences drift.
      r = rhs - a * d;
      if (r.norm() <= 0.5 * alpha * d.norm()) return d;
      p = r;
      rr = r.squaredNorm();
      continue;
    }
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  throw std::runtime_error(
      fmt::format("conjugate gradients did not meet the inexactness test in {} iterations",
                  max_iters));
}

Vector newton_step(LinearSolverKind kind, const Matrix& h_avg, const Vector& g, double eta,
                   double alpha) {
  return kind == LinearSolverKind::direct ? newton_step_direct(h_avg, g, eta)
                                          : newton_step_iterative(h_avg, g, eta, alpha);
}

}  // namespace snpe
