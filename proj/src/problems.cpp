#include "snpe/problems.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace snpe {

Matrix Problem::sqrt_factor(const Vector&) const {
  throw std::logic_error(fmt::format("problem '{}' has no square-root Hessian factor", kind()));
}

void Problem::check_dimension(const Vector& x) const {
  if (x.size() != dimension()) {
    throw std::invalid_argument(
        fmt::format("dimension mismatch: expected {}, got {}", dimension(), x.size()));
  }
}

Matrix symmetric_sqrt(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// Log-sum-exp

LogSumExpProblem::LogSumExpProblem(Matrix a, Vector b, double rho, double lambda)
    : a_(std::move(a)), b_(std::move(b)), rho_(rho), lambda_(lambda) {
  if (a_.rows() < 1 || a_.cols() < 1) throw std::invalid_argument("A must be at least 1x1");
  if (b_.size() != a_.rows()) {
    throw std::invalid_argument(
        fmt::format("b has length {} but A has {} rows", b_.size(), a_.rows()));
  }
  if (!(rho_ > 0.0)) throw std::invalid_argument("rho must be positive");
  if (!(lambda_ >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
}

Vector LogSumExpProblem::scaled_residuals(const Vector& x) const {
  check_dimension(x);
  return (a_ * x - b_) / rho_;
}

Vector LogSumExpProblem::softmax(const Vector& x) const {
  Vector z = scaled_residuals(x);
  const double m = z.maxCoeff();
  Vector p = (z.array() - m).exp().matrix();
  p /= p.sum();
  return p;
}

double LogSumExpProblem::value(const Vector& x) const {
  const Vector z = scaled_residuals(x);
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return rho_ * lse + 0.5 * lambda_ * x.squaredNorm();
}

Vector LogSumExpProblem::gradient(const Vector& x) const {
  return a_.transpose() * softmax(x) + lambda_ * x;
}

Matrix LogSumExpProblem::sqrt_factor(const Vector& x) const {
  const Vector p = softmax(x);
  const Vector abar = a_.transpose() * p;
  Matrix m = a_.rowwise() - abar.transpose();
  m.array().colwise() *= (p.array() / rho_).sqrt();
  return m;
}

Matrix LogSumExpProblem::hessian(const Vector& x) const {
  const Matrix m = sqrt_factor(x);
  const Index d = dimension();
  Matrix h = Matrix::Zero(d, d);
  h.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  h = h.selfadjointView<Eigen::Lower>();
  h.diagonal().array() += lambda_;
  return h;
}

LogSumExpProblem generate_synthetic_lse(Index n, Index d, double rho, double lambda,
                                        std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("n and d must be at least 1");
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix a(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = normal(rng);
  Vector b(n);
  for (Index i = 0; i < n; ++i) b(i) = uniform(rng);
  return LogSumExpProblem(std::move(a), std::move(b), rho, lambda);
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(Matrix h, Vector c) : h_(std::move(h)), c_(std::move(c)) {
  if (h_.rows() < 1 || h_.rows() != h_.cols()) throw std::invalid_argument("H must be square");
  if (c_.size() != h_.rows()) throw std::invalid_argument("c length does not match H");
  if (asymmetry(h_) > 1e-12 * (1.0 + h_.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("H must be symmetric");
  }
  mu_ = min_eigenvalue(h_);
  if (!(mu_ > 0.0)) throw std::invalid_argument("H must be positive definite");
  root_ = symmetric_sqrt(h_);
}

double QuadraticProblem::value(const Vector& x) const {
  check_dimension(x);
  return 0.5 * x.dot(h_ * x) - c_.dot(x);
}

Vector QuadraticProblem::gradient(const Vector& x) const {
  check_dimension(x);
  return h_ * x - c_;
}

Matrix QuadraticProblem::hessian(const Vector& x) const {
  check_dimension(x);
  return h_;
}

Matrix QuadraticProblem::sqrt_factor(const Vector& x) const {
  check_dimension(x);
  return root_;
}

// ---------------------------------------------------------------------------
// Finite-sum quadratic

FiniteSumQuadraticProblem::FiniteSumQuadraticProblem(std::vector<Component> components, double mu)
    : components_(std::move(components)), mu_(mu) {
  if (components_.empty()) throw std::invalid_argument("finite sum needs at least one component");
  dim_ = components_.front().hessian.rows();
  const Index n = size();
  mean_hessian_ = Matrix::Zero(dim_, dim_);
  roots_.resize(n * dim_, dim_);
  for (Index i = 0; i < n; ++i) {
    const auto& comp = components_[static_cast<std::size_t>(i)];
    if (comp.hessian.rows() != dim_ || comp.hessian.cols() != dim_ || comp.linear.size() != dim_) {
      throw std::invalid_argument(fmt::format("component {} has inconsistent dimensions", i));
    }
    if (asymmetry(comp.hessian) > 1e-12 * (1.0 + comp.hessian.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument(fmt::format("component {} Hessian is not symmetric", i));
    }
    if (min_eigenvalue(comp.hessian) < -1e-10) {
      throw std::invalid_argument(fmt::format("component {} Hessian is not PSD", i));
    }
    mean_hessian_ += comp.hessian;
    roots_.middleRows(i * dim_, dim_) = symmetric_sqrt(comp.hessian) / std::sqrt(double(n));
  }
  mean_hessian_ /= double(n);
  if (!(mu_ > 0.0)) throw std::invalid_argument("declared mu must be positive");
  const double lmin = min_eigenvalue(mean_hessian_);
  if (lmin < mu_ * (1.0 - 1e-12)) {
    throw std::invalid_argument(
        fmt::format("mean Hessian has smallest eigenvalue {} below declared mu {}", lmin, mu_));
  }
}

double FiniteSumQuadraticProblem::value(const Vector& x) const {
  check_dimension(x);
  double s = 0.0;
  for (const auto& c : components_) s += 0.5 * x.dot(c.hessian * x) - c.linear.dot(x);
  return s / double(size());
}

Vector FiniteSumQuadraticProblem::gradient(const Vector& x) const {
  check_dimension(x);
  Vector g = Vector::Zero(dim_);
  for (const auto& c : components_) g += c.hessian * x - c.linear;
  return g / double(size());
}

Matrix FiniteSumQuadraticProblem::hessian(const Vector& x) const {
  check_dimension(x);
  return mean_hessian_;
}

Matrix FiniteSumQuadraticProblem::sqrt_factor(const Vector& x) const {
  check_dimension(x);
  return roots_;
}

FiniteSumQuadraticProblem generate_finite_sum_quadratic(Index n, Index d, double ridge,
                                                        std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("n and d must be at least 1");
  if (!(ridge > 0.0)) throw std::invalid_argument("ridge must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FiniteSumQuadraticProblem::Component> comps;
  comps.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Matrix g(d, d);
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) g(r, c) = normal(rng) / std::sqrt(double(d));
    Matrix h = g * g.transpose();
    h.diagonal().array() += ridge;
    h = 0.5 * (h + h.transpose());
    Vector lin(d);
    for (Index r = 0; r < d; ++r) lin(r) = normal(rng);
    comps.push_back({std::move(h), std::move(lin)});
  }
  return FiniteSumQuadraticProblem(std::move(comps), ridge);
}

}  // namespace snpe
