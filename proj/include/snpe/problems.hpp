#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "snpe/types.hpp"

namespace snpe {

/// Objective oracle for a smooth, strongly convex function.
///
/// `hessian(x)` equals `sqrt_factor(x)^T sqrt_factor(x) + ridge() * I` for
/// problems that expose a factor. The ridge term is kept out of the factor so
/// that randomized oracles perturb only the data-dependent part.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string_view kind() const = 0;
  virtual Index dimension() const = 0;
  /// Declared strong-convexity modulus.
  virtual double strong_convexity() const = 0;
  virtual double ridge() const { return 0.0; }

  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;

  virtual bool has_sqrt_factor() const { return false; }
  /// Throws std::logic_error when the problem has no factorization.
  virtual Matrix sqrt_factor(const Vector& x) const;

 protected:
  void check_dimension(const Vector& x) const;
};

/// f(x) = rho * log(sum_i exp((a_i^T x - b_i) / rho)) + (lambda / 2) ||x||^2
class LogSumExpProblem final : public Problem {
 public:
  LogSumExpProblem(Matrix a, Vector b, double rho, double lambda);

  std::string_view kind() const override { return "lse"; }
  Index dimension() const override { return a_.cols(); }
  Index samples() const { return a_.rows(); }
  double strong_convexity() const override { return lambda_; }
  double ridge() const override { return lambda_; }

  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Matrix hessian(const Vector& x) const override;

  bool has_sqrt_factor() const override { return true; }
  /// rho^{-1/2} diag(sqrt(p)) (A - 1 abar^T), an n x d matrix.
  Matrix sqrt_factor(const Vector& x) const override;

  /// Softmax weights p_i of the scaled residuals at x; sums to one.
  Vector softmax(const Vector& x) const;

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  double rho() const { return rho_; }
  double lambda() const { return lambda_; }

 private:
  Vector scaled_residuals(const Vector& x) const;

  Matrix a_;
  Vector b_;
  double rho_;
  double lambda_;
};

/// Rows of A i.i.d. standard normal, b i.i.d. uniform on [0, 1].
LogSumExpProblem generate_synthetic_lse(Index n, Index d, double rho, double lambda,
                                        std::uint64_t seed);

/// f(x) = 1/2 x^T H x - c^T x with H symmetric positive definite.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Matrix h, Vector c);

  std::string_view kind() const override { return "quadratic"; }
  Index dimension() const override { return h_.rows(); }
  double strong_convexity() const override { return mu_; }

  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Matrix hessian(const Vector& x) const override;

  bool has_sqrt_factor() const override { return true; }
  Matrix sqrt_factor(const Vector& x) const override;

  const Matrix& h() const { return h_; }
  const Vector& c() const { return c_; }

 private:
  Matrix h_;
  Vector c_;
  Matrix root_;
  double mu_;
};

/// f(x) = (1/n) sum_i (1/2 x^T H_i x - c_i^T x).
///
/// Component Hessians are stored explicitly so that subsampling has an exact
/// decomposition to be checked against.
class FiniteSumQuadraticProblem final : public Problem {
 public:
  struct Component {
    Matrix hessian;
    Vector linear;
  };

  FiniteSumQuadraticProblem(std::vector<Component> components, double mu);

  std::string_view kind() const override { return "finite_sum_quadratic"; }
  Index dimension() const override { return dim_; }
  Index size() const { return static_cast<Index>(components_.size()); }
  double strong_convexity() const override { return mu_; }

  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Matrix hessian(const Vector& x) const override;

  bool has_sqrt_factor() const override { return true; }
  /// Stacked symmetric roots H_i^{1/2} / sqrt(n), an (n d) x d matrix.
  Matrix sqrt_factor(const Vector& x) const override;

  const Component& component(Index i) const { return components_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Component> components_;
  Matrix roots_;
  Matrix mean_hessian_;
  Index dim_;
  double mu_;
};

/// Random finite sum with PSD components of rank <= d and a ridge on the mean.
FiniteSumQuadraticProblem generate_finite_sum_quadratic(Index n, Index d, double ridge,
                                                        std::uint64_t seed);

/// Symmetric PSD square root through an eigendecomposition.
Matrix symmetric_sqrt(const Matrix& h);

}  // namespace snpe
