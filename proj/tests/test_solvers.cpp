#include <cmath>

#include <gtest/gtest.h>

#include "snpe/bench.hpp"
#include "snpe/diagnostics.hpp"
#include "snpe/solvers.hpp"
#include "test_util.hpp"

namespace snpe {
namespace {

using testing::QuarticProblem;
using testing::random_spd;
using testing::random_vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

QuadraticProblem half_norm(Index d) { return QuadraticProblem(Matrix::Identity(d, d), Vector::Zero(d)); }

TEST(NewtonStepDirect, IdentityHessian) {
  const Vector d = newton_step_direct(Matrix::Identity(2, 2), vec({1, 0}), 1.0);
  EXPECT_LT((d - vec({-0.5, 0})).norm(), 1e-15);
}

TEST(NewtonStepDirect, SmallStepLimit) {
  Rng rng(1);
  const Matrix h = random_spd(4, rng, 1.0);
  const Vector g = random_vector(4, rng);
  const double eta = 1e-8;
  EXPECT_LE((newton_step_direct(h, g, eta) + eta * g).norm(), 1e-12);
}

TEST(NewtonStepDirect, AgreesWithIndependentSolve) {
  Rng rng(2);
  for (int k = 0; k < 10; ++k) {
    const Matrix h = random_spd(10, rng, 0.0);
    const Vector g = random_vector(10, rng);
    const double eta = 0.3 + k;
    Matrix a = eta * h;
    a.diagonal().array() += 1.0;
    const Vector reference = a.colPivHouseholderQr().solve(-eta * g);
    const Vector d = newton_step_direct(h, g, eta);
    EXPECT_LE((d - reference).norm(), 1e-10 * (1.0 + reference.norm()));
    EXPECT_LE((a * d + eta * g).norm(), 1e-10 * (eta * g).norm());
  }
}

TEST(NewtonStepDirect, RejectsBadInput) {
  EXPECT_THROW(newton_step_direct(Matrix::Identity(2, 2), vec({1, 0}), 0.0), std::invalid_argument);
  EXPECT_THROW(newton_step_direct(Matrix::Identity(3, 3), vec({1, 0}), 1.0), std::invalid_argument);
  EXPECT_THROW(newton_step_direct(-10.0 * Matrix::Identity(2, 2), vec({1, 0}), 1.0),
               std::runtime_error);
}

TEST(NewtonStepIterative, ZeroHessianIsExactInOneStep) {
  const Vector g = vec({1, -2, 3});
  const Vector d = newton_step_iterative(Matrix::Zero(3, 3), g, 0.5, 0.25);
  EXPECT_LT((d + 0.5 * g).norm(), 1e-15);
}

TEST(NewtonStepIterative, IdentityCaseMeetsTolerance) {
  const double alpha = 0.5;
  const Vector g = vec({1, 0});
  const Vector d = newton_step_iterative(Matrix::Identity(2, 2), g, 1.0, alpha);
  EXPECT_LE((2.0 * d + g).norm(), 0.5 * alpha * d.norm());
}

TEST(NewtonStepIterative, SandwichOnRandomSystems) {
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    const double alpha = 0.1 + 0.8 * (k % 9) / 8.0;
    const Matrix h = random_spd(50, rng, 1e-3) * (1.0 + k);
    const Vector g = random_vector(50, rng);
    const double eta = 0.05 * (1 + k % 7);
    Matrix a = eta * h;
    a.diagonal().array() += 1.0;
    const Vector d = newton_step_iterative(h, g, eta, alpha);
    const Vector exact = newton_step_direct(h, g, eta);
    EXPECT_LE((a * d + eta * g).norm(), 0.5 * alpha * d.norm()) << "system " << k;
    EXPECT_LE((d - exact).norm(), alpha * exact.norm()) << "system " << k;
  }
}

TEST(LineSearch, QuadraticAcceptsImmediately) {
  const auto f = half_norm(2);
  const Vector x = vec({1, 0});
  const LineSearchParams params{0.5, 0.5, 1.0, 60, LinearSolverKind::direct};
  const auto ls = backtracking_line_search(f, x, f.gradient(x), Matrix::Identity(2, 2), 1.0, params);
  EXPECT_EQ(ls.eta, 1.0);
  EXPECT_EQ(ls.ls_steps, 1);
  EXPECT_EQ(ls.x_hat, vec({0.5, 0}));
  EXPECT_LE(ls.residual, 1e-15);
  EXPECT_FALSE(ls.rejected.has_value());
}

TEST(LineSearch, QuarticBacktracksThreeTimes) {
  const QuarticProblem f(1);
  const Vector x = vec({1});
  const LineSearchParams params{0.5, 0.5, 1.0, 60, LinearSolverKind::direct};
  const auto ls = backtracking_line_search(f, x, f.gradient(x), Matrix::Zero(1, 1), 1.0, params);
  EXPECT_EQ(ls.eta, 0.125);
  EXPECT_EQ(ls.ls_steps, 4);
  EXPECT_EQ(ls.x_hat(0), 0.75);
  // |-0.25 + 0.125 (0.75^3 + 0.75)| = 0.103515625
  EXPECT_EQ(ls.residual, 0.103515625);
  EXPECT_NEAR(ls.rhs, 0.5 * std::sqrt(1.25) * 0.25, 1e-16);
  ASSERT_TRUE(ls.rejected.has_value());
  EXPECT_EQ(ls.rejected->eta, 0.25);
  EXPECT_EQ(ls.rejected->x(0), 0.5);
  EXPECT_TRUE(check_hpe_condition(x, ls.x_hat, ls.eta, 1.0, f.gradient(ls.x_hat), 0.5).ok);
}

TEST(LineSearch, TieAtBoundaryIsAccepted) {
  // h = 0 on f = x^2/2 gives residual eta^2 |x| against alpha eta |x| at mu = 0.
  const auto f = half_norm(1);
  const Vector x = vec({1});
  const LineSearchParams params{0.5, 0.5, 0.0, 60, LinearSolverKind::direct};
  const auto ls = backtracking_line_search(f, x, f.gradient(x), Matrix::Zero(1, 1), 0.5, params);
  EXPECT_EQ(ls.residual, ls.rhs);
  EXPECT_EQ(ls.ls_steps, 1);
  EXPECT_EQ(ls.eta, 0.5);
}

TEST(LineSearch, StepCapThrows) {
  const QuarticProblem f(1);
  const Vector x = vec({1});
  const LineSearchParams params{0.5, 0.5, 1.0, 2, LinearSolverKind::direct};
  EXPECT_THROW(backtracking_line_search(f, x, f.gradient(x), Matrix::Zero(1, 1), 1.0, params),
               std::runtime_error);
}

TEST(Extragradient, ZeroModulusIsGradientStep) {
  const Vector x = vec({1, 2});
  const Vector g_hat = vec({0.5, -1});
  EXPECT_LT((extragradient_update(x, vec({9, 9}), g_hat, 0.3, 0.0) - (x - 0.3 * g_hat)).norm(),
            1e-15);
}

TEST(Extragradient, ZeroResidualQuadraticCase) {
  const Vector out = extragradient_update(vec({1, 0}), vec({0.5, 0}), vec({0.5, 0}), 1.0, 1.0);
  EXPECT_LT((out - vec({0.5, 0})).norm(), 1e-15);
}

TEST(Extragradient, SmallStepStaysPut) {
  const Vector x = vec({1, -1});
  const Vector out = extragradient_update(x, vec({0.9, -1.1}), vec({3, 4}), 1e-12, 1.0);
  EXPECT_LT((out - x).norm(), 1e-10);
}

SnpeConfig exact_config(double alpha, double beta, double mu) {
  SnpeConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.mu = mu;
  return c;
}

TEST(SnpeStep, QuadraticExactOracle) {
  const auto f = half_norm(2);
  const SnpeConfig config = exact_config(0.5, 0.5, 1.0);
  SolverState state(config, f, vec({1, 0}));
  const auto rec = snpe_step(state, config, f);
  EXPECT_EQ(state.x, vec({0.5, 0}));
  EXPECT_EQ(state.sigma, 2.0);
  EXPECT_EQ(rec.eta, 1.0);
  EXPECT_EQ(rec.gamma, 3.0);
  EXPECT_EQ(rec.ls_steps, 1);
  EXPECT_FALSE(rec.backtracked);
  EXPECT_EQ(state.t, 1);
}

TEST(Run, QuadraticConvergesMonotonically) {
  Rng rng(3);
  const Matrix h = random_spd(5, rng, 0.5);
  QuadraticProblem f(h, random_vector(5, rng));
  const Vector x_star = h.llt().solve(f.c());
  SnpeConfig config = exact_config(0.25, 0.5, f.strong_convexity());
  config.stop.grad_norm_tol = 1e-12;
  config.x_ref = x_star;
  const auto traj = run_snpe(config, f, Vector::Zero(5));
  ASSERT_TRUE(traj.converged);
  double prev = x_star.norm();
  for (const auto& rec : traj.records) {
    EXPECT_LE(rec.dist_to_ref, prev);
    prev = rec.dist_to_ref;
  }
  EXPECT_TRUE(check_contraction(traj, config.mu, x_star).ok);
  EXPECT_TRUE(check_ls_budget(traj, config.sigma0, config.beta));
}

TEST(Run, MaxItersZeroReturnsStart) {
  const auto f = half_norm(3);
  SnpeConfig config = exact_config(0.25, 0.5, 1.0);
  config.max_iters = 0;
  const Vector x0 = vec({1, 2, 3});
  const auto traj = run_snpe(config, f, x0);
  EXPECT_TRUE(traj.records.empty());
  EXPECT_EQ(traj.x_final, x0);
  EXPECT_FALSE(traj.converged);
}

TEST(Run, NonConvergenceIsAFlagNotAnError) {
  const auto f = generate_synthetic_lse(100, 5, 0.05, 1e-3, 2);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.max_iters = 2;
  config.stop.grad_norm_tol = 1e-14;
  const auto traj = run_snpe(config, f, Vector::Zero(5));
  EXPECT_EQ(traj.records.size(), 2u);
  EXPECT_FALSE(traj.converged);
}

TEST(Run, StepSizeRecursionIsExact) {
  const auto f = generate_synthetic_lse(200, 6, 0.1, 1e-3, 4);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.oracle = {OracleMode::subsample, 10, 0.0, 3};
  config.max_iters = 40;
  const auto traj = run_snpe(config, f, Vector::Zero(6));
  double sigma = config.sigma0;
  for (const auto& rec : traj.records) {
    EXPECT_EQ(rec.sigma, sigma);
    EXPECT_EQ(rec.eta, sigma * std::pow(config.beta, rec.ls_steps - 1));
    EXPECT_EQ(rec.backtracked, rec.ls_steps > 1);
    EXPECT_EQ(rec.gamma, 1.0 + 2.0 * rec.eta * config.mu);
    EXPECT_LE(rec.accept_residual, rec.accept_rhs + 1e-12 * (1.0 + rec.accept_rhs));
    sigma = rec.eta / config.beta;
  }
}

TEST(Run, LseSubsampledReachesTightGap) {
  const auto f = generate_synthetic_lse(2000, 50, 0.05, 1e-3, 11);
  const auto ref = bench::compute_reference(f);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.oracle = {OracleMode::subsample, 50, 0.0, 1};
  config.stop.f_ref = ref.f;
  config.stop.f_gap_tol = 1e-10;
  config.x_ref = ref.x;
  config.max_iters = 400;
  const auto traj = run_snpe(config, f, Vector::Zero(50));
  ASSERT_TRUE(traj.converged);
  EXPECT_LE(traj.records.back().f_gap, 1e-10);
  EXPECT_TRUE(check_contraction(traj, config.mu, ref.x).ok);
}

TEST(Run, IterativeSolverKeepsInvariants) {
  const auto f = generate_synthetic_lse(300, 10, 0.1, 1e-3, 8);
  const auto ref = bench::compute_reference(f);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.linear_solver = LinearSolverKind::iterative;
  config.oracle = {OracleMode::sketch, 30, 0.0, 2};
  config.stop.grad_norm_tol = 1e-9;
  config.keep_hessian_snapshots = true;
  config.max_iters = 300;
  const auto traj = run_snpe(config, f, Vector::Zero(10));
  ASSERT_TRUE(traj.converged);
  for (const auto& rec : traj.records) {
    EXPECT_TRUE(check_hpe_condition(rec.x, rec.x_hat, rec.eta, config.mu, f.gradient(rec.x_hat),
                                    config.alpha).ok);
    const auto b = check_step_size_lower_bound(rec, f, config.alpha, config.beta, config.mu,
                                               LinearSolverKind::iterative);
    EXPECT_TRUE(b.ok) << "t=" << rec.t;
  }
  EXPECT_TRUE(check_contraction(traj, config.mu, ref.x).ok);
}

TEST(Run, DisabledExtragradientUsesProximalPoint) {
  const auto f = generate_synthetic_lse(100, 4, 0.2, 1e-2, 1);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-2);
  config.disable_extragradient = true;
  config.max_iters = 5;
  const auto traj = run_snpe(config, f, Vector::Zero(4));
  for (const auto& rec : traj.records) EXPECT_EQ(rec.x_next, rec.x_hat);
}

TEST(Run, DeterministicForFixedSeed) {
  const auto f = generate_synthetic_lse(200, 6, 0.1, 1e-3, 4);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.oracle = {OracleMode::sketch, 12, 0.0, 77};
  config.max_iters = 25;
  const auto a = run_snpe(config, f, Vector::Zero(6));
  const auto b = run_snpe(config, f, Vector::Zero(6));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].x_next, b.records[i].x_next);
    EXPECT_EQ(a.records[i].eta, b.records[i].eta);
  }
}

TEST(Npe, MatchesSnpeWithExactOracleAndNoAveraging) {
  const auto f = generate_synthetic_lse(200, 6, 0.1, 1e-3, 4);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.max_iters = 20;
  config.averaging = WeightScheme::current();
  const auto snpe = run_snpe(config, f, Vector::Zero(6));
  SnpeConfig noisy = config;
  noisy.oracle = {OracleMode::subsample, 5, 0.0, 9};
  noisy.averaging = WeightScheme::log_power();
  const auto npe = run_npe(noisy, f, Vector::Zero(6));
  EXPECT_EQ(npe.solver, "npe");
  ASSERT_EQ(npe.records.size(), snpe.records.size());
  for (std::size_t i = 0; i < npe.records.size(); ++i) {
    EXPECT_EQ(npe.records[i].x_next, snpe.records[i].x_next);
    EXPECT_EQ(npe.records[i].eta, snpe.records[i].eta);
    EXPECT_EQ(npe.records[i].ls_steps, snpe.records[i].ls_steps);
  }
}

TEST(Config, Validation) {
  const auto f = half_norm(2);
  SnpeConfig c = exact_config(0.25, 0.5, 2.0);
  EXPECT_THROW(run_snpe(c, f, Vector::Zero(2)), std::invalid_argument);
  c.mu = 1.0;
  c.stop.f_gap_tol = 1e-8;
  EXPECT_THROW(run_snpe(c, f, Vector::Zero(2)), std::invalid_argument);
  c.stop.f_gap_tol.reset();
  EXPECT_THROW(run_snpe(c, f, Vector::Zero(3)), std::invalid_argument);
  for (double bad : {0.0, 1.0}) {
    SnpeConfig a = exact_config(bad, 0.5, 1.0);
    EXPECT_THROW(a.validate(), std::invalid_argument);
    SnpeConfig b = exact_config(0.25, bad, 1.0);
    EXPECT_THROW(b.validate(), std::invalid_argument);
  }
  SnpeConfig s = exact_config(0.25, 0.5, 1.0);
  s.sigma0 = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(StochasticNewton, ExactQuadraticConvergesInOneStep) {
  Rng rng(5);
  const Matrix h = random_spd(4, rng, 0.5);
  QuadraticProblem f(h, random_vector(4, rng));
  SnpeConfig config = exact_config(0.25, 0.5, f.strong_convexity());
  config.stop.grad_norm_tol = 1e-10;
  const auto traj = run_stochastic_newton(config, f, Vector::Zero(4));
  ASSERT_TRUE(traj.converged);
  EXPECT_EQ(traj.records.size(), 1u);
  EXPECT_LE((traj.x_final - h.llt().solve(f.c())).norm(), 1e-12);
}

TEST(StochasticNewton, FlagsFlooredSolves) {
  // Rank-one subsampled Hessian with no ridge is singular in 3-D.
  const auto f = generate_synthetic_lse(20, 3, 0.5, 0.0, 2);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-6);
  config.oracle = {OracleMode::subsample, 1, 0.0, 1};
  config.max_iters = 1;
  SolverState state(config, f, Vector::Zero(3));
  const auto rec = stochastic_newton_step(state, config, f);
  EXPECT_TRUE(rec.floored);
  EXPECT_TRUE(state.x.allFinite());
}

TEST(StochasticNewton, ArmijoNeverIncreasesObjective) {
  const auto f = generate_synthetic_lse(500, 10, 0.05, 1e-3, 6);
  SnpeConfig config = exact_config(0.25, 0.5, 1e-3);
  config.oracle = {OracleMode::subsample, 10, 0.0, 4};
  config.max_iters = 30;
  StochasticNewtonOptions options;
  options.armijo = true;
  const auto traj = run_stochastic_newton(config, f, Vector::Zero(10), options);
  double prev = f.value(Vector::Zero(10));
  for (const auto& rec : traj.records) {
    EXPECT_LE(rec.f_value, prev + 1e-12);
    EXPECT_EQ(rec.backtracked, rec.ls_steps > 1);
    prev = rec.f_value;
  }
}

TEST(StochasticNewton, SuperlinearOnWellConditionedLse) {
  const auto f = generate_synthetic_lse(200, 5, 1.0, 0.1, 3);
  const auto ref = bench::compute_reference(f);
  SnpeConfig config = exact_config(0.25, 0.5, 0.1);
  config.stop.grad_norm_tol = 1e-13;
  config.max_iters = 50;
  const Vector x0 = Vector::Constant(5, 0.3);
  const auto traj = run_stochastic_newton(config, f, x0);
  ASSERT_TRUE(traj.converged);
  const auto ratios = contraction_ratio_series(traj, ref.x);
  ASSERT_GE(ratios.size(), 4u);
  const std::size_t n = ratios.size();
  EXPECT_LT(ratios[n - 2], ratios[n - 3]);
  EXPECT_LT(ratios[n - 3], ratios[n - 4]);
  EXPECT_LT(ratios[n - 2], 0.1);
}

TEST(DampedNewton, QuadraticOneStep) {
  Rng rng(8);
  const Matrix h = random_spd(3, rng, 1.0);
  QuadraticProblem f(h, random_vector(3, rng));
  BaselineConfig config;
  config.stop.grad_norm_tol = 1e-10;
  const auto traj = run_damped_newton(config, f, Vector::Zero(3));
  ASSERT_TRUE(traj.converged);
  ASSERT_EQ(traj.records.size(), 1u);
  EXPECT_EQ(traj.records[0].eta, 1.0);
  EXPECT_FALSE(traj.records[0].backtracked);
}

TEST(Agd, OneDimensionalQuadraticOneStep) {
  QuadraticProblem f(Matrix::Constant(1, 1, 2.0), Vector::Zero(1));
  BaselineConfig config;
  config.mu = 2.0;
  config.stop.grad_norm_tol = 1e-14;
  const auto traj = run_agd(config, f, vec({3.0}));
  ASSERT_TRUE(traj.converged);
  EXPECT_EQ(traj.records.size(), 1u);
  EXPECT_LE(std::abs(traj.x_final(0)), 1e-14);
}

TEST(Agd, ConvergesOnLse) {
  const auto f = generate_synthetic_lse(200, 5, 0.5, 0.1, 3);
  BaselineConfig config;
  config.mu = 0.1;
  config.stop.grad_norm_tol = 1e-8;
  config.max_iters = 5000;
  const auto traj = run_agd(config, f, Vector::Zero(5));
  EXPECT_TRUE(traj.converged);
}

TEST(PowerIteration, LargestEigenvalue) {
  Matrix h = Matrix::Zero(3, 3);
  h.diagonal() << 1.0, 5.0, 2.0;
  const auto r = power_iteration(h, 500, 1e-12);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 5.0, 1e-9);
}

}  // namespace
}  // namespace snpe
