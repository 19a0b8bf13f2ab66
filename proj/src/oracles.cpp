#include "snpe/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace snpe {

std::string_view to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::exact: return "exact";
    case OracleMode::subsample: return "subsample";
    case OracleMode::sketch: return "sketch";
    case OracleMode::additive_noise: return "additive_noise";
  }
  return "unknown";
}

OracleMode oracle_mode_from_string(std::string_view name) {
  if (name == "exact") return OracleMode::exact;
  if (name == "subsample") return OracleMode::subsample;
  if (name == "sketch") return OracleMode::sketch;
  if (name == "additive_noise") return OracleMode::additive_noise;
  throw std::invalid_argument(fmt::format("unknown oracle mode '{}'", name));
}

void OracleConfig::validate() const {
  if ((mode == OracleMode::subsample || mode == OracleMode::sketch) && sample_size < 1) {
    throw std::invalid_argument("oracle sample size must be at least 1");
  }
  if (mode == OracleMode::additive_noise && !(noise_level > 0.0)) {
    throw std::invalid_argument("additive noise level must be positive");
  }
}

namespace {

void add_ridge(Matrix& h, double ridge) {
  if (ridge != 0.0) h.diagonal().array() += ridge;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

StochasticHessianDraw draw_subsampled(const Problem& problem, const Vector& x, int s, Rng& rng) {
  if (s < 1) throw std::invalid_argument("subsample size must be at least 1");
  const Index d = problem.dimension();
  StochasticHessianDraw out;
  out.mode = OracleMode::subsample;

  if (const auto* fs = dynamic_cast<const FiniteSumQuadraticProblem*>(&problem)) {
    const Index n = fs->size();
    const Index take = std::min<Index>(s, n);
    // Partial Fisher-Yates: the first `take` entries are a uniform subset.
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    Matrix h = Matrix::Zero(d, d);
    for (Index k = 0; k < take; ++k) {
      std::uniform_int_distribution<Index> pick(k, n - 1);
      std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
      h += fs->component(idx[static_cast<std::size_t>(k)]).hessian;
    }
    out.hessian = h / double(take);
    return out;
  }

  if (const auto* lse = dynamic_cast<const LogSumExpProblem*>(&problem)) {
    const Vector p = lse->softmax(x);
    const Vector abar = lse->a().transpose() * p;
    std::discrete_distribution<Index> pick(p.data(), p.data() + p.size());
    Matrix rows(s, d);
    for (int j = 0; j < s; ++j) rows.row(j) = lse->a().row(pick(rng)) - abar.transpose();
    Matrix h = Matrix::Zero(d, d);
    h.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose(), 1.0 / (lse->rho() * s));
    h = h.selfadjointView<Eigen::Lower>();
    add_ridge(h, lse->ridge());
    out.hessian = std::move(h);
    return out;
  }

  throw std::invalid_argument(
      fmt::format("problem '{}' has no sampling decomposition", problem.kind()));
}

Matrix sketched_hessian(const Problem& problem, const Vector& x, const Matrix& sketch) {
  if (!problem.has_sqrt_factor()) {
    throw std::invalid_argument(
        fmt::format("problem '{}' has no square-root factor to sketch", problem.kind()));
  }
  const Matrix m = problem.sqrt_factor(x);
  if (sketch.cols() != m.rows()) {
    throw std::invalid_argument(fmt::format("sketch has {} columns, factor has {} rows",
                                            sketch.cols(), m.rows()));
  }
  const Matrix sm = sketch * m;
  Matrix h = Matrix::Zero(m.cols(), m.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(sm.transpose());
  h = h.selfadjointView<Eigen::Lower>();
  add_ridge(h, problem.ridge());
  return h;
}

StochasticHessianDraw draw_sketched(const Problem& problem, const Vector& x, int s, Rng& rng) {
  if (s < 1) throw std::invalid_argument("sketch size must be at least 1");
  if (!problem.has_sqrt_factor()) {
    throw std::invalid_argument(
        fmt::format("problem '{}' has no square-root factor to sketch", problem.kind()));
  }
  const Matrix m = problem.sqrt_factor(x);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(s)));
  Matrix sketch(s, m.rows());
  for (Index j = 0; j < sketch.cols(); ++j)
    for (Index i = 0; i < sketch.rows(); ++i) sketch(i, j) = normal(rng);
  const Matrix sm = sketch * m;
  Matrix h = Matrix::Zero(m.cols(), m.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(sm.transpose());
  h = h.selfadjointView<Eigen::Lower>();
  add_ridge(h, problem.ridge());
  StochasticHessianDraw out;
  out.mode = OracleMode::sketch;
  out.hessian = std::move(h);
  return out;
}

namespace {

Matrix gaussian_symmetric(Index d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) g(i, j) = normal(rng);
  return symmetrized(g);
}

}  // namespace

StochasticHessianDraw draw_additive_noise(const Problem& problem, const Vector& x, double scale,
                                          Rng& rng) {
  if (scale < 0.0) throw std::invalid_argument("noise scale must be nonnegative");
  StochasticHessianDraw out;
  out.mode = OracleMode::additive_noise;
  out.hessian = problem.hessian(x);
  if (scale == 0.0) return out;

  out.hessian += scale * gaussian_symmetric(out.hessian.rows(), rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(out.hessian);
  if (es.eigenvalues().minCoeff() < 0.0) {
    const Vector clipped = es.eigenvalues().cwiseMax(0.0);
    out.hessian = symmetrized(es.eigenvectors() * clipped.asDiagonal() *
                              es.eigenvectors().transpose());
    out.clipped = true;
  }
  return out;
}

double calibrate_noise_scale(Index d, double noise_level, std::uint64_t seed,
                             int calibration_draws) {
  if (!(noise_level > 0.0)) throw std::invalid_argument("noise level must be positive");
  if (calibration_draws < 1) throw std::invalid_argument("need at least one calibration draw");
  Rng rng(mix_seed(seed ^ 0xca11b7a7e0000000ULL));
  double total = 0.0;
  for (int k = 0; k < calibration_draws; ++k) {
    total += symmetric_spectral_norm(gaussian_symmetric(d, rng));
  }
  return noise_level / (total / calibration_draws);
}

HessianOracle::HessianOracle(OracleConfig config) : config_(config), rng_(config.seed) {
  config_.validate();
}

StochasticHessianDraw HessianOracle::draw(const Problem& problem, const Vector& x) {
  StochasticHessianDraw out;
  switch (config_.mode) {
    case OracleMode::exact:
      out.hessian = problem.hessian(x);
      out.mode = OracleMode::exact;
      break;
    case OracleMode::subsample:
      out = draw_subsampled(problem, x, config_.sample_size, rng_);
      break;
    case OracleMode::sketch:
      out = draw_sketched(problem, x, config_.sample_size, rng_);
      break;
    case OracleMode::additive_noise:
      if (!noise_scale_ || calibrated_dim_ != problem.dimension()) {
        noise_scale_ = calibrate_noise_scale(problem.dimension(), config_.noise_level, config_.seed);
        calibrated_dim_ = problem.dimension();
      }
      out = draw_additive_noise(problem, x, *noise_scale_, rng_);
      break;
  }
  out.index = draws_++;
  if (out.clipped) ++clip_events_;
  return out;
}

double estimate_noise_level(HessianOracle& oracle, const Problem& problem, const Vector& x,
                            int draws) {
  if (draws < 1) throw std::invalid_argument("need at least one draw");
  const Matrix h = problem.hessian(x);
  double total = 0.0;
  for (int k = 0; k < draws; ++k) {
    total += symmetric_spectral_norm(oracle.draw(problem, x).hessian - h);
  }
  return total / draws;
}

}  // namespace snpe
