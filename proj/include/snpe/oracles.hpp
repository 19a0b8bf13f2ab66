#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "snpe/problems.hpp"
#include "snpe/types.hpp"

namespace snpe {

enum class OracleMode { exact, subsample, sketch, additive_noise };

std::string_view to_string(OracleMode mode);
OracleMode oracle_mode_from_string(std::string_view name);

struct OracleConfig {
  OracleMode mode = OracleMode::exact;
  /// Sample size for subsample / sketch modes.
  int sample_size = 1;
  /// Target mean spectral noise norm for additive_noise mode.
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StochasticHessianDraw {
  Matrix hessian;
  OracleMode mode = OracleMode::exact;
  std::uint64_t index = 0;
  bool clipped = false;
};

/// Subsampled Hessian.
///
/// Finite sums: mean of s component Hessians drawn uniformly without
/// replacement (s is capped at n). Log-sum-exp: s indices drawn i.i.d. from the
/// softmax weights p, data part (1/rho)(1/s) sum_j (a_j - abar)(a_j - abar)^T,
/// plus the ridge. Both are unbiased and PSD.
StochasticHessianDraw draw_subsampled(const Problem& problem, const Vector& x, int s, Rng& rng);

/// M^T S^T S M + ridge * I for an explicit s x n sketch S.
Matrix sketched_hessian(const Problem& problem, const Vector& x, const Matrix& sketch);

/// Gaussian sketch with i.i.d. Normal(0, 1/s) entries, so E[S^T S] = I.
StochasticHessianDraw draw_sketched(const Problem& problem, const Vector& x, int s, Rng& rng);

/// H(x) + scale * (G + G^T) / 2 with G i.i.d. standard normal, eigenvalue
/// clipped at zero when the perturbation leaves the PSD cone.
StochasticHessianDraw draw_additive_noise(const Problem& problem, const Vector& x, double scale,
                                          Rng& rng);

/// Scale c such that E||c (G + G^T)/2|| = noise_level for d x d Gaussian G,
/// estimated from a dedicated calibration stream.
double calibrate_noise_scale(Index d, double noise_level, std::uint64_t seed,
                             int calibration_draws = 4000);

/// Stateful oracle owning one RNG stream. Not thread-safe; use one per run.
class HessianOracle {
 public:
  explicit HessianOracle(OracleConfig config);

  StochasticHessianDraw draw(const Problem& problem, const Vector& x);

  const OracleConfig& config() const { return config_; }
  std::uint64_t draws() const { return draws_; }
  std::uint64_t clip_events() const { return clip_events_; }

 private:
  OracleConfig config_;
  Rng rng_;
  std::uint64_t draws_ = 0;
  std::uint64_t clip_events_ = 0;
  std::optional<double> noise_scale_;
  Index calibrated_dim_ = -1;
};

/// Monte Carlo mean of ||H_hat - H(x)||_2 over `draws` oracle calls.
double estimate_noise_level(HessianOracle& oracle, const Problem& problem, const Vector& x,
                            int draws);

}  // namespace snpe
