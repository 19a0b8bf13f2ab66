#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snpe/averaging.hpp"
#include "snpe/problems.hpp"
#include "snpe/solvers.hpp"
#include "snpe/types.hpp"

namespace snpe {

// ---------------------------------------------------------------------------
// Per-iteration guarantees, rechecked from recorded data.

struct HpeCheck {
  bool ok = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// ||x_hat - x + eta g_hat|| <= alpha sqrt(1 + 2 eta mu) ||x_hat - x||, accepted
/// when lhs <= rhs (1 + 1e-12) + 1e-14.
HpeCheck check_hpe_condition(const Vector& x, const Vector& x_hat, double eta, double mu,
                             const Vector& g_hat, double alpha);

struct ContractionVerdict {
  int t = 0;
  double lhs = 0.0;  // ||x_{t+1} - x*||^2 (1 + 2 eta_t mu)
  double rhs = 0.0;  // ||x_t - x*||^2
  bool ok = true;
};

struct ContractionReport {
  std::vector<ContractionVerdict> verdicts;
  bool ok = true;
  int failures = 0;
};

/// ||x_{t+1} - x*||^2 (1 + 2 eta_t mu) <= ||x_t - x*||^2 (1 + rel_tol) per step.
ContractionReport check_contraction(const Trajectory& trajectory, double mu, const Vector& x_ref,
                                    double rel_tol = 1e-8);

/// Same check on a distance series: dist[0] = ||x_0 - x*||, dist[t+1] after step t.
ContractionReport check_contraction_distances(std::span<const double> dist,
                                              std::span<const double> eta, double mu,
                                              double rel_tol = 1e-8);

/// Cumulative line-search count after t iterations versus
/// 2t - 1 + log_{1/beta}(sigma0 / eta_{t-1}), checked at every prefix.
bool check_ls_budget(std::span<const int> ls_steps, std::span<const double> eta, double sigma0,
                     double beta, double tol = 1e-9);
bool check_ls_budget(const Trajectory& trajectory, double sigma0, double beta, double tol = 1e-9);

struct StepSizeBound {
  bool applicable = false;
  bool ok = true;
  double bound = 0.0;           // max of the two lower bounds
  double rejected_distance = 0.0;  // ||x_tilde - x||
  double accepted_distance = 0.0;  // ||x_hat - x||
};

/// Lower bound on a backtracked step size from its last rejected candidate.
/// The iterative-solver variant halves both bounds and relaxes the distance
/// ratio from 1/beta to 3/beta. Non-backtracked records are vacuously fine.
/// Throws std::invalid_argument when the Hessian snapshot is missing.
StepSizeBound check_step_size_lower_bound(const IterationRecord& record, const Problem& problem,
                                          double alpha, double beta, double mu,
                                          LinearSolverKind solver = LinearSolverKind::direct,
                                          double rel_tol = 1e-8);

/// ||x_{t+1} - x*|| / ||x_t - x*|| for every recorded step.
std::vector<double> contraction_ratio_series(const Trajectory& trajectory, const Vector& x_ref);

/// Start of the superlinear regime: the first index after which the
/// median-filtered (window 5) log-ratio keeps decreasing to the end of the
/// series. Heuristic, for reporting only.
std::optional<std::size_t> detect_superlinear_onset(std::span<const double> ratios);

// ---------------------------------------------------------------------------
// Theory-side transition points.

struct TheoryConstants {
  double kappa = 1.0;    // M1 / mu
  double upsilon = 1.0;  // Upsilon_E / mu
  double delta = 0.1;
  double nu = 0.01;
  double initial_distance = 1.0;  // D
  double hessian_lipschitz = 1.0;  // L2
  double m1 = 1.0;
  double mu = 1.0;
  double alpha = 0.25;
  double beta = 0.5;
  double sigma0 = 1.0;
  double d = 1.0;

  void validate() const;
};

struct PhaseReport {
  // Uniform averaging.
  double t1 = 0.0;
  double i = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double t3_residual = 0.0;  // |lhs - rhs| / rhs at the returned root
  // Weighted averaging.
  double u1 = 0.0;
  double j = 0.0;
  double j_prime = 0.0;
  double u2 = 0.0;
  std::vector<std::size_t> empirical_phase_boundaries;
};

/// Components of the first transition point, exposed for inspection.
struct FirstTransitionTerms {
  double noise = 0.0;
  double concentration = 0.0;
  double step_size = 0.0;
};
FirstTransitionTerms first_transition_terms(const TheoryConstants& c);

PhaseReport transition_points_uniform(const TheoryConstants& c);

/// Raised when a weighted transition-point scan passes 1e7 iterations; carries
/// whatever was computed before the cap was hit.
class ScanCapExceeded : public std::runtime_error {
 public:
  ScanCapExceeded(const std::string& what, PhaseReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const PhaseReport& partial() const { return partial_; }

 private:
  PhaseReport partial_;
};

PhaseReport transition_points_weighted(const TheoryConstants& c, const WeightScheme& scheme);

/// Largest nu allowed by the superlinear-phase condition for uniform averaging.
double max_admissible_nu_uniform(double alpha, double beta);
/// Same for weighted averaging with regularity constant psi.
double max_admissible_nu_weighted(double alpha, double beta, double psi);

}  // namespace snpe
