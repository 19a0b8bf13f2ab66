#include "snpe/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace snpe {

HpeCheck check_hpe_condition(const Vector& x, const Vector& x_hat, double eta, double mu,
                             const Vector& g_hat, double alpha) {
  HpeCheck out;
  const Vector d = x_hat - x;
  out.lhs = (d + eta * g_hat).norm();
  out.rhs = alpha * std::sqrt(1.0 + 2.0 * eta * mu) * d.norm();
  out.ok = out.lhs <= out.rhs * (1.0 + 1e-12) + 1e-14;
  return out;
}

ContractionReport check_contraction_distances(std::span<const double> dist,
                                              std::span<const double> eta, double mu,
                                              double rel_tol) {
  if (!dist.empty() && dist.size() != eta.size() + 1) {
    throw std::invalid_argument("distance series must have one more entry than the step sizes");
  }
  ContractionReport report;
  for (std::size_t t = 0; t < eta.size(); ++t) {
    ContractionVerdict v;
    v.t = static_cast<int>(t);
    v.lhs = dist[t + 1] * dist[t + 1] * (1.0 + 2.0 * eta[t] * mu);
    v.rhs = dist[t] * dist[t];
    v.ok = v.lhs <= v.rhs * (1.0 + rel_tol);
    if (!v.ok) {
      report.ok = false;
      ++report.failures;
    }
    report.verdicts.push_back(v);
  }
  return report;
}

ContractionReport check_contraction(const Trajectory& trajectory, double mu, const Vector& x_ref,
                                    double rel_tol) {
  std::vector<double> dist;
  std::vector<double> eta;
  for (const auto& rec : trajectory.records) {
    if (dist.empty()) dist.push_back((rec.x - x_ref).norm());
    dist.push_back((rec.x_next - x_ref).norm());
    eta.push_back(rec.eta);
  }
  return check_contraction_distances(dist, eta, mu, rel_tol);
}

bool check_ls_budget(std::span<const int> ls_steps, std::span<const double> eta, double sigma0,
                     double beta, double tol) {
  if (ls_steps.size() != eta.size()) throw std::invalid_argument("series length mismatch");
  const double log_inv_beta = std::log(1.0 / beta);
  long cumulative = 0;
  for (std::size_t i = 0; i < ls_steps.size(); ++i) {
    cumulative += ls_steps[i];
    const double t = static_cast<double>(i + 1);
    const double bound = 2.0 * t - 1.0 + std::log(sigma0 / eta[i]) / log_inv_beta;
    if (!(static_cast<double>(cumulative) <= bound + tol)) return false;
  }
  return true;
}

bool check_ls_budget(const Trajectory& trajectory, double sigma0, double beta, double tol) {
  std::vector<int> ls;
  std::vector<double> eta;
  for (const auto& rec : trajectory.records) {
    ls.push_back(rec.ls_steps);
    eta.push_back(rec.eta);
  }
  return check_ls_budget(ls, eta, sigma0, beta, tol);
}

StepSizeBound check_step_size_lower_bound(const IterationRecord& record, const Problem& problem,
                                          double alpha, double beta, double mu,
                                          LinearSolverKind solver, double rel_tol) {
  StepSizeBound out;
  if (!record.backtracked) return out;
  if (!record.rejected) throw std::invalid_argument("backtracked record lacks its rejected candidate");
  if (!record.hessian_snapshot) throw std::invalid_argument("record has no Hessian snapshot");
  out.applicable = true;

  const Vector& x = record.x;
  const Vector& x_tilde = record.rejected->x;
  const Vector step = x_tilde - x;
  const Vector err =
      problem.gradient(x_tilde) - problem.gradient(x) - (*record.hessian_snapshot) * step;
  const double e = err.norm();
  const double s = step.norm();
  out.rejected_distance = s;
  out.accepted_distance = (record.x_hat - x).norm();

  double first = alpha * beta * s / e;
  double second = 2.0 * alpha * alpha * beta * mu * s * s / (e * e);
  double distance_factor = 1.0 / beta;
  if (solver == LinearSolverKind::iterative) {
    first *= 0.5;
    second *= 0.25;
    distance_factor = 3.0 / beta;
  }
  out.bound = e > 0.0 ? std::max(first, second) : std::numeric_limits<double>::infinity();
  const bool eta_ok = record.eta >= out.bound * (1.0 - rel_tol);
  const bool dist_ok = s <= distance_factor * out.accepted_distance * (1.0 + rel_tol);
  out.ok = eta_ok && dist_ok;
  return out;
}

std::vector<double> contraction_ratio_series(const Trajectory& trajectory, const Vector& x_ref) {
  std::vector<double> ratios;
  ratios.reserve(trajectory.records.size());
  for (const auto& rec : trajectory.records) {
    const double before = (rec.x - x_ref).norm();
    const double after = (rec.x_next - x_ref).norm();
    ratios.push_back(before > 0.0 ? after / before : std::numeric_limits<double>::quiet_NaN());
  }
  return ratios;
}

std::optional<std::size_t> detect_superlinear_onset(std::span<const double> ratios) {
  constexpr std::size_t kWindow = 5;
  if (ratios.size() < kWindow) return std::nullopt;
  std::vector<double> logs;
  logs.reserve(ratios.size());
  for (double r : ratios) logs.push_back(std::log(std::max(r, 1e-300)));

  std::vector<double> filtered(logs.size());
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const std::size_t lo = k >= kWindow / 2 ? k - kWindow / 2 : 0;
    const std::size_t hi = std::min(logs.size(), k + kWindow / 2 + 1);
    std::vector<double> w(logs.begin() + static_cast<long>(lo), logs.begin() + static_cast<long>(hi));
    std::nth_element(w.begin(), w.begin() + static_cast<long>(w.size() / 2), w.end());
    filtered[k] = w[w.size() / 2];
  }

  std::size_t onset = filtered.size() - 1;
  while (onset > 0 && filtered[onset - 1] >= filtered[onset]) --onset;
  if (filtered.size() - onset < 3 || !(filtered.back() < filtered[onset])) return std::nullopt;
  return onset;
}

// ---------------------------------------------------------------------------

void TheoryConstants::validate() const {
  const bool positive = kappa > 0 && upsilon > 0 && delta > 0 && nu > 0 && initial_distance > 0 &&
                        hessian_lipschitz > 0 && m1 > 0 && mu > 0 && alpha > 0 && beta > 0 &&
                        sigma0 > 0 && d > 0;
  if (!positive) throw std::invalid_argument("theory constants must all be positive");
  if (!(delta < 1 && nu < 1 && alpha < 1 && beta < 1)) {
    throw std::invalid_argument("delta, nu, alpha, beta must lie in (0, 1)");
  }
  if (d / delta < std::exp(1.0)) throw std::invalid_argument("need d / delta >= e");
}

namespace {

double log_base(double x, double base) { return std::log(x) / std::log(base); }

// Iterations for the linear phase to reach the local neighbourhood; zero when
// the start is already inside it.
double localization_log(const TheoryConstants& c) {
  return std::max(0.0, std::log(c.hessian_lipschitz * c.initial_distance / (c.nu * c.mu)));
}

}  // namespace

FirstTransitionTerms first_transition_terms(const TheoryConstants& c) {
  const double ratio = c.upsilon / c.kappa;
  FirstTransitionTerms t;
  t.noise = 256.0 * ratio * ratio * std::log(8.0 * c.d * ratio / c.delta);
  t.concentration = 4.0 * std::log(c.d / c.delta);
  t.step_size = log_base(c.alpha * c.beta / (3.0 * c.m1 * c.sigma0), 1.0 / c.beta);
  return t;
}

PhaseReport transition_points_uniform(const TheoryConstants& c) {
  c.validate();
  PhaseReport r;
  const auto terms = first_transition_terms(c);
  r.t1 = std::max({terms.noise, terms.concentration, terms.step_size});
  r.i = r.t1 + 2.0 * (1.0 + 3.0 * c.kappa / (2.0 * c.alpha * c.beta)) * localization_log(c);
  const double u = c.upsilon;
  r.t2 = std::max(256.0 * u * u / (c.nu * c.nu) * std::log(8.0 * c.d * u / (c.delta * c.nu)),
                  c.kappa * r.i / c.nu - 1.0);

  // 64 (T + 1) log(d (T + 1) / delta) = 9 kappa^2 I^2 / Upsilon^2, lhs increasing in T.
  const double rhs = 9.0 * c.kappa * c.kappa * r.i * r.i / (u * u);
  auto lhs = [&](double t) { return 64.0 * (t + 1.0) * std::log(c.d * (t + 1.0) / c.delta); };
  double lo = 0.0;
  double hi = 1e12;
  if (lhs(lo) >= rhs) {
    r.t3 = 0.0;
  } else {
    if (lhs(hi) < rhs) throw std::runtime_error("third transition point lies beyond 1e12");
    for (int k = 0; k < 400; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (lhs(mid) < rhs) lo = mid; else hi = mid;
      if (std::abs(lhs(hi) - rhs) <= 1e-9 * rhs || hi - lo <= 0.0) break;
    }
    r.t3 = hi;
  }
  r.t3_residual = std::abs(lhs(r.t3) - rhs) / rhs;
  return r;
}

namespace {

constexpr long kScanCap = 10'000'000;

// sup{t >= start : q(t) >= threshold} + 1 over integers, where q eventually
// decreases. The scan stops at the first failure on a decreasing stretch.
std::optional<double> scan_last_satisfying_plus_one(const std::function<double(double)>& q,
                                                    double threshold, long start) {
  long last = -1;
  for (long t = start; t <= start + kScanCap; ++t) {
    const double v = q(double(t));
    if (v >= threshold) {
      last = t;
    } else if (q(double(t + 1)) < v) {
      return last >= 0 ? double(last + 1) : double(start);
    }
  }
  return std::nullopt;
}

}  // namespace

PhaseReport transition_points_weighted(const TheoryConstants& c, const WeightScheme& scheme) {
  c.validate();
  scheme.validate();
  PhaseReport r;
  auto q = [&](double t) {
    return std::log(c.d * (t + 1.0) / c.delta) * scheme.log_derivative(t);
  };

  const double floor_t = log_base(c.alpha * c.beta / (3.0 * c.m1 * c.sigma0), 1.0 / c.beta);
  const long start = std::max(0L, static_cast<long>(std::ceil(floor_t)));
  const double th1 = std::pow(std::min(1.0, c.kappa / (8.0 * c.upsilon)), 2);
  const auto u1 = scan_last_satisfying_plus_one(q, th1, start);
  if (!u1) throw ScanCapExceeded(fmt::format("scan for U1 exceeded {} iterations", kScanCap), r);
  r.u1 = *u1;

  const double th2 = std::pow(std::min(1.0, 1.0 / (8.0 * c.upsilon)), 2);
  const auto jp = scan_last_satisfying_plus_one(q, th2, 0);
  if (!jp) throw ScanCapExceeded(fmt::format("scan for J' exceeded {} iterations", kScanCap), r);
  r.j_prime = *jp;
  r.j = std::max(r.u1 + 2.0 * (1.0 + 2.0 * c.kappa / (c.alpha * c.beta)) * localization_log(c),
                 r.j_prime);

  // sup{t : w(t) <= w(J) kappa / nu}; w is nondecreasing so the first failure ends the scan.
  const double limit = scheme.log_weight(r.j) + std::log(c.kappa / c.nu);
  long last = -1;
  for (long t = 0;; ++t) {
    if (t > kScanCap) {
      PhaseReport partial = r;
      partial.u2 = double(last);
      throw ScanCapExceeded(fmt::format("scan for U2 exceeded {} iterations", kScanCap), partial);
    }
    if (scheme.log_weight(double(t)) <= limit) {
      last = t;
    } else {
      break;
    }
  }
  r.u2 = double(std::max(last, 0L));
  return r;
}

double max_admissible_nu_uniform(double alpha, double beta) {
  const double a = 5.0 / (2.0 * alpha * beta * std::sqrt((1.0 - alpha * alpha) * beta));
  const double b = 25.0 / (alpha * std::sqrt(2.0 * beta));
  return 1.0 / (a + b);
}

double max_admissible_nu_weighted(double alpha, double beta, double psi) {
  const double a = 1.0 / (2.0 * alpha * beta * std::sqrt((1.0 - alpha * alpha) * beta));
  const double b = 5.0 / (alpha * std::sqrt(beta));
  return 1.0 / (psi * (a + b));
}

}  // namespace snpe
