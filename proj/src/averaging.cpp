#include "snpe/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace snpe {

std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::uniform: return "uniform";
    case WeightKind::power: return "power";
    case WeightKind::log_power: return "log_power";
    case WeightKind::current: return "current";
  }
  return "unknown";
}

WeightKind weight_kind_from_string(std::string_view name) {
  if (name == "uniform") return WeightKind::uniform;
  if (name == "power") return WeightKind::power;
  if (name == "log_power") return WeightKind::log_power;
  if (name == "current") return WeightKind::current;
  throw std::invalid_argument(fmt::format("unknown averaging kind '{}'", name));
}

void WeightScheme::validate() const {
  if (kind == WeightKind::power && !(power >= 1.0)) {
    throw std::invalid_argument("power weights need p >= 1");
  }
  if (kind == WeightKind::log_power && !(log_base > 1.0)) {
    throw std::invalid_argument("log base must exceed 1");
  }
}

namespace {

double exponent(const WeightScheme& s) {
  return s.kind == WeightKind::power ? s.power : 1.0;
}

void require_weight_function(const WeightScheme& s) {
  if (s.kind == WeightKind::current) {
    throw std::logic_error("the 'current' scheme has no weight function");
  }
}

}  // namespace

double WeightScheme::log_weight(double t) const {
  require_weight_function(*this);
  if (t <= -1.0) return -std::numeric_limits<double>::infinity();
  const double l1 = std::log1p(t);
  switch (kind) {
    case WeightKind::uniform:
    case WeightKind::power:
      return exponent(*this) * l1;
    case WeightKind::log_power:
      return l1 * std::log(t + 4.0) / std::log(log_base);
    case WeightKind::current:
      break;
  }
  return l1;
}

double WeightScheme::log_derivative(double t) const {
  require_weight_function(*this);
  switch (kind) {
    case WeightKind::uniform:
    case WeightKind::power:
      return exponent(*this) / (t + 1.0);
    case WeightKind::log_power:
      return (std::log(t + 4.0) / (t + 1.0) + std::log1p(t) / (t + 4.0)) / std::log(log_base);
    case WeightKind::current:
      break;
  }
  return 0.0;
}

double WeightScheme::second_derivative_ratio(double t) const {
  const double g1 = log_derivative(t);
  double g2 = 0.0;
  switch (kind) {
    case WeightKind::uniform:
    case WeightKind::power:
      g2 = -exponent(*this) / ((t + 1.0) * (t + 1.0));
      break;
    case WeightKind::log_power: {
      const double a = t + 1.0;
      const double b = t + 4.0;
      g2 = (2.0 / (a * b) - std::log(b) / (a * a) - std::log(a) / (b * b)) / std::log(log_base);
      break;
    }
    case WeightKind::current:
      break;
  }
  return g1 * g1 + g2;
}

double weight_ratio(const WeightScheme& scheme, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("weight_ratio needs t >= 0");
  if (t == 0 || scheme.kind == WeightKind::current) return 0.0;
  const double td = static_cast<double>(t);
  return std::exp(scheme.log_weight(td - 1.0) - scheme.log_weight(td));
}

std::vector<double> explicit_weights(const WeightScheme& scheme, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("explicit_weights needs t >= 0");
  if (scheme.kind == WeightKind::current) {
    std::vector<double> z(static_cast<std::size_t>(t + 1), 0.0);
    z.back() = 1.0;
    return z;
  }
  const double lt = scheme.log_weight(static_cast<double>(t));
  std::vector<double> z(static_cast<std::size_t>(t + 1));
  for (std::int64_t i = 0; i <= t; ++i) {
    const double hi = std::exp(scheme.log_weight(double(i)) - lt);
    const double lo = std::exp(scheme.log_weight(double(i) - 1.0) - lt);
    z[static_cast<std::size_t>(i)] = hi - lo;
  }
  return z;
}

HessianAverager::HessianAverager(WeightScheme scheme, Index dimension)
    : scheme_(scheme), average_(Matrix::Zero(dimension, dimension)) {
  scheme_.validate();
}

void HessianAverager::update(const Matrix& estimate) {
  if (estimate.rows() != average_.rows() || estimate.cols() != average_.cols()) {
    throw std::invalid_argument(fmt::format("Hessian estimate is {}x{}, averager holds {}x{}",
                                            estimate.rows(), estimate.cols(), average_.rows(),
                                            average_.cols()));
  }
  const double scale = 1.0 + (estimate.size() ? estimate.cwiseAbs().maxCoeff() : 0.0);
  if (asymmetry(estimate) > 1e-10 * scale) {
    throw std::invalid_argument("Hessian estimate is not symmetric");
  }
  ++t_;
  if (t_ == 0) {
    average_ = estimate;
    return;
  }
  const double r = weight_ratio(scheme_, t_);
  average_ = r * average_ + (1.0 - r) * estimate;
}

WeightSchemeReport validate_weight_scheme(const WeightScheme& scheme, int horizon) {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  scheme.validate();
  WeightSchemeReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  if (scheme.kind == WeightKind::current) {
    report.psi_estimate = std::numeric_limits<double>::infinity();
    fail("'current' keeps only the newest estimate and is not a weight function");
    return report;
  }

  // (ii) w(-1) = 0 and w(t) > 0 on t >= 0, plus monotonicity.
  if (scheme.log_weight(-1.0) != -std::numeric_limits<double>::infinity()) {
    fail("(ii) w(-1) != 0");
  }
  for (int t = 0; t <= horizon; ++t) {
    const double lw = scheme.log_weight(t);
    if (!std::isfinite(lw)) {
      fail(fmt::format("(ii) w({}) is not positive and finite", t));
      break;
    }
    if (t > 0 && lw < scheme.log_weight(t - 1)) {
      fail(fmt::format("w decreases at t={}", t));
      break;
    }
  }

  // (iii) w'(-1) >= 0 via the one-sided limit.
  constexpr double kLeftEdge = -1.0 + 1e-6;
  if (!(scheme.log_derivative(kLeftEdge) >= 0.0)) fail("(iii) w'(-1) < 0");

  // (iv) convexity on a half-integer grid plus the left edge.
  if (!(scheme.second_derivative_ratio(kLeftEdge) >= 0.0)) fail("(iv) w''(-1) < 0");
  for (int k = -1; k <= 2 * horizon; ++k) {
    const double t = 0.5 * k;
    const double r = scheme.second_derivative_ratio(t);
    const double tol = 1e-12 * std::max(1.0, scheme.log_derivative(t) * scheme.log_derivative(t));
    if (!(r >= -tol)) {
      fail(fmt::format("(iv) w''({}) < 0", t));
      break;
    }
  }

  // (v) Psi = max over t of max{w(t+1)/w(t), w'(t+1)/w'(t)}.
  double psi = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const double lw0 = scheme.log_weight(t);
    const double lw1 = scheme.log_weight(t + 1);
    const double ratio_w = std::exp(lw1 - lw0);
    const double ratio_dw = std::exp(lw1 + std::log(scheme.log_derivative(t + 1)) - lw0 -
                                     std::log(scheme.log_derivative(t)));
    psi = std::max({psi, ratio_w, ratio_dw});
  }
  report.psi_estimate = psi;
  if (!std::isfinite(psi) || psi < 1.0) fail("(v) Psi is not finite and >= 1");
  return report;
}

}  // namespace snpe
