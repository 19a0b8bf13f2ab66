#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "snpe/types.hpp"

namespace snpe {

enum class WeightKind { uniform, power, log_power, current };

std::string_view to_string(WeightKind kind);
WeightKind weight_kind_from_string(std::string_view name);

/// Weight function w(t) for Hessian averaging, with w(-1) = 0.
///
///   uniform    w(t) = t + 1
///   power      w(t) = (t + 1)^p,          p >= 1
///   log_power  w(t) = (t + 1)^{log(t+4)}  (natural log unless log_base is set)
///   current    no averaging: the newest estimate gets all the weight
///
/// Weights overflow doubles quickly for log_power, so everything is evaluated
/// in log space and only ratios leave this module.
struct WeightScheme {
  WeightKind kind = WeightKind::uniform;
  double power = 1.0;
  double log_base = 2.718281828459045;

  static WeightScheme uniform() { return {}; }
  static WeightScheme power_law(double p) { return {WeightKind::power, p}; }
  static WeightScheme log_power() { return {WeightKind::log_power}; }
  static WeightScheme current() { return {WeightKind::current}; }

  void validate() const;

  /// log w(t) for real t >= -1; -inf at t = -1. The weight-function
  /// accessors throw std::logic_error for `current`, which has no w(t).
  double log_weight(double t) const;
  /// w'(t) / w(t) for t > -1.
  double log_derivative(double t) const;
  /// w''(t) / w(t) for t > -1.
  double second_derivative_ratio(double t) const;
};

/// w(t-1) / w(t); zero at t = 0.
double weight_ratio(const WeightScheme& scheme, std::int64_t t);

/// z_{i,t} = (w(i) - w(i-1)) / w(t) for i = 0..t.
std::vector<double> explicit_weights(const WeightScheme& scheme, std::int64_t t);

/// Running weighted average of stochastic Hessians, O(d^2) memory.
class HessianAverager {
 public:
  HessianAverager(WeightScheme scheme, Index dimension);

  /// Folds in the next estimate. The first update copies it verbatim.
  void update(const Matrix& estimate);

  const Matrix& average() const { return average_; }
  /// Index of the most recent update, -1 before the first.
  std::int64_t t() const { return t_; }
  const WeightScheme& scheme() const { return scheme_; }

 private:
  WeightScheme scheme_;
  Matrix average_;
  std::int64_t t_ = -1;
};

struct WeightSchemeReport {
  double psi_estimate = 0.0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Numerical check of the weight-function regularity conditions over
/// t in [0, horizon]; derivative conditions at t = -1 use t = -1 + 1e-6.
WeightSchemeReport validate_weight_scheme(const WeightScheme& scheme, int horizon);

}  // namespace snpe
