#include <stdexcept>

#include <fmt/format.h>

#include "snpe/bench.hpp"

namespace snpe::bench {

namespace {

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(fmt::format("{} must be a nonempty array of rows", what));
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw std::invalid_argument(fmt::format("{}: row {} has the wrong length", what, i));
    }
    for (Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(fmt::format("{} must be an array", what));
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <typename M>
std::uint64_t hash_matrix(const M& m, std::uint64_t h) {
  const Index dims[2] = {m.rows(), m.cols()};
  h = fnv1a(dims, sizeof dims, h);
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

std::uint64_t hash_double(double v, std::uint64_t h) { return fnv1a(&v, sizeof v, h); }

std::uint64_t hash_string(std::string_view s, std::uint64_t h) { return fnv1a(s.data(), s.size(), h); }

}  // namespace

std::shared_ptr<const Problem> problem_from_json(const json& spec) {
  if (!spec.is_object()) throw std::invalid_argument("problem spec must be a JSON object");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "lse") {
    const double rho = spec.value("rho", 0.05);
    const double lambda = spec.at("lambda").get<double>();
    if (spec.contains("A")) {
      Matrix a = matrix_from_json(spec.at("A"), "A");
      Vector b = vector_from_json(spec.at("b"), "b");
      return std::make_shared<LogSumExpProblem>(std::move(a), std::move(b), rho, lambda);
    }
    const auto n = spec.at("n").get<Index>();
    const auto d = spec.at("d").get<Index>();
    const auto seed = spec.value("seed", std::uint64_t{0});
    return std::make_shared<LogSumExpProblem>(generate_synthetic_lse(n, d, rho, lambda, seed));
  }
  if (type == "quadratic") {
    Matrix h = matrix_from_json(spec.at("H"), "H");
    Vector c = spec.contains("c") ? vector_from_json(spec.at("c"), "c")
                                  : Vector::Zero(h.rows()).eval();
    return std::make_shared<QuadraticProblem>(std::move(h), std::move(c));
  }
  if (type == "finite_sum_quadratic") {
    if (spec.contains("components")) {
      std::vector<FiniteSumQuadraticProblem::Component> comps;
      for (const json& c : spec.at("components")) {
        comps.push_back({matrix_from_json(c.at("H"), "H"), vector_from_json(c.at("c"), "c")});
      }
      return std::make_shared<FiniteSumQuadraticProblem>(std::move(comps),
                                                         spec.at("mu").get<double>());
    }
    return std::make_shared<FiniteSumQuadraticProblem>(generate_finite_sum_quadratic(
        spec.at("n").get<Index>(), spec.at("d").get<Index>(), spec.at("ridge").get<double>(),
        spec.value("seed", std::uint64_t{0})));
  }
  throw std::invalid_argument(fmt::format("unknown problem type '{}'", type));
}

json problem_to_json(const Problem& problem) {
  if (const auto* p = dynamic_cast<const LogSumExpProblem*>(&problem)) {
    return {{"type", "lse"},       {"n", p->samples()},        {"d", p->dimension()},
            {"rho", p->rho()},     {"lambda", p->lambda()},    {"A", matrix_to_json(p->a())},
            {"b", vector_to_json(p->b())}};
  }
  if (const auto* p = dynamic_cast<const QuadraticProblem*>(&problem)) {
    return {{"type", "quadratic"}, {"H", matrix_to_json(p->h())}, {"c", vector_to_json(p->c())}};
  }
  if (const auto* p = dynamic_cast<const FiniteSumQuadraticProblem*>(&problem)) {
    json comps = json::array();
    for (Index i = 0; i < p->size(); ++i) {
      comps.push_back({{"H", matrix_to_json(p->component(i).hessian)},
                       {"c", vector_to_json(p->component(i).linear)}});
    }
    return {{"type", "finite_sum_quadratic"}, {"mu", p->strong_convexity()}, {"components", comps}};
  }
  throw std::invalid_argument(fmt::format("cannot serialize problem kind '{}'", problem.kind()));
}

std::uint64_t problem_hash(const Problem& problem) {
  std::uint64_t h = hash_string(problem.kind(), 1469598103934665603ULL);
  if (const auto* p = dynamic_cast<const LogSumExpProblem*>(&problem)) {
    h = hash_matrix(p->a(), h);
    h = hash_matrix(p->b(), h);
    h = hash_double(p->rho(), h);
    return hash_double(p->lambda(), h);
  }
  if (const auto* p = dynamic_cast<const QuadraticProblem*>(&problem)) {
    return hash_matrix(p->c(), hash_matrix(p->h(), h));
  }
  if (const auto* p = dynamic_cast<const FiniteSumQuadraticProblem*>(&problem)) {
    h = hash_double(p->strong_convexity(), h);
    for (Index i = 0; i < p->size(); ++i) {
      h = hash_matrix(p->component(i).hessian, h);
      h = hash_matrix(p->component(i).linear, h);
    }
    return h;
  }
  throw std::invalid_argument(fmt::format("cannot hash problem kind '{}'", problem.kind()));
}

OracleConfig oracle_from_json(const json& j) {
  OracleConfig c;
  c.mode = oracle_mode_from_string(j.value("mode", std::string("exact")));
  c.sample_size = j.value("s", 1);
  c.noise_level = j.value("noise_level", 0.0);
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

json oracle_to_json(const OracleConfig& c) {
  json j = {{"mode", std::string(to_string(c.mode))}, {"seed", c.seed}};
  if (c.mode == OracleMode::subsample || c.mode == OracleMode::sketch) j["s"] = c.sample_size;
  if (c.mode == OracleMode::additive_noise) j["noise_level"] = c.noise_level;
  return j;
}

WeightScheme weight_scheme_from_json(const json& j) {
  WeightScheme s;
  s.kind = weight_kind_from_string(j.value("kind", std::string("uniform")));
  if (s.kind == WeightKind::power) s.power = j.at("p").get<double>();
  if (j.contains("log_base")) s.log_base = j.at("log_base").get<double>();
  s.validate();
  return s;
}

json weight_scheme_to_json(const WeightScheme& s) {
  json j = {{"kind", std::string(to_string(s.kind))}};
  if (s.kind == WeightKind::power) j["p"] = s.power;
  if (s.kind == WeightKind::log_power) j["log_base"] = s.log_base;
  return j;
}

TheoryConstants theory_constants_from_json(const json& j) {
  auto pick = [&](std::initializer_list<const char*> keys, double fallback) {
    for (const char* k : keys) {
      if (j.contains(k)) return j.at(k).get<double>();
    }
    return fallback;
  };
  TheoryConstants c;
  c.kappa = pick({"kappa"}, c.kappa);
  c.upsilon = pick({"upsilon", "Upsilon"}, c.upsilon);
  c.delta = pick({"delta"}, c.delta);
  c.nu = pick({"nu"}, c.nu);
  c.initial_distance = pick({"D", "initial_distance"}, c.initial_distance);
  c.hessian_lipschitz = pick({"L2", "hessian_lipschitz"}, c.hessian_lipschitz);
  c.m1 = pick({"M1", "m1"}, c.m1);
  c.mu = pick({"mu"}, c.mu);
  c.alpha = pick({"alpha"}, c.alpha);
  c.beta = pick({"beta"}, c.beta);
  c.sigma0 = pick({"sigma0"}, c.sigma0);
  c.d = pick({"d"}, c.d);
  c.validate();
  return c;
}

}  // namespace snpe::bench
