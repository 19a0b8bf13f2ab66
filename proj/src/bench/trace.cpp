#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "snpe/bench.hpp"

namespace snpe::bench {

namespace {

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

void check_name(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("solver name must be nonempty");
  for (char c : name) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      throw std::invalid_argument(fmt::format("solver name '{}' contains a CSV metacharacter", name));
    }
  }
}

std::string format_row(const TraceRow& r, bool with_time) {
  std::string out = fmt::format("{},{},{},", r.solver, r.seed, r.t);
  if (with_time) out += fmt::format("{:.17g},", r.wall_time_ms);
  out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}", r.f_gap, r.grad_norm,
                     r.dist_to_ref, r.eta, r.gamma, r.ls_steps, r.backtracked ? 1 : 0);
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* column) {
  T value{};
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error(
        fmt::format("trace line {}: cannot parse {} from '{}'", line, column, field));
  }
  return value;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

bool operator==(const TraceRow& a, const TraceRow& b) {
  return a.solver == b.solver && a.seed == b.seed && a.t == b.t &&
         same_double(a.wall_time_ms, b.wall_time_ms) && same_double(a.f_gap, b.f_gap) &&
         same_double(a.grad_norm, b.grad_norm) && same_double(a.dist_to_ref, b.dist_to_ref) &&
         same_double(a.eta, b.eta) && same_double(a.gamma, b.gamma) && a.ls_steps == b.ls_steps &&
         a.backtracked == b.backtracked;
}

std::vector<TraceRow> trace_rows(const Trajectory& trajectory, std::uint64_t seed) {
  std::vector<TraceRow> rows;
  rows.reserve(trajectory.records.size());
  for (const auto& rec : trajectory.records) {
    TraceRow r;
    r.solver = trajectory.solver;
    r.seed = seed;
    r.t = rec.t;
    r.wall_time_ms = rec.wall_time_ms;
    r.f_gap = rec.f_gap;
    r.grad_norm = rec.grad_norm;
    r.dist_to_ref = rec.dist_to_ref;
    r.eta = rec.eta;
    r.gamma = rec.gamma;
    r.ls_steps = rec.ls_steps;
    r.backtracked = rec.backtracked;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    check_name(r.solver);
    out << format_row(r, true) << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace is empty (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    throw std::runtime_error(fmt::format("unexpected trace header '{}'", line));
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 11) {
      throw std::runtime_error(
          fmt::format("trace line {}: expected 11 fields, found {}", lineno, f.size()));
    }
    TraceRow r;
    r.solver = std::string(f[0]);
    r.seed = parse_number<std::uint64_t>(f[1], lineno, "seed");
    r.t = parse_number<int>(f[2], lineno, "t");
    r.wall_time_ms = parse_number<double>(f[3], lineno, "wall_time_ms");
    r.f_gap = parse_number<double>(f[4], lineno, "f_gap");
    r.grad_norm = parse_number<double>(f[5], lineno, "grad_norm");
    r.dist_to_ref = parse_number<double>(f[6], lineno, "dist_to_ref");
    r.eta = parse_number<double>(f[7], lineno, "eta");
    r.gamma = parse_number<double>(f[8], lineno, "gamma");
    r.ls_steps = parse_number<int>(f[9], lineno, "ls_steps");
    const int bt = parse_number<int>(f[10], lineno, "backtracked");
    if (bt != 0 && bt != 1) {
      throw std::runtime_error(fmt::format("trace line {}: backtracked must be 0 or 1", lineno));
    }
    r.backtracked = bt == 1;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::uint64_t determinism_hash(const std::vector<TraceRow>& rows) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& r : rows) {
    const std::string s = format_row(r, false) + '\n';
    h = fnv1a(s.data(), s.size(), h);
  }
  return h;
}

VerifyReport verify_trace(const std::vector<TraceRow>& rows, const RunMeta& meta) {
  VerifyReport report;
  auto fail = [&](std::string msg) { report.failures.push_back(std::move(msg)); };
  const bool hpe = meta.kind == SolverKind::snpe || meta.kind == SolverKind::npe;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& r = rows[i];
    if (i > 0) {
      if (r.solver != rows[0].solver || r.seed != rows[0].seed) {
        fail(fmt::format("row {}: mixed (solver, seed) within one trace", i));
      }
      if (r.t <= rows[i - 1].t) fail(fmt::format("row {}: t is not strictly increasing", i));
    }
    if (r.f_gap < -1e-12) fail(fmt::format("t={}: f_gap {:.3e} below -1e-12", r.t, r.f_gap));
    if (r.ls_steps < 1) fail(fmt::format("t={}: ls_steps must be at least 1", r.t));
    if (r.backtracked != (r.ls_steps > 1)) {
      fail(fmt::format("t={}: backtracked flag disagrees with ls_steps={}", r.t, r.ls_steps));
    }
  }
  if (!hpe || rows.empty()) return report;

  std::vector<int> ls;
  std::vector<double> eta;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& r = rows[i];
    if (r.t != static_cast<int>(i)) {
      fail(fmt::format("row {}: expected t={} for a complete run, found {}", i, i, r.t));
      return report;
    }
    if (!(r.eta > 0.0)) fail(fmt::format("t={}: eta must be positive", r.t));
    if (!rel_close(r.gamma, 1.0 + 2.0 * r.eta * meta.mu, 1e-12)) {
      fail(fmt::format("t={}: gamma {:.17g} != 1 + 2 eta mu", r.t, r.gamma));
    }
    const double sigma = i == 0 ? meta.sigma0 : rows[i - 1].eta / meta.beta;
    const double expected = sigma * std::pow(meta.beta, r.ls_steps - 1);
    if (!rel_close(r.eta, expected, 1e-12)) {
      fail(fmt::format("t={}: eta {:.17g} inconsistent with sigma {:.17g} after {} steps", r.t,
                       r.eta, sigma, r.ls_steps));
    }
    ls.push_back(r.ls_steps);
    eta.push_back(r.eta);
  }
  if (!check_ls_budget(ls, eta, meta.sigma0, meta.beta)) fail("line-search budget exceeded");

  if (meta.extragradient && meta.dist0) {
    std::vector<double> dist{*meta.dist0};
    bool finite = std::isfinite(*meta.dist0);
    for (const auto& r : rows) {
      dist.push_back(r.dist_to_ref);
      finite = finite && std::isfinite(r.dist_to_ref);
    }
    if (finite) {
      const auto c = check_contraction_distances(dist, eta, meta.mu);
      for (const auto& v : c.verdicts) {
        if (!v.ok) {
          fail(fmt::format("t={}: contraction violated ({:.17g} > {:.17g})", v.t, v.lhs, v.rhs));
        }
      }
    }
  }
  return report;
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::snpe: return "snpe";
    case SolverKind::npe: return "npe";
    case SolverKind::stochastic_newton: return "stochastic_newton";
    case SolverKind::damped_newton: return "damped_newton";
    case SolverKind::agd: return "agd";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(std::string_view name) {
  for (auto k : {SolverKind::snpe, SolverKind::npe, SolverKind::stochastic_newton,
                 SolverKind::damped_newton, SolverKind::agd}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument(fmt::format("unknown solver '{}'", name));
}

RunMeta run_meta_from_json(const json& j) {
  RunMeta m;
  m.kind = solver_kind_from_string(j.at("solver_kind").get<std::string>());
  m.alpha = j.value("alpha", m.alpha);
  m.beta = j.value("beta", m.beta);
  m.sigma0 = j.value("sigma0", m.sigma0);
  m.mu = j.value("mu", m.mu);
  m.extragradient = !j.value("disable_extragradient", false);
  if (j.contains("dist0") && j.at("dist0").is_number()) m.dist0 = j.at("dist0").get<double>();
  if (!(m.beta > 0.0 && m.beta < 1.0)) throw std::invalid_argument("meta: beta must lie in (0, 1)");
  if (!(m.sigma0 > 0.0)) throw std::invalid_argument("meta: sigma0 must be positive");
  return m;
}

json run_meta_to_json(const RunMeta& m) {
  json j = {{"solver_kind", std::string(to_string(m.kind))},
            {"alpha", m.alpha},
            {"beta", m.beta},
            {"sigma0", m.sigma0},
            {"mu", m.mu},
            {"disable_extragradient", !m.extragradient}};
  j["dist0"] = m.dist0 ? json(*m.dist0) : json(nullptr);
  return j;
}

}  // namespace snpe::bench
