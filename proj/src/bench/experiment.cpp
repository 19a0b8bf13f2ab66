#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "snpe/bench.hpp"

namespace snpe::bench {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Reference solutions

Reference compute_reference(const Problem& problem, double grad_tol) {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("reference grad_tol must be positive");
  static std::mutex mutex;
  static std::map<std::pair<std::uint64_t, double>, Reference> cache;
  const auto key = std::make_pair(problem_hash(problem), grad_tol);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  BaselineConfig config;
  config.max_iters = 500;
  config.stop.grad_norm_tol = grad_tol;
  const Trajectory traj = run_damped_newton(config, problem, Vector::Zero(problem.dimension()));
  if (!traj.converged) {
    throw std::runtime_error(fmt::format(
        "reference solve did not reach gradient norm {:.1e} within 500 Newton iterations", grad_tol));
  }
  Reference ref;
  ref.x = traj.x_final;
  ref.iterations = static_cast<int>(traj.records.size());
  Vector g = problem.gradient(ref.x);
  // Polish with full Newton steps while the gradient keeps shrinking.
  for (int k = 0; k < 5; ++k) {
    Eigen::LLT<Matrix> llt(problem.hessian(ref.x));
    if (llt.info() != Eigen::Success) break;
    Vector x_new = ref.x - llt.solve(g);
    Vector g_new = problem.gradient(x_new);
    if (!(g_new.norm() < g.norm())) break;
    ref.x = std::move(x_new);
    g = std::move(g_new);
    ++ref.iterations;
  }
  ref.grad_norm = g.norm();
  ref.f = problem.value(ref.x);

  std::lock_guard lock(mutex);
  return cache.emplace(key, ref).first->second;
}

// ---------------------------------------------------------------------------
// Configuration

SolverSpec solver_spec_from_json(const json& j) {
  SolverSpec s;
  s.kind = solver_kind_from_string(j.at("solver").get<std::string>());
  s.name = j.value("name", std::string(to_string(s.kind)));
  SnpeConfig& c = s.snpe;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.sigma0 = j.value("sigma0", c.sigma0);
  c.mu = j.value("mu", c.mu);
  c.disable_extragradient = j.value("disable_extragradient", false);
  c.max_ls_steps_per_iter = j.value("max_ls_steps", c.max_ls_steps_per_iter);
  if (j.contains("linear_solver")) {
    c.linear_solver = linear_solver_from_string(j.at("linear_solver").get<std::string>());
  }
  if (j.contains("averaging")) c.averaging = weight_scheme_from_json(j.at("averaging"));
  if (j.contains("oracle")) c.oracle = oracle_from_json(j.at("oracle"));
  if (j.contains("line_search")) {
    const std::string ls = j.at("line_search").get<std::string>();
    if (ls != "armijo" && ls != "none") {
      throw std::invalid_argument(fmt::format("unknown line_search '{}'", ls));
    }
    s.newton.armijo = ls == "armijo";
  }
  s.newton.eigen_floor = j.value("eigen_floor", s.newton.eigen_floor);
  BaselineConfig& b = s.baseline;
  b.mu = c.mu;
  const bool first_order = s.kind == SolverKind::agd;
  c.max_iters = j.value("max_iters", c.max_iters);
  b.max_iters = j.value("max_iters", first_order ? 20000 : 200);
  if (s.kind == SolverKind::npe) {
    c.oracle = OracleConfig{};
    c.averaging = WeightScheme::current();
  }
  if (s.hpe_family() || s.kind == SolverKind::stochastic_newton) c.validate();
  return s;
}

json solver_params_to_json(const SolverSpec& spec) {
  json j = {{"name", spec.name}, {"solver", std::string(to_string(spec.kind))}};
  if (spec.kind == SolverKind::damped_newton || spec.kind == SolverKind::agd) {
    j["mu"] = spec.baseline.mu;
    j["max_iters"] = spec.baseline.max_iters;
    return j;
  }
  const SnpeConfig& c = spec.snpe;
  j["max_iters"] = c.max_iters;
  j["averaging"] = weight_scheme_to_json(c.averaging);
  j["oracle"] = oracle_to_json(c.oracle);
  if (spec.kind == SolverKind::stochastic_newton) {
    j["line_search"] = spec.newton.armijo ? "armijo" : "none";
    j["eigen_floor"] = spec.newton.eigen_floor;
  }
  if (spec.hpe_family()) {
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["sigma0"] = c.sigma0;
    j["mu"] = c.mu;
    j["disable_extragradient"] = c.disable_extragradient;
    j["linear_solver"] = std::string(to_string(c.linear_solver));
  }
  return j;
}

void ExperimentConfig::validate() const {
  if (solvers.empty()) throw std::invalid_argument("experiment needs at least one solver");
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (output_dir.empty()) throw std::invalid_argument("experiment needs an output_dir");
  std::vector<std::string> names;
  for (const auto& s : solvers) {
    if (std::find(names.begin(), names.end(), s.name) != names.end()) {
      throw std::invalid_argument(fmt::format("duplicate solver name '{}'", s.name));
    }
    names.push_back(s.name);
  }
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("duplicate seed");
  }
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  ExperimentConfig c;
  c.source = j;
  c.problem = j.at("problem");
  for (const json& s : j.at("solvers")) c.solvers.push_back(solver_spec_from_json(s));
  for (const json& s : j.at("seeds")) c.seeds.push_back(s.get<std::uint64_t>());
  if (j.contains("reference")) {
    const json& r = j.at("reference");
    if (r.value("solver", std::string("damped_newton")) != "damped_newton") {
      throw std::invalid_argument("only damped_newton references are supported");
    }
    c.reference_grad_tol = r.value("grad_tol", c.reference_grad_tol);
  }
  if (j.contains("stop")) {
    const json& s = j.at("stop");
    c.stop.grad_norm_tol = s.value("grad_norm_tol", 0.0);
    if (s.contains("f_gap_tol")) c.stop.f_gap_tol = s.at("f_gap_tol").get<double>();
  }
  c.output_dir = j.at("output_dir").get<std::string>();
  c.verify = j.value("verify", true);
  if (j.contains("x0")) {
    const json& x0 = j.at("x0");
    Vector v(static_cast<Index>(x0.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = x0.at(static_cast<std::size_t>(i)).get<double>();
    c.x0 = std::move(v);
  }
  c.validate();
  return c;
}

std::uint64_t cell_seed(std::uint64_t seed, std::string_view solver_name) {
  return mix_seed(seed ^ fnv1a(solver_name.data(), solver_name.size()));
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------------------
// Diagnostics

json run_diagnostics(const SolverSpec& spec, const Trajectory& trajectory, const Problem& problem,
                     const Reference& reference, bool* ok_out) {
  bool ok = true;
  json d = {{"solver", spec.name},
            {"solver_kind", std::string(to_string(spec.kind))},
            {"iterations", trajectory.records.size()},
            {"converged", trajectory.converged},
            {"notes", trajectory.notes}};
  const auto ratios = contraction_ratio_series(trajectory, reference.x);
  d["contraction_ratios"] = ratios;
  const auto onset = detect_superlinear_onset(ratios);
  d["superlinear_onset"] = onset ? json(*onset) : json(nullptr);

  if (spec.hpe_family()) {
    const SnpeConfig& c = spec.snpe;
    int hpe_failures = 0;
    for (const auto& rec : trajectory.records) {
      const auto chk = check_hpe_condition(rec.x, rec.x_hat, rec.eta, c.mu,
                                           problem.gradient(rec.x_hat), c.alpha);
      if (!chk.ok) ++hpe_failures;
    }
    d["acceptance"] = {{"checked", trajectory.records.size()}, {"failures", hpe_failures}};
    ok = ok && hpe_failures == 0;

    const bool budget = check_ls_budget(trajectory, c.sigma0, c.beta);
    d["ls_budget_ok"] = budget;
    ok = ok && budget;

    if (!c.disable_extragradient) {
      const auto contraction = check_contraction(trajectory, c.mu, reference.x);
      d["contraction"] = {{"checked", contraction.verdicts.size()},
                          {"failures", contraction.failures}};
      ok = ok && contraction.ok;
    } else {
      d["contraction"] = nullptr;
    }

    int bound_checked = 0;
    int bound_failures = 0;
    for (const auto& rec : trajectory.records) {
      if (!rec.backtracked || !rec.hessian_snapshot) continue;
      const auto b =
          check_step_size_lower_bound(rec, problem, c.alpha, c.beta, c.mu, c.linear_solver);
      ++bound_checked;
      if (!b.ok) ++bound_failures;
    }
    d["step_size_bound"] = {{"checked", bound_checked}, {"failures", bound_failures}};
    ok = ok && bound_failures == 0;
  }
  int floored = 0;
  for (const auto& rec : trajectory.records) floored += rec.floored ? 1 : 0;
  d["floored_iterations"] = floored;
  d["ok"] = ok;
  if (ok_out) *ok_out = ok;
  return d;
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

struct CellOutput {
  CellResult result;
  std::vector<TraceRow> rows;
  json diagnostics;
  RunMeta meta;
};

unsigned worker_count(std::size_t cells) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SNPE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(cells)));
}

Trajectory run_cell(const SolverSpec& spec, const Problem& problem, const Vector& x0) {
  switch (spec.kind) {
    case SolverKind::snpe: return run_snpe(spec.snpe, problem, x0);
    case SolverKind::npe: return run_npe(spec.snpe, problem, x0);
    case SolverKind::stochastic_newton: return run_stochastic_newton(spec.snpe, problem, x0, spec.newton);
    case SolverKind::damped_newton: return run_damped_newton(spec.baseline, problem, x0);
    case SolverKind::agd: return run_agd(spec.baseline, problem, x0);
  }
  throw std::logic_error("unhandled solver kind");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to {} failed", path.string()));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto problem = problem_from_json(config.problem);
  const Vector x0 = config.x0.value_or(Vector::Zero(problem->dimension()));
  if (x0.size() != problem->dimension()) {
    throw std::invalid_argument("x0 does not match the problem dimension");
  }
  const Reference ref = compute_reference(*problem, config.reference_grad_tol);
  StopCriterion stop = config.stop;
  stop.f_ref = ref.f;
  const double dist0 = (x0 - ref.x).norm();

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) {
    throw std::runtime_error(
        fmt::format("cannot create {}: {}", config.output_dir.string(), ec.message()));
  }

  std::vector<CellOutput> cells;
  for (const auto& spec : config.solvers) {
    for (std::uint64_t seed : config.seeds) {
      CellOutput cell;
      cell.result.solver = spec.name;
      cell.result.kind = spec.kind;
      cell.result.seed = seed;
      cell.result.stream_seed = cell_seed(seed, spec.name);
      cell.result.csv = fmt::format("{}_seed{}.csv", spec.name, seed);
      cell.meta.kind = spec.kind;
      cell.meta.alpha = spec.snpe.alpha;
      cell.meta.beta = spec.snpe.beta;
      cell.meta.sigma0 = spec.snpe.sigma0;
      cell.meta.mu = spec.snpe.mu;
      cell.meta.extragradient = !spec.snpe.disable_extragradient;
      cell.meta.dist0 = dist0;
      cells.push_back(std::move(cell));
    }
  }

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      CellOutput& cell = cells[i];
      const SolverSpec& base = *std::find_if(
          config.solvers.begin(), config.solvers.end(),
          [&](const SolverSpec& s) { return s.name == cell.result.solver; });
      SolverSpec spec = base;
      spec.snpe.stop = stop;
      spec.snpe.x_ref = ref.x;
      spec.snpe.keep_hessian_snapshots = true;
      spec.snpe.oracle.seed = mix_seed(cell.result.stream_seed ^ base.snpe.oracle.seed);
      spec.baseline.stop = stop;
      spec.baseline.x_ref = ref.x;
      try {
        Trajectory traj = run_cell(spec, *problem, x0);
        traj.solver = spec.name;
        cell.result.converged = traj.converged;
        cell.result.iterations = static_cast<int>(traj.records.size());
        cell.rows = trace_rows(traj, cell.result.seed);
        bool diag_ok = true;
        cell.diagnostics = run_diagnostics(spec, traj, *problem, ref, &diag_ok);
        if (config.verify) {
          const auto report = verify_trace(cell.rows, cell.meta);
          cell.diagnostics["verify_failures"] = report.failures;
          cell.result.verified = report.ok() && diag_ok;
        }
      } catch (const std::exception& e) {
        cell.result.error = e.what();
        cell.result.verified = false;
        cell.diagnostics = {{"solver", spec.name}, {"error", e.what()}};
      }
    }
  };
  const unsigned threads = worker_count(cells.size());
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  // Single writer: all files are produced here, in cell order.
  ExperimentResult result;
  json files = json::array();
  json runs = json::array();
  json diagnostics = json::array();
  for (auto& cell : cells) {
    json run = {{"solver", cell.result.solver},
                {"solver_kind", std::string(to_string(cell.result.kind))},
                {"seed", cell.result.seed},
                {"stream_seed", cell.result.stream_seed},
                {"converged", cell.result.converged},
                {"iterations", cell.result.iterations},
                {"verified", cell.result.verified}};
    run["meta"] = run_meta_to_json(cell.meta);
    const auto& spec = *std::find_if(config.solvers.begin(), config.solvers.end(),
                                     [&](const SolverSpec& s) { return s.name == cell.result.solver; });
    run["params"] = solver_params_to_json(spec);
    if (cell.result.error) {
      run["error"] = *cell.result.error;
      run["csv"] = nullptr;
      cell.result.csv.clear();
    } else {
      std::ostringstream csv;
      write_trace_csv(csv, cell.rows);
      const fs::path path = config.output_dir / cell.result.csv;
      write_text(path, csv.str());
      run["csv"] = cell.result.csv.string();
      run["error"] = nullptr;
      run["determinism_hash"] = hex64(determinism_hash(cell.rows));
      files.push_back({{"path", cell.result.csv.string()}, {"fnv1a64", hex64(file_hash(path))}});
      cell.result.csv = path;
    }
    json diag = cell.diagnostics;
    diag["seed"] = cell.result.seed;
    diagnostics.push_back(std::move(diag));
    runs.push_back(std::move(run));
    result.all_verified = result.all_verified && cell.result.verified;
    result.cells.push_back(cell.result);
  }

  result.diagnostics = config.output_dir / "diagnostics.json";
  write_text(result.diagnostics, json{{"runs", diagnostics}}.dump(2) + "\n");
  files.push_back({{"path", "diagnostics.json"}, {"fnv1a64", hex64(file_hash(result.diagnostics))}});

  const std::string config_text = config.source.dump();
  json manifest = {
      {"format_version", 1},
      {"config_hash", hex64(fnv1a(config_text.data(), config_text.size()))},
      {"config", config.source},
      {"problem",
       {{"kind", std::string(problem->kind())},
        {"dimension", problem->dimension()},
        {"hash", hex64(problem_hash(*problem))}}},
      {"reference",
       {{"f_ref", ref.f}, {"grad_norm", ref.grad_norm}, {"iterations", ref.iterations},
        {"dist0", dist0}}},
      {"seeds", config.seeds},
      {"threads", threads},
      {"library",
       {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                              EIGEN_MINOR_VERSION)},
        {"fmt", FMT_VERSION},
        {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                      NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"runs", runs},
      {"files", files}};
  result.manifest = config.output_dir / "manifest.json";
  write_text(result.manifest, manifest.dump(2) + "\n");
  return result;
}

}  // namespace snpe::bench
