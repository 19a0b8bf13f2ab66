#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snpe/diagnostics.hpp"
#include "snpe/problems.hpp"
#include "snpe/solvers.hpp"

namespace snpe::bench {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON (de)serialization

/// {"type": "lse", "n", "d", "rho", "lambda", "seed"} builds a synthetic
/// instance; "A"/"b" arrays give an explicit one. "quadratic" takes "H"/"c",
/// "finite_sum_quadratic" takes "n", "d", "ridge", "seed".
std::shared_ptr<const Problem> problem_from_json(const json& spec);
json problem_to_json(const Problem& problem);

/// Stable content hash of a problem instance.
std::uint64_t problem_hash(const Problem& problem);

OracleConfig oracle_from_json(const json& j);
json oracle_to_json(const OracleConfig& c);
WeightScheme weight_scheme_from_json(const json& j);
json weight_scheme_to_json(const WeightScheme& s);
TheoryConstants theory_constants_from_json(const json& j);

// ---------------------------------------------------------------------------
// Reference solutions

struct Reference {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton with the exact Hessian to ||grad f|| <= grad_tol, followed by
/// a few polishing steps while the gradient keeps shrinking. Results are
/// cached per problem hash. Throws after 500 Newton iterations.
Reference compute_reference(const Problem& problem, double grad_tol = 1e-12);

// ---------------------------------------------------------------------------
// Trace CSV

struct TraceRow {
  std::string solver;
  std::uint64_t seed = 0;
  int t = 0;
  double wall_time_ms = 0.0;
  double f_gap = 0.0;
  double grad_norm = 0.0;
  double dist_to_ref = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  int ls_steps = 0;
  bool backtracked = false;

  /// Exact equality, with NaN equal to NaN.
  friend bool operator==(const TraceRow& a, const TraceRow& b);
};

inline constexpr const char* kTraceHeader =
    "solver,seed,t,wall_time_ms,f_gap,grad_norm,dist_to_ref,eta,gamma,ls_steps,backtracked";

std::vector<TraceRow> trace_rows(const Trajectory& trajectory, std::uint64_t seed);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
/// Throws std::runtime_error with the offending line number on malformed input.
std::vector<TraceRow> read_trace_csv(std::istream& in);
/// FNV-1a over every column except wall_time_ms.
std::uint64_t determinism_hash(const std::vector<TraceRow>& rows);

// ---------------------------------------------------------------------------
// Experiments

enum class SolverKind { snpe, npe, stochastic_newton, damped_newton, agd };

std::string_view to_string(SolverKind kind);
SolverKind solver_kind_from_string(std::string_view name);

struct SolverSpec {
  std::string name;
  SolverKind kind = SolverKind::snpe;
  SnpeConfig snpe;
  BaselineConfig baseline;
  StochasticNewtonOptions newton;

  bool hpe_family() const { return kind == SolverKind::snpe || kind == SolverKind::npe; }
};

SolverSpec solver_spec_from_json(const json& j);
json solver_params_to_json(const SolverSpec& spec);

struct ExperimentConfig {
  json problem;
  std::vector<SolverSpec> solvers;
  std::vector<std::uint64_t> seeds;
  double reference_grad_tol = 1e-12;
  StopCriterion stop;
  std::filesystem::path output_dir;
  bool verify = true;
  /// Zero vector when absent.
  std::optional<Vector> x0;
  /// Original document, hashed into the manifest.
  json source;

  void validate() const;
};

ExperimentConfig experiment_from_json(const json& j);

/// Independent stream seed for one solver x seed cell.
std::uint64_t cell_seed(std::uint64_t seed, std::string_view solver_name);

/// Parameters needed to recheck a trace without the solver state.
struct RunMeta {
  SolverKind kind = SolverKind::snpe;
  double alpha = 0.25;
  double beta = 0.5;
  double sigma0 = 1.0;
  double mu = 1e-3;
  bool extragradient = true;
  std::optional<double> dist0;
};

RunMeta run_meta_from_json(const json& j);
json run_meta_to_json(const RunMeta& m);

struct VerifyReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Rechecks everything recoverable from a trace: row ordering, gamma, the
/// step-size recursion, the line-search budget, contraction (when dist0 is
/// known and the extragradient step is on) and f_gap sign.
VerifyReport verify_trace(const std::vector<TraceRow>& rows, const RunMeta& meta);

/// Full in-memory diagnostics for one run (needs the problem and reference).
json run_diagnostics(const SolverSpec& spec, const Trajectory& trajectory, const Problem& problem,
                     const Reference& reference, bool* ok = nullptr);

struct CellResult {
  std::string solver;
  SolverKind kind = SolverKind::snpe;
  std::uint64_t seed = 0;
  std::uint64_t stream_seed = 0;
  std::filesystem::path csv;
  bool converged = false;
  int iterations = 0;
  std::optional<std::string> error;
  bool verified = true;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::filesystem::path manifest;
  std::filesystem::path diagnostics;
  bool all_verified = true;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

std::string hex64(std::uint64_t h);
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace snpe::bench
