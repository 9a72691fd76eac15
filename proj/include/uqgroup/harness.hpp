#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uqgroup/grouping.hpp"
#include "uqgroup/hier_grid.hpp"
#include "uqgroup/random_field.hpp"

namespace uqgroup {

enum class Problem { AnalyticG1, AnalyticG2, PdeTest1, PdeTest2, PdeIsotropicBaseline };

std::string_view problem_name(Problem p);
Problem parse_problem(std::string_view name);
bool is_pde(Problem p);

/// Parameters of the analytic outputs and the analytic iteration proxy.
struct AnalyticParams {
  double a1 = 2.0;
  double a2 = 2.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double r1 = 0.25;
  double r2 = 0.65;

  friend bool operator==(const AnalyticParams&, const AnalyticParams&) = default;
};

struct SolverConfig {
  double tol = 1e-7;
  std::size_t maxit = 20000;
};

struct MeshConfig {
  int cells = 16;
  std::string quadrature = "gauss2";
};

struct RunConfig {
  Problem problem = Problem::AnalyticG1;
  std::size_t dim = 2;
  /// The first size is the one executed in ensemble form; every size is
  /// accounted for every strategy.
  std::vector<std::size_t> ensemble_sizes{8};
  double tau = 5e-4;
  std::size_t n_max = 1000;
  int initial_level = 2;
  std::vector<Strategy> strategies{Strategy::Natural, Strategy::Surrogate, Strategy::Iterations};
  SolverConfig solver;
  std::optional<FieldSpec> field;
  std::optional<MeshConfig> mesh;
  AnalyticParams analytic;
  std::optional<BaseCurve> base_curve;
};

/// Fills problem-specific defaults for every key the document omits, then
/// validates. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

/// Parameter box of each problem: [-2,2]^2 for G1, [0,1]^2 for G2,
/// [-1,1]^N for the PDE problems.
std::vector<Interval> native_domain(Problem p, std::size_t dim);

/// G1 or G2 at a point of its native box.
double analytic_qoi(Problem which, std::span<const double> y, const AnalyticParams& params);
/// exp(-a1^2 (y1-u1)^2 - a2^2 (y2-u2)^2) + 1.
double analytic_iters(std::span<const double> y, const AnalyticParams& params);

struct SampleRecord {
  SampleId id = 0;
  int level = 0;
  NodeId node;
  std::vector<double> coords;
  double G = 0.0;
  double I = 0.0;
  std::optional<double> I_hat;
  std::optional<double> H;
  bool converged = true;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct PlanRecord {
  Strategy strategy = Strategy::Natural;
  std::size_t S = 0;
  std::vector<Ensemble> ensembles;
  double R_l = 1.0;

  friend bool operator==(const PlanRecord&, const PlanRecord&) = default;
};

struct LevelRecord {
  int level = 0;       // 1 = initial grid
  int grid_level = 0;  // total sparse-grid level of the newest nodes
  std::vector<SampleId> samples;
  double error_indicator = 0.0;
  bool truncated = false;
  std::optional<double> mean_abs_err;  // |I_hat - I| over the level
  std::optional<double> max_abs_err;
  std::vector<PlanRecord> plans;

  friend bool operator==(const LevelRecord&, const LevelRecord&) = default;
};

struct TotalRecord {
  Strategy strategy = Strategy::Natural;
  std::size_t S = 0;
  double R = 1.0;
  std::optional<double> pred_speedup;

  friend bool operator==(const TotalRecord&, const TotalRecord&) = default;
};

struct RunReport {
  nlohmann::json config;
  std::string stop_reason;  // tolerance_met | budget_exhausted | aborted
  bool complete = true;
  std::vector<std::string> notes;
  std::vector<SampleRecord> samples;
  std::vector<LevelRecord> levels;
  std::vector<TotalRecord> totals;

  const TotalRecord* total(Strategy s, std::size_t S) const;
  const PlanRecord* plan(int level, Strategy s, std::size_t S) const;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Wall time of the executed ensemble solves per level; kept out of the
/// report so reports stay byte-reproducible.
struct LevelTiming {
  int level = 0;
  double ensemble_seconds = 0.0;
  std::optional<double> sequential_seconds;
};

struct RunResult {
  RunReport report;
  HierGrid grid;
  std::vector<LevelTiming> timings;
};

struct RunOptions {
  /// Also solve every sample on its own and time it.
  bool measure_sequential = false;
  /// Write per-ensemble residual histories (CSV) below this directory.
  std::optional<std::filesystem::path> residual_dir;
};

/// Raised when a solve breaks down; carries everything computed so far.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, RunResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

/// Adaptive collocation loop with ensemble solves and grouping accounting.
RunResult adaptive_run(const RunConfig& cfg, const RunOptions& options = {});

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// grouping.csv, report.json and one iterations_level_<l>.csv per level.
void emit_reports(const RunReport& report, const std::filesystem::path& out_dir);
void write_timings(std::span<const LevelTiming> timings, const std::filesystem::path& file);
void write_grid(const HierGrid& grid, const std::filesystem::path& file);

/// Aligned text rendering of DIR/grouping.csv: one row per strategy and S
/// with R_1..R_L, R and the predicted speed-up.
std::string render_table(const std::filesystem::path& out_dir);

}  // namespace uqgroup
