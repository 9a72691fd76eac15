#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "uqgroup/errors.hpp"
#include "uqgroup/harness.hpp"

namespace {

constexpr int kExitTolerance = 0;
constexpr int kExitError = 1;
constexpr int kExitBudget = 2;

struct RunArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::string> strategies;
  std::vector<std::size_t> sizes;
  std::optional<std::string> base_curve;
  std::optional<double> tau;
  std::optional<std::size_t> n_max;
  std::optional<int> initial_level;
  std::optional<int> mesh_cells;
  bool residual_history = false;
  bool sequential = false;
};

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw uqgroup::IoError(fmt::format("cannot read {}", path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw uqgroup::ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

void write_outputs(const uqgroup::RunResult& result, const std::filesystem::path& dir) {
  uqgroup::emit_reports(result.report, dir);
  uqgroup::write_grid(result.grid, dir / "grid.json");
  if (!result.timings.empty()) uqgroup::write_timings(result.timings, dir / "timing.csv");
}

int run(const RunArgs& args) {
  auto doc = load_json(args.config);
  if (args.strategies) doc["strategies"] = *args.strategies;
  if (!args.sizes.empty()) doc["S"] = args.sizes;
  if (args.tau) doc["tau"] = *args.tau;
  if (args.n_max) doc["n_max"] = *args.n_max;
  if (args.initial_level) doc["initial_level"] = *args.initial_level;
  if (args.mesh_cells) doc["mesh"]["mesh_cells"] = *args.mesh_cells;
  auto cfg = uqgroup::parse_config(doc);
  if (args.base_curve) {
    std::ifstream in(*args.base_curve);
    if (!in) throw uqgroup::IoError(fmt::format("cannot read {}", *args.base_curve));
    cfg.base_curve = uqgroup::read_base_curve(in);
    uqgroup::validate(cfg);
  }

  const std::filesystem::path dir(args.out_dir);
  uqgroup::RunOptions options;
  options.measure_sequential = args.sequential;
  if (args.residual_history) options.residual_dir = dir / "residuals";

  try {
    const auto result = uqgroup::adaptive_run(cfg, options);
    write_outputs(result, dir);
    std::cout << uqgroup::render_table(dir);
    std::cout << "stop: " << result.report.stop_reason << '\n';
    return result.report.stop_reason == "budget_exhausted" ? kExitBudget : kExitTolerance;
  } catch (const uqgroup::RunAborted& e) {
    write_outputs(e.partial(), dir);
    std::cerr << "run aborted: " << e.what() << " (partial report written)\n";
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble grouping study for adaptive sparse-grid collocation"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run the adaptive loop and write reports");
  run_cmd->add_option("--config", run_args.config, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out-dir", run_args.out_dir, "Output directory")->required();
  run_cmd->add_option("--strategies", run_args.strategies, "Comma list of nat,par,sur,its");
  run_cmd->add_option("--S", run_args.sizes, "Ensemble size(s); the first is executed")
      ->delimiter(',');
  run_cmd->add_option("--base-curve", run_args.base_curve, "CSV of S,speedup")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--tau", run_args.tau, "Refinement tolerance");
  run_cmd->add_option("--n-max", run_args.n_max, "Sample budget");
  run_cmd->add_option("--initial-level", run_args.initial_level, "Initial sparse-grid level");
  run_cmd->add_option("--mesh-cells", run_args.mesh_cells, "Cells per direction (PDE problems)");
  run_cmd->add_flag("--residual-history", run_args.residual_history,
                    "Write per-ensemble residual histories");
  run_cmd->add_flag("--sequential-baseline", run_args.sequential,
                    "Also time one-sample solves and report the measured speed-up");

  std::string table_dir;
  auto* table_cmd = app.add_subcommand("table", "Render DIR/grouping.csv as a text table");
  table_cmd->add_option("--out-dir", table_dir, "Directory of a finished run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*run_cmd) return run(run_args);
    std::cout << uqgroup::render_table(table_dir);
    return kExitTolerance;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
