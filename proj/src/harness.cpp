#include "uqgroup/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "uqgroup/ensemble_solver.hpp"
#include "uqgroup/errors.hpp"
#include "uqgroup/fem3d.hpp"

namespace uqgroup {

using nlohmann::json;

std::string_view problem_name(Problem p) {
  switch (p) {
    case Problem::AnalyticG1: return "analytic_g1";
    case Problem::AnalyticG2: return "analytic_g2";
    case Problem::PdeTest1: return "pde_test1";
    case Problem::PdeTest2: return "pde_test2";
    case Problem::PdeIsotropicBaseline: return "pde_isotropic_baseline";
  }
  return "?";
}

Problem parse_problem(std::string_view name) {
  for (auto p : {Problem::AnalyticG1, Problem::AnalyticG2, Problem::PdeTest1, Problem::PdeTest2,
                 Problem::PdeIsotropicBaseline}) {
    if (problem_name(p) == name) return p;
  }
  throw ConfigError(fmt::format("unknown problem '{}'", name));
}

bool is_pde(Problem p) {
  return p == Problem::PdeTest1 || p == Problem::PdeTest2 || p == Problem::PdeIsotropicBaseline;
}

namespace {

FieldSpec default_field(Problem p, std::size_t dim) {
  FieldSpec f;
  f.modes = dim;
  if (p == Problem::PdeTest2) f.amplitude_mode = AmplitudeMode::Test2;
  if (p == Problem::PdeIsotropicBaseline) {
    f.sigma0 = 0.0;
    f.model = FieldModel::Linear;
    f.isotropic = true;
  }
  return f;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> keys,
                    std::string_view where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", k, where));
    }
  }
}

std::string_view amplitude_name(AmplitudeMode m) {
  return m == AmplitudeMode::Test2 ? "test2" : "constant";
}

void parse_field(const json& j, FieldSpec& f, std::size_t dim) {
  if (!j.is_object()) throw ConfigError("field block must be an object");
  reject_unknown(j,
                 {"delta", "sigma0", "N", "a_min", "a_hat", "a_y", "a_z", "nystrom_points",
                  "sigma0_placement", "model", "isotropic"},
                 "field");
  f.delta = j.value("delta", f.delta);
  f.sigma0 = j.value("sigma0", f.sigma0);
  if (j.contains("N") && j["N"].get<std::size_t>() != dim) {
    throw ConfigError(fmt::format("field N = {} differs from run N = {}", j["N"].get<std::size_t>(), dim));
  }
  f.a_min = j.value("a_min", f.a_min);
  if (j.contains("a_hat")) {
    const auto& a = j["a_hat"];
    if (a.is_number()) {
      f.a_hat = a.get<double>();
    } else {
      reject_unknown(a, {"mode", "value"}, "field.a_hat");
      const auto mode = a.value("mode", std::string(amplitude_name(f.amplitude_mode)));
      if (mode == "constant") {
        f.amplitude_mode = AmplitudeMode::Constant;
      } else if (mode == "test2") {
        f.amplitude_mode = AmplitudeMode::Test2;
      } else {
        throw ConfigError(fmt::format("unknown a_hat mode '{}'", mode));
      }
      f.a_hat = a.value("value", f.a_hat);
    }
  }
  f.a_y = j.value("a_y", f.a_y);
  f.a_z = j.value("a_z", f.a_z);
  f.nystrom_points = j.value("nystrom_points", f.nystrom_points);
  if (j.contains("sigma0_placement")) {
    const auto s = j["sigma0_placement"].get<std::string>();
    if (s == "variance") {
      f.sigma0_placement = Sigma0Placement::Variance;
    } else if (s == "kernel") {
      f.sigma0_placement = Sigma0Placement::Kernel;
    } else {
      throw ConfigError(fmt::format("unknown sigma0_placement '{}'", s));
    }
  }
  if (j.contains("model")) {
    const auto s = j["model"].get<std::string>();
    if (s == "lognormal") {
      f.model = FieldModel::LogNormal;
    } else if (s == "linear") {
      f.model = FieldModel::Linear;
    } else {
      throw ConfigError(fmt::format("unknown field model '{}'", s));
    }
  }
  f.isotropic = j.value("isotropic", f.isotropic);
}

json field_to_json(const FieldSpec& f) {
  return json{{"delta", f.delta},
              {"sigma0", f.sigma0},
              {"N", f.modes},
              {"a_min", f.a_min},
              {"a_hat", {{"mode", amplitude_name(f.amplitude_mode)}, {"value", f.a_hat}}},
              {"a_y", f.a_y},
              {"a_z", f.a_z},
              {"nystrom_points", f.nystrom_points},
              {"sigma0_placement",
               f.sigma0_placement == Sigma0Placement::Variance ? "variance" : "kernel"},
              {"model", f.model == FieldModel::LogNormal ? "lognormal" : "linear"},
              {"isotropic", f.isotropic}};
}

RunConfig parse_config_impl(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"problem", "N", "S", "tau", "n_max", "initial_level", "strategies", "solver",
                  "field", "mesh", "analytic", "base_curve"},
                 "config");
  RunConfig cfg;
  if (!doc.contains("problem")) throw ConfigError("config needs a 'problem'");
  cfg.problem = parse_problem(doc["problem"].get<std::string>());
  const bool pde = is_pde(cfg.problem);

  cfg.dim = doc.value("N", std::size_t{pde ? 4u : 2u});
  if (doc.contains("S")) {
    const auto& s = doc["S"];
    cfg.ensemble_sizes = s.is_array() ? s.get<std::vector<std::size_t>>()
                                      : std::vector<std::size_t>{s.get<std::size_t>()};
  } else {
    cfg.ensemble_sizes = pde ? std::vector<std::size_t>{4} : std::vector<std::size_t>{8};
  }
  cfg.tau = doc.value("tau", pde ? 1e-3 : 5e-4);
  cfg.n_max = doc.value("n_max", std::size_t{pde ? 600u : 1000u});
  cfg.initial_level = doc.value("initial_level", pde ? 1 : 2);
  if (doc.contains("strategies")) {
    const auto& s = doc["strategies"];
    if (s.is_string()) {
      cfg.strategies = parse_strategies(s.get<std::string>());
    } else {
      cfg.strategies.clear();
      for (const auto& t : s) {
        const auto st = parse_strategy(t.get<std::string>());
        if (std::find(cfg.strategies.begin(), cfg.strategies.end(), st) == cfg.strategies.end()) {
          cfg.strategies.push_back(st);
        }
      }
    }
  } else if (pde) {
    cfg.strategies = {Strategy::Iterations, Strategy::Surrogate, Strategy::Parameter,
                      Strategy::Natural};
  }

  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    reject_unknown(s, {"tol", "maxit"}, "solver");
    cfg.solver.tol = s.value("tol", cfg.solver.tol);
    cfg.solver.maxit = s.value("maxit", cfg.solver.maxit);
  }

  if (pde) {
    FieldSpec f = default_field(cfg.problem, cfg.dim);
    if (doc.contains("field")) parse_field(doc["field"], f, cfg.dim);
    cfg.field = f;
    MeshConfig m;
    if (doc.contains("mesh")) {
      const auto& mj = doc["mesh"];
      reject_unknown(mj, {"mesh_cells", "quadrature"}, "mesh");
      m.cells = mj.value("mesh_cells", m.cells);
      m.quadrature = mj.value("quadrature", m.quadrature);
    }
    cfg.mesh = m;
  } else {
    if (doc.contains("field") || doc.contains("mesh")) {
      throw ConfigError("analytic problems take no field or mesh block");
    }
  }

  if (doc.contains("analytic")) {
    if (pde) throw ConfigError("analytic block given for a PDE problem");
    const auto& a = doc["analytic"];
    reject_unknown(a, {"a1", "a2", "u1", "u2", "r1", "r2"}, "analytic");
    auto& p = cfg.analytic;
    p.a1 = a.value("a1", p.a1);
    p.a2 = a.value("a2", p.a2);
    p.u1 = a.value("u1", p.u1);
    p.u2 = a.value("u2", p.u2);
    p.r1 = a.value("r1", p.r1);
    p.r2 = a.value("r2", p.r2);
  }

  if (doc.contains("base_curve")) {
    BaseCurve curve;
    for (const auto& [k, v] : doc["base_curve"].items()) {
      curve[static_cast<std::size_t>(std::stoul(k))] = v.get<double>();
    }
    cfg.base_curve = curve;
  }
  return cfg;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  try {
    cfg = parse_config_impl(doc);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed config: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("malformed config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  const bool pde = is_pde(cfg.problem);
  if (cfg.dim == 0) throw ConfigError("N must be >= 1");
  if (!pde && cfg.dim != 2) throw ConfigError("analytic problems are two-dimensional");
  if (cfg.ensemble_sizes.empty()) throw ConfigError("at least one ensemble size is required");
  for (auto s : cfg.ensemble_sizes) {
    if (s == 0) throw ConfigError("ensemble size must be >= 1");
  }
  if (!(cfg.tau > 0.0)) throw ConfigError("tau must be positive");
  if (cfg.initial_level < 0) throw ConfigError("initial_level must be >= 0");
  if (!pde && std::find(cfg.strategies.begin(), cfg.strategies.end(), Strategy::Parameter) !=
                  cfg.strategies.end()) {
    throw ConfigError("strategy 'par' needs a PDE problem");
  }
  if (pde) {
    if (!cfg.field || !cfg.mesh) throw ConfigError("PDE problems need field and mesh blocks");
    if (cfg.field->modes != cfg.dim) throw ConfigError("field mode count must equal N");
    if (cfg.mesh->cells < 2) throw ConfigError("mesh_cells must be >= 2");
    if (cfg.mesh->quadrature != "gauss2") {
      throw ConfigError(fmt::format("unsupported quadrature '{}'", cfg.mesh->quadrature));
    }
    if (!(cfg.solver.tol > 0.0) || cfg.solver.maxit == 0) {
      throw ConfigError("solver tol and maxit must be positive");
    }
  } else if (cfg.field || cfg.mesh) {
    throw ConfigError("analytic problems take no field or mesh block");
  }
  if (cfg.base_curve) {
    for (const auto& [s, v] : *cfg.base_curve) {
      if (s == 0 || !(v > 0.0)) throw ConfigError("invalid base-curve entry");
    }
  }
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["problem"] = problem_name(cfg.problem);
  j["N"] = cfg.dim;
  j["S"] = cfg.ensemble_sizes;
  j["tau"] = cfg.tau;
  j["n_max"] = cfg.n_max;
  j["initial_level"] = cfg.initial_level;
  std::vector<std::string> tags;
  for (auto s : cfg.strategies) tags.emplace_back(tag(s));
  j["strategies"] = tags;
  if (is_pde(cfg.problem)) {
    j["solver"] = {{"tol", cfg.solver.tol}, {"maxit", cfg.solver.maxit}};
    if (cfg.field) j["field"] = field_to_json(*cfg.field);
    if (cfg.mesh) j["mesh"] = {{"mesh_cells", cfg.mesh->cells}, {"quadrature", cfg.mesh->quadrature}};
  } else {
    const auto& p = cfg.analytic;
    j["analytic"] = {{"a1", p.a1}, {"a2", p.a2}, {"u1", p.u1},
                     {"u2", p.u2}, {"r1", p.r1}, {"r2", p.r2}};
  }
  if (cfg.base_curve) {
    json c = json::object();
    for (const auto& [s, v] : *cfg.base_curve) c[std::to_string(s)] = v;
    j["base_curve"] = c;
  }
  return j;
}

std::vector<Interval> native_domain(Problem p, std::size_t dim) {
  switch (p) {
    case Problem::AnalyticG1: return std::vector<Interval>(dim, Interval{-2.0, 2.0});
    case Problem::AnalyticG2: return std::vector<Interval>(dim, Interval{0.0, 1.0});
    default: return std::vector<Interval>(dim, Interval{-1.0, 1.0});
  }
}

double analytic_qoi(Problem which, std::span<const double> y, const AnalyticParams& params) {
  if (y.size() != 2) throw DomainError("analytic outputs take two parameters");
  const double y1 = y[0];
  const double y2 = y[1];
  if (which == Problem::AnalyticG1) {
    return -std::exp(-(y1 - 1.0) * (y1 - 1.0)) +
           std::exp(-0.8 * (y1 + 1.0) * (y1 + 1.0)) * std::exp(-(y2 - 1.0) * (y2 - 1.0)) +
           std::exp(-0.8 * (y2 + 1.0));
  }
  if (which == Problem::AnalyticG2) {
    const double r = y1 * y1 + y2 * y2;
    if (r < params.r1) return 1.0;
    if (r <= params.r2) return 0.0;
    return 1.0;
  }
  throw DomainError(fmt::format("{} is not an analytic problem", problem_name(which)));
}

double analytic_iters(std::span<const double> y, const AnalyticParams& params) {
  if (y.size() != 2) throw DomainError("analytic iteration proxy takes two parameters");
  const double d1 = y[0] - params.u1;
  const double d2 = y[1] - params.u2;
  return std::exp(-params.a1 * params.a1 * d1 * d1 - params.a2 * params.a2 * d2 * d2) + 1.0;
}

const TotalRecord* RunReport::total(Strategy s, std::size_t S) const {
  for (const auto& t : totals) {
    if (t.strategy == s && t.S == S) return &t;
  }
  return nullptr;
}

const PlanRecord* RunReport::plan(int level, Strategy s, std::size_t S) const {
  for (const auto& l : levels) {
    if (l.level != level) continue;
    for (const auto& p : l.plans) {
      if (p.strategy == s && p.S == S) return &p;
    }
  }
  return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SolveOutcome {
  std::map<SampleId, double> G;
  std::map<SampleId, double> I;
  std::map<SampleId, bool> converged;
  double ensemble_seconds = 0.0;
  std::optional<double> sequential_seconds;
};

class PdeSolver {
 public:
  PdeSolver(const RunConfig& cfg)
      : assembler_(StructuredMesh(cfg.mesh->cells), build_field(*cfg.field)) {
    options_.tol = cfg.solver.tol;
    options_.max_iterations = cfg.solver.maxit;
  }

  double indicator(std::span<const double> y) const { return assembler_.indicator(y); }

  /// Solves the plan's ensembles; fills G, I and convergence per sample.
  void solve(const GroupingPlan& plan, const HierGrid& grid, const RunOptions& opts,
             SolveOutcome& out) const {
    PcgOptions pcg = options_;
    pcg.record_history = opts.residual_dir.has_value();
    const auto t0 = Clock::now();
    for (std::size_t k = 0; k < plan.ensembles.size(); ++k) {
      const auto& e = plan.ensembles[k];
      std::vector<std::vector<double>> ys;
      for (auto id : e.slots) ys.push_back(grid.coords(id));
      const auto sys = assembler_.assemble(ys, e.slots);
      const auto result = ensemble_pcg(sys.A, sys.b, jacobi_precond(sys.A), pcg);
      const std::size_t real = e.slots.size() - e.padding;
      for (std::size_t s = 0; s < real; ++s) {
        const auto id = e.slots[s];
        out.I[id] = result.iterations_per_lane[s];
        out.G[id] = qoi(result.solution.lane(s));
        out.converged[id] = result.converged_per_lane[s];
      }
      if (opts.residual_dir) {
        std::filesystem::create_directories(*opts.residual_dir);
        const auto file = *opts.residual_dir /
                          fmt::format("residuals_level_{}_ensemble_{}.csv", plan.level, k);
        std::ofstream f(file);
        if (!f) throw IoError(fmt::format("cannot write {}", file.string()));
        write_residual_history_csv(result, f);
      }
    }
    out.ensemble_seconds = seconds_since(t0);

    if (opts.measure_sequential) {
      PcgOptions seq = options_;
      const auto t1 = Clock::now();
      for (auto id : plan.samples()) {
        const std::vector<std::vector<double>> ys{grid.coords(id)};
        const auto sys = assembler_.assemble(ys);
        ensemble_pcg(sys.A, sys.b, jacobi_precond(sys.A), seq);
      }
      out.sequential_seconds = seconds_since(t1);
    }
  }

 private:
  EnsembleAssembler assembler_;
  PcgOptions options_;
};

Strategy executed_strategy(const std::vector<Strategy>& strategies) {
  if (std::find(strategies.begin(), strategies.end(), Strategy::Surrogate) != strategies.end()) {
    return Strategy::Surrogate;
  }
  for (auto s : strategies) {
    if (s != Strategy::Iterations) return s;
  }
  return Strategy::Natural;
}

void finalize_totals(const RunConfig& cfg,
                     const std::map<std::pair<Strategy, std::size_t>,
                                    std::vector<LevelIterations>>& history,
                     RunReport& report) {
  report.totals.clear();
  for (auto S : cfg.ensemble_sizes) {
    for (auto s : cfg.strategies) {
      TotalRecord t{s, S, 1.0, std::nullopt};
      auto it = history.find({s, S});
      if (it != history.end()) {
        const auto summary = compute_R(it->second);
        t.R = summary.R;
        for (const auto& n : summary.notes) {
          report.notes.push_back(fmt::format("{} S={}: {}", tag(s), S, n));
        }
      }
      if (is_pde(cfg.problem) && cfg.base_curve) {
        t.pred_speedup = predicted_speedup(t.R, S, *cfg.base_curve);
      }
      report.totals.push_back(t);
    }
  }
}

}  // namespace

RunResult adaptive_run(const RunConfig& cfg, const RunOptions& options) {
  validate(cfg);
  if (cfg.base_curve && is_pde(cfg.problem)) {
    for (auto S : cfg.ensemble_sizes) {
      if (!cfg.base_curve->count(S)) {
        throw ConfigError(fmt::format("base speed-up curve has no entry for S={}", S));
      }
    }
  }
  const bool pde = is_pde(cfg.problem);

  RunResult result{{}, HierGrid::full(cfg.dim, cfg.initial_level, native_domain(cfg.problem, cfg.dim)),
                   {}};
  auto& grid = result.grid;
  auto& report = result.report;
  report.config = config_to_json(cfg);
  if (grid.size() > cfg.n_max) {
    throw ConfigError(fmt::format("initial grid has {} points, more than n_max = {}", grid.size(),
                                  cfg.n_max));
  }

  std::optional<PdeSolver> solver;
  if (pde) solver.emplace(cfg);
  const Strategy executed = executed_strategy(cfg.strategies);
  const std::size_t executed_S = cfg.ensemble_sizes.front();

  std::map<std::pair<Strategy, std::size_t>, std::vector<LevelIterations>> history;
  bool truncated = false;

  for (int pass = 1;; ++pass) {
    const std::vector<SampleId> ids(grid.frontier().begin(), grid.frontier().end());

    // Predictions come from the surrogate of all earlier levels.
    std::map<SampleId, double> I_hat;
    std::map<SampleId, double> H;
    for (auto id : ids) {
      const auto y = grid.coords(id);
      if (pass > 1) I_hat[id] = grid.eval("I", y);
      if (pde) H[id] = solver->indicator(grid.canonical_coords(id));
    }

    auto plan_for = [&](Strategy s, std::size_t S) {
      if (pass == 1 || s == Strategy::Natural) return group_natural(ids, S, pass, s);
      if (s == Strategy::Surrogate) return group_by_key(ids, I_hat, S, pass, s);
      if (s == Strategy::Parameter) return group_by_key(ids, H, S, pass, s);
      throw std::logic_error("oracle grouping needs measured iterations");
    };

    SolveOutcome outcome;
    if (pde) {
      try {
        solver->solve(plan_for(executed, executed_S), grid, options, outcome);
      } catch (const NumericalError& e) {
        report.stop_reason = "aborted";
        report.complete = false;
        report.notes.push_back(fmt::format("level {}: {}", pass, e.what()));
        finalize_totals(cfg, history, report);
        throw RunAborted(e.what(), std::move(result));
      } catch (const AssemblyError& e) {
        report.stop_reason = "aborted";
        report.complete = false;
        report.notes.push_back(fmt::format("level {}: {}", pass, e.what()));
        finalize_totals(cfg, history, report);
        throw RunAborted(e.what(), std::move(result));
      }
      result.timings.push_back({pass, outcome.ensemble_seconds, outcome.sequential_seconds});
    } else {
      for (auto id : ids) {
        const auto y = grid.coords(id);
        outcome.G[id] = analytic_qoi(cfg.problem, y, cfg.analytic);
        outcome.I[id] = analytic_iters(y, cfg.analytic);
        outcome.converged[id] = true;
      }
    }

    LevelRecord level;
    level.level = pass;
    level.grid_level = grid.level();
    level.samples = ids;
    level.truncated = truncated;
    for (auto S : cfg.ensemble_sizes) {
      for (auto s : cfg.strategies) {
        GroupingPlan plan = s == Strategy::Iterations ? group_by_key(ids, outcome.I, S, pass, s)
                                                      : plan_for(s, S);
        auto lvl = attach_iterations(plan, outcome.I);
        const LevelIterations one[] = {lvl};
        const auto r = compute_R(one);
        level.plans.push_back({s, S, plan.ensembles, r.R});
        history[{s, S}].push_back(std::move(lvl));
      }
    }

    std::vector<double> G_values;
    std::vector<double> I_values;
    for (auto id : ids) {
      G_values.push_back(outcome.G.at(id));
      I_values.push_back(outcome.I.at(id));
      SampleRecord rec;
      rec.id = id;
      rec.level = pass;
      rec.node = grid.node(id);
      rec.coords = grid.coords(id);
      rec.G = outcome.G.at(id);
      rec.I = outcome.I.at(id);
      if (auto it = I_hat.find(id); it != I_hat.end()) rec.I_hat = it->second;
      if (auto it = H.find(id); it != H.end()) rec.H = it->second;
      rec.converged = outcome.converged.at(id);
      if (!rec.converged) {
        report.notes.push_back(fmt::format("sample {} did not reach the solver tolerance", id));
      }
      report.samples.push_back(std::move(rec));
    }
    grid.compute_surpluses("G", G_values);
    grid.compute_surpluses("I", I_values);

    if (!I_hat.empty()) {
      double sum = 0.0;
      double mx = 0.0;
      for (auto id : ids) {
        const double err = std::abs(I_hat.at(id) - outcome.I.at(id));
        sum += err;
        mx = std::max(mx, err);
      }
      level.mean_abs_err = sum / static_cast<double>(ids.size());
      level.max_abs_err = mx;
    }
    level.error_indicator = grid.frontier_error("G");
    report.levels.push_back(std::move(level));

    if (report.levels.back().error_indicator < cfg.tau) {
      report.stop_reason = "tolerance_met";
      break;
    }
    if (grid.size() >= cfg.n_max) {
      report.stop_reason = "budget_exhausted";
      break;
    }
    const auto refined = grid.refine({cfg.tau, "G", cfg.n_max});
    if (refined.added.empty()) {
      if (grid.frontier_error("G") >= cfg.tau) {
        report.notes.push_back(
            fmt::format("level {}: no admissible refinement above hat level {}", pass, kMaxHatLevel));
      }
      report.stop_reason = "tolerance_met";
      break;
    }
    truncated = refined.budget_exhausted;
  }

  finalize_totals(cfg, history, report);
  return result;
}

}  // namespace uqgroup
