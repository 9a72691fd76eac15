#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "uqgroup/errors.hpp"
#include "uqgroup/harness.hpp"

namespace uqgroup {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json ensemble_json(const Ensemble& e) { return {{"slots", e.slots}, {"padding", e.padding}}; }

Ensemble ensemble_from(const json& j) {
  return {j.at("slots").get<std::vector<SampleId>>(), j.at("padding").get<std::size_t>()};
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write {}", file.string()));
  return f;
}

void close_checked(std::ofstream& f, const std::filesystem::path& file) {
  f.close();
  if (!f) throw IoError(fmt::format("error while writing {}", file.string()));
}

}  // namespace

json report_to_json(const RunReport& report) {
  json j;
  j["config"] = report.config;
  j["stop_reason"] = report.stop_reason;
  j["complete"] = report.complete;
  j["notes"] = report.notes;

  json samples = json::array();
  for (const auto& s : report.samples) {
    json n;
    to_json(n, s.node);
    samples.push_back({{"id", s.id},
                       {"level", s.level},
                       {"node", n},
                       {"coords", s.coords},
                       {"G", s.G},
                       {"I", s.I},
                       {"I_hat", optional_json(s.I_hat)},
                       {"H", optional_json(s.H)},
                       {"converged", s.converged}});
  }
  j["samples"] = samples;

  json levels = json::array();
  for (const auto& l : report.levels) {
    json plans = json::array();
    for (const auto& p : l.plans) {
      json ens = json::array();
      for (const auto& e : p.ensembles) ens.push_back(ensemble_json(e));
      plans.push_back({{"strategy", tag(p.strategy)}, {"S", p.S}, {"R_l", p.R_l}, {"ensembles", ens}});
    }
    levels.push_back({{"level", l.level},
                      {"grid_level", l.grid_level},
                      {"samples", l.samples},
                      {"error_indicator", l.error_indicator},
                      {"truncated", l.truncated},
                      {"mean_abs_err", optional_json(l.mean_abs_err)},
                      {"max_abs_err", optional_json(l.max_abs_err)},
                      {"plans", plans}});
  }
  j["levels"] = levels;

  json totals = json::array();
  for (const auto& t : report.totals) {
    totals.push_back({{"strategy", tag(t.strategy)},
                      {"S", t.S},
                      {"R", t.R},
                      {"pred_speedup", optional_json(t.pred_speedup)}});
  }
  j["totals"] = totals;
  return j;
}

RunReport report_from_json(const json& doc) {
  try {
    RunReport r;
    r.config = doc.at("config");
    r.stop_reason = doc.at("stop_reason").get<std::string>();
    r.complete = doc.at("complete").get<bool>();
    r.notes = doc.at("notes").get<std::vector<std::string>>();
    for (const auto& s : doc.at("samples")) {
      SampleRecord rec;
      rec.id = s.at("id").get<SampleId>();
      rec.level = s.at("level").get<int>();
      from_json(s.at("node"), rec.node);
      rec.coords = s.at("coords").get<std::vector<double>>();
      rec.G = s.at("G").get<double>();
      rec.I = s.at("I").get<double>();
      rec.I_hat = optional_from(s, "I_hat");
      rec.H = optional_from(s, "H");
      rec.converged = s.at("converged").get<bool>();
      r.samples.push_back(std::move(rec));
    }
    for (const auto& l : doc.at("levels")) {
      LevelRecord rec;
      rec.level = l.at("level").get<int>();
      rec.grid_level = l.at("grid_level").get<int>();
      rec.samples = l.at("samples").get<std::vector<SampleId>>();
      rec.error_indicator = l.at("error_indicator").get<double>();
      rec.truncated = l.at("truncated").get<bool>();
      rec.mean_abs_err = optional_from(l, "mean_abs_err");
      rec.max_abs_err = optional_from(l, "max_abs_err");
      for (const auto& p : l.at("plans")) {
        PlanRecord plan;
        plan.strategy = parse_strategy(p.at("strategy").get<std::string>());
        plan.S = p.at("S").get<std::size_t>();
        plan.R_l = p.at("R_l").get<double>();
        for (const auto& e : p.at("ensembles")) plan.ensembles.push_back(ensemble_from(e));
        rec.plans.push_back(std::move(plan));
      }
      r.levels.push_back(std::move(rec));
    }
    for (const auto& t : doc.at("totals")) {
      r.totals.push_back({parse_strategy(t.at("strategy").get<std::string>()),
                          t.at("S").get<std::size_t>(), t.at("R").get<double>(),
                          optional_from(t, "pred_speedup")});
    }
    return r;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("malformed report: {}", e.what()));
  }
}

void emit_reports(const RunReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  {
    const auto file = out_dir / "grouping.csv";
    auto f = open_out(file);
    f << "strategy,S,level,n_samples,n_ensembles,R,pred_speedup\n";
    for (const auto& t : report.totals) {
      std::size_t samples = 0;
      std::size_t ensembles = 0;
      for (const auto& l : report.levels) {
        for (const auto& p : l.plans) {
          if (p.strategy != t.strategy || p.S != t.S) continue;
          std::size_t n = 0;
          for (const auto& e : p.ensembles) n += e.slots.size() - e.padding;
          f << fmt::format("{},{},{},{},{},{:.6f},\n", tag(p.strategy), p.S, l.level, n,
                           p.ensembles.size(), p.R_l);
          samples += n;
          ensembles += p.ensembles.size();
        }
      }
      f << fmt::format("{},{},total,{},{},{:.6f},{}\n", tag(t.strategy), t.S, samples, ensembles,
                       t.R, t.pred_speedup ? fmt::format("{:.4f}", *t.pred_speedup) : "");
    }
    close_checked(f, file);
  }

  {
    const auto file = out_dir / "report.json";
    auto f = open_out(file);
    f << report_to_json(report).dump(1) << '\n';
    close_checked(f, file);
  }

  std::map<SampleId, const SampleRecord*> by_id;
  for (const auto& s : report.samples) by_id[s.id] = &s;
  for (const auto& l : report.levels) {
    const auto file = out_dir / fmt::format("iterations_level_{}.csv", l.level);
    auto f = open_out(file);
    f << "sample_id,I,I_hat\n";
    for (auto id : l.samples) {
      auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      const auto& s = *it->second;
      f << fmt::format("{},{:.17g},{}\n", id, s.I, s.I_hat ? fmt::format("{:.17g}", *s.I_hat) : "");
    }
    close_checked(f, file);
  }
}

void write_timings(std::span<const LevelTiming> timings, const std::filesystem::path& file) {
  auto f = open_out(file);
  f << "level,ensemble_seconds,sequential_seconds,measured_speedup\n";
  for (const auto& t : timings) {
    f << fmt::format("{},{:.6f},{},{}\n", t.level, t.ensemble_seconds,
                     t.sequential_seconds ? fmt::format("{:.6f}", *t.sequential_seconds) : "",
                     t.sequential_seconds && t.ensemble_seconds > 0.0
                         ? fmt::format("{:.4f}", *t.sequential_seconds / t.ensemble_seconds)
                         : "");
  }
  close_checked(f, file);
}

void write_grid(const HierGrid& grid, const std::filesystem::path& file) {
  auto f = open_out(file);
  json j;
  to_json(j, grid);
  f << j.dump(1) << '\n';
  close_checked(f, file);
}

std::string render_table(const std::filesystem::path& out_dir) {
  const auto file = out_dir / "grouping.csv";
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read {}", file.string()));

  struct Row {
    std::string strategy;
    std::string S;
    std::map<int, std::string> levels;
    std::string R;
    std::string pred;
  };
  std::vector<Row> rows;
  int max_level = 0;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw IoError(fmt::format("malformed grouping row '{}'", line));
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) {
      return r.strategy == cells[0] && r.S == cells[1];
    });
    if (it == rows.end()) {
      rows.push_back({cells[0], cells[1], {}, "", ""});
      it = rows.end() - 1;
    }
    const auto short_r = fmt::format("{:.3f}", std::stod(cells[5]));
    if (cells[2] == "total") {
      it->R = short_r;
      it->pred = cells[6].empty() ? "--" : fmt::format("{:.2f}", std::stod(cells[6]));
    } else {
      const int l = std::stoi(cells[2]);
      it->levels[l] = short_r;
      max_level = std::max(max_level, l);
    }
  }

  std::string out = fmt::format("{:<6}{:>4}", "strat", "S");
  for (int l = 1; l <= max_level; ++l) out += fmt::format("{:>8}", fmt::format("R_{}", l));
  out += fmt::format("{:>8}{:>8}\n", "R", "Pred");
  for (const auto& r : rows) {
    out += fmt::format("{:<6}{:>4}", r.strategy, r.S);
    for (int l = 1; l <= max_level; ++l) {
      auto it = r.levels.find(l);
      out += fmt::format("{:>8}", it == r.levels.end() ? "--" : it->second);
    }
    out += fmt::format("{:>8}{:>8}\n", r.R, r.pred);
  }
  return out;
}

}  // namespace uqgroup
