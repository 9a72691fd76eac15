#include "uqgroup/grouping.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "uqgroup/errors.hpp"

namespace uqgroup {

std::string_view tag(Strategy s) {
  switch (s) {
    case Strategy::Natural: return "nat";
    case Strategy::Parameter: return "par";
    case Strategy::Surrogate: return "sur";
    case Strategy::Iterations: return "its";
  }
  return "?";
}

Strategy parse_strategy(std::string_view t) {
  if (t == "nat") return Strategy::Natural;
  if (t == "par") return Strategy::Parameter;
  if (t == "sur") return Strategy::Surrogate;
  if (t == "its") return Strategy::Iterations;
  throw ConfigError(fmt::format("unknown grouping strategy '{}'", t));
}

std::vector<Strategy> parse_strategies(std::string_view list) {
  std::vector<Strategy> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(',', start), list.size());
    const auto item = list.substr(start, end - start);
    if (!item.empty()) {
      const auto s = parse_strategy(item);
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    start = end + 1;
  }
  return out;
}

std::vector<SampleId> GroupingPlan::samples() const {
  std::vector<SampleId> out;
  for (const auto& e : ensembles) {
    out.insert(out.end(), e.slots.begin(), e.slots.end() - static_cast<std::ptrdiff_t>(e.padding));
  }
  return out;
}

GroupingPlan group_natural(std::span<const SampleId> ids, std::size_t width, int level,
                           Strategy strategy) {
  if (width == 0) throw ConfigError("ensemble size must be >= 1");
  GroupingPlan plan{level, width, strategy, {}};
  for (std::size_t start = 0; start < ids.size(); start += width) {
    Ensemble e;
    const std::size_t end = std::min(start + width, ids.size());
    e.slots.assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                   ids.begin() + static_cast<std::ptrdiff_t>(end));
    e.padding = width - e.slots.size();
    e.slots.resize(width, e.slots.back());
    plan.ensembles.push_back(std::move(e));
  }
  return plan;
}

GroupingPlan group_by_key(std::span<const SampleId> ids, const std::map<SampleId, double>& key,
                          std::size_t width, int level, Strategy strategy) {
  std::vector<std::pair<double, SampleId>> keyed;
  keyed.reserve(ids.size());
  for (auto id : ids) {
    auto it = key.find(id);
    if (it == key.end()) throw ConfigError(fmt::format("no grouping key for sample {}", id));
    keyed.emplace_back(it->second, id);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<SampleId> sorted;
  sorted.reserve(keyed.size());
  for (const auto& [k, id] : keyed) sorted.push_back(id);
  return group_natural(sorted, width, level, strategy);
}

LevelIterations attach_iterations(GroupingPlan plan,
                                  const std::map<SampleId, double>& iterations) {
  LevelIterations out{std::move(plan), {}};
  for (const auto& e : out.plan.ensembles) {
    std::vector<double> slot;
    for (auto id : e.slots) {
      auto it = iterations.find(id);
      if (it == iterations.end()) {
        throw IncompleteDataError(fmt::format("no iteration count for sample {}", id));
      }
      slot.push_back(it->second);
    }
    out.slot_iterations.push_back(std::move(slot));
  }
  return out;
}

RSummary compute_R(std::span<const LevelIterations> levels) {
  RSummary out;
  double ens_total = 0.0;
  double sample_total = 0.0;
  for (const auto& lvl : levels) {
    const auto& plan = lvl.plan;
    if (plan.ensembles.empty()) {
      out.notes.push_back(fmt::format("level {} has no samples; skipped", plan.level));
      continue;
    }
    if (lvl.slot_iterations.size() != plan.ensembles.size()) {
      throw IncompleteDataError(fmt::format("level {}: iterations missing", plan.level));
    }
    LevelWork w;
    w.level = plan.level;
    w.n_ensembles = plan.ensembles.size();
    w.n_samples = plan.samples().size();
    for (std::size_t k = 0; k < plan.ensembles.size(); ++k) {
      const auto& its = lvl.slot_iterations[k];
      if (its.size() != plan.width) {
        throw IncompleteDataError(fmt::format("level {} ensemble {}: {} slot counts for width {}",
                                              plan.level, k, its.size(), plan.width));
      }
      w.ensemble_work += static_cast<double>(plan.width) * *std::max_element(its.begin(), its.end());
      w.sample_work += std::accumulate(its.begin(), its.end(), 0.0);
    }
    w.R = w.ensemble_work / w.sample_work;
    ens_total += w.ensemble_work;
    sample_total += w.sample_work;
    out.levels.push_back(w);
  }
  out.R = sample_total > 0.0 ? ens_total / sample_total : 1.0;
  return out;
}

BaseCurve read_base_curve(std::istream& in) {
  BaseCurve curve;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double s = 0.0;
    double speedup = 0.0;
    if (!(row >> s >> speedup)) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(fmt::format("malformed base-curve row '{}'", line));
    }
    first = false;
    if (s < 1.0 || speedup <= 0.0) throw ConfigError(fmt::format("invalid base-curve row '{}'", line));
    curve[static_cast<std::size_t>(s)] = speedup;
  }
  return curve;
}

double predicted_speedup(double R, std::size_t width, const BaseCurve& base_curve) {
  auto it = base_curve.find(width);
  if (it == base_curve.end()) {
    throw ConfigError(fmt::format("base speed-up curve has no entry for S={}", width));
  }
  return it->second / R;
}

}  // namespace uqgroup
