#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uqgroup {

using SampleId = std::size_t;

/// nat: generation order; par: anisotropy indicator H; sur: iterations
/// surrogate; its: measured iterations (post hoc oracle).
enum class Strategy { Natural, Parameter, Surrogate, Iterations };

std::string_view tag(Strategy s);
Strategy parse_strategy(std::string_view tag);
std::vector<Strategy> parse_strategies(std::string_view comma_list);

struct Ensemble {
  std::vector<SampleId> slots;  // exactly S entries
  std::size_t padding = 0;      // trailing replicas of the last real sample

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

struct GroupingPlan {
  int level = 0;
  std::size_t width = 0;
  Strategy strategy = Strategy::Natural;
  std::vector<Ensemble> ensembles;

  /// Real samples in slot order, replicas excluded.
  std::vector<SampleId> samples() const;

  friend bool operator==(const GroupingPlan&, const GroupingPlan&) = default;
};

/// Consecutive chunks of S; the last chunk is filled with copies of its
/// last sample.
GroupingPlan group_natural(std::span<const SampleId> ids, std::size_t width, int level = 0,
                           Strategy strategy = Strategy::Natural);

/// Stable sort by ascending key, then chunk as group_natural. Throws
/// ConfigError if an id has no key.
GroupingPlan group_by_key(std::span<const SampleId> ids, const std::map<SampleId, double>& key,
                          std::size_t width, int level, Strategy strategy);

/// A plan together with the iteration count of every slot, padding included.
struct LevelIterations {
  GroupingPlan plan;
  std::vector<std::vector<double>> slot_iterations;
};

LevelIterations attach_iterations(GroupingPlan plan, const std::map<SampleId, double>& iterations);

struct LevelWork {
  int level = 0;
  std::size_t n_samples = 0;
  std::size_t n_ensembles = 0;
  double ensemble_work = 0.0;  // S * sum of group maxima
  double sample_work = 0.0;    // sum over all slots
  double R = 1.0;
};

struct RSummary {
  std::vector<LevelWork> levels;
  double R = 1.0;
  std::vector<std::string> notes;
};

/// R_l = S * sum_k max_i I_{k,i} / sum_k sum_i I_{k,i} per level; R is the
/// same ratio over all levels. Empty levels are skipped with a note.
RSummary compute_R(std::span<const LevelIterations> levels);

using BaseCurve = std::map<std::size_t, double>;

/// Two columns S,speedup; a non-numeric first line is taken as a header.
BaseCurve read_base_curve(std::istream& in);

/// base_curve(S) / R; ConfigError when S is not in the curve.
double predicted_speedup(double R, std::size_t width, const BaseCurve& base_curve);

}  // namespace uqgroup
