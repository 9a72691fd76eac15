#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace uqgroup {

/// Multi-index (level, index) of a hierarchical hat basis function.
///
/// Per dimension: level 0 carries index 0 (point -1) or 1 (point +1); level
/// l >= 1 carries an odd index in [1, 2^l - 1].
struct NodeId {
  std::vector<int> level;
  std::vector<int> index;

  int total_level() const;

  friend bool operator==(const NodeId&, const NodeId&) = default;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Ordering used for every node list the grid hands out: total level first,
/// then the level vector, then the index vector.
bool canonical_less(const NodeId& a, const NodeId& b);

/// Finest per-dimension hat level; refinement stops there.
inline constexpr int kMaxHatLevel = 30;

/// Validates one (level, index) pair; throws DomainError otherwise.
void check_level_index(int level, int index);

/// Canonical coordinate y_{l,i} = i * 2^(1-l) - 1.
double node_coordinate(int level, int index);

/// One-dimensional hat max{0, 1 - |(y - y_{l,i}) / h_l|}, h_l = 2^(1-l).
double hat_eval(int level, int index, double y);

/// Tensor-product hat; `y` is in canonical coordinates [-1,1]^N.
double basis_eval(const NodeId& node, std::span<const double> y);

/// Classic-refinement children, one dimension at a time, deduplicated and in
/// canonical order.
std::vector<NodeId> children(const NodeId& node);

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct RefinementPolicy {
  double tau = 1e-3;
  std::string channel = "G";
  std::size_t max_points = 1000;
};

struct RefinementResult {
  std::vector<NodeId> added;
  bool budget_exhausted = false;
};

/// Adaptive piecewise-linear sparse grid with any number of named output
/// channels sharing one node set.
///
/// Nodes are kept in generation order: the initial grid in canonical order,
/// then each refinement step appended in canonical order. The frontier is
/// the set of nodes added by the most recent step (the whole initial grid
/// before the first refinement). Public coordinates live in `domain()`; the
/// hat functions are defined on the canonical box [-1,1]^N.
class HierGrid {
 public:
  explicit HierGrid(std::size_t dim = 1, std::vector<Interval> domain = {});

  /// All nodes with total level <= `level`.
  static HierGrid full(std::size_t dim, int level,
                       std::vector<Interval> domain = {});

  std::size_t dim() const { return dim_; }
  const std::vector<Interval>& domain() const { return domain_; }
  std::size_t size() const { return nodes_.size(); }
  const NodeId& node(std::size_t k) const { return nodes_[k]; }
  std::span<const double> canonical_coords(std::size_t k) const;
  std::vector<double> coords(std::size_t k) const;
  const std::vector<std::size_t>& frontier() const { return frontier_; }
  /// Total level of the newest frontier nodes.
  int level() const { return level_; }
  std::optional<std::size_t> find(const NodeId& id) const;

  std::vector<double> to_canonical(std::span<const double> y) const;
  std::vector<double> from_canonical(std::span<const double> y) const;

  /// Sets surpluses for every frontier node from values aligned with
  /// `frontier()`. Earlier nodes must already carry surpluses for `channel`.
  void compute_surpluses(std::string_view channel,
                         std::span<const double> frontier_values);
  void compute_surpluses(std::string_view channel,
                         const std::map<NodeId, double>& values);

  bool has_channel(std::string_view channel) const;
  bool has_surplus(std::string_view channel, std::size_t k) const;
  double surplus(std::string_view channel, std::size_t k) const;

  /// Sum of surplus * basis over all nodes with a surplus on `channel`;
  /// `y` in domain coordinates.
  double eval(std::string_view channel, std::span<const double> y) const;

  /// Mean of the interpolant over the domain (uniform density).
  double integrate(std::string_view channel) const;

  /// Maximum |surplus| over the frontier.
  double frontier_error(std::string_view channel) const;

  RefinementResult refine(const RefinementPolicy& policy);

  friend bool operator==(const HierGrid& a, const HierGrid& b);

  friend void to_json(nlohmann::json& j, const HierGrid& grid);
  friend void from_json(const nlohmann::json& j, HierGrid& grid);

 private:
  struct Channel {
    std::vector<double> surplus;
    std::vector<char> set;

    friend bool operator==(const Channel&, const Channel&) = default;
  };

  std::size_t add_node(NodeId id);
  const Channel& channel_ref(std::string_view channel) const;
  double eval_canonical(const Channel& ch, std::span<const double> y,
                        int below_level) const;

  std::size_t dim_;
  std::vector<Interval> domain_;
  std::vector<NodeId> nodes_;
  std::vector<double> canonical_;  // dim_ entries per node
  std::vector<int> totals_;
  std::map<NodeId, std::size_t> lookup_;
  std::vector<std::size_t> frontier_;
  std::map<std::string, Channel, std::less<>> channels_;
  int level_ = 0;
};

void to_json(nlohmann::json& j, const NodeId& id);
void from_json(const nlohmann::json& j, NodeId& id);

}  // namespace uqgroup
