#include "uqgroup/hier_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "uqgroup/errors.hpp"

namespace uqgroup {

int NodeId::total_level() const {
  return std::accumulate(level.begin(), level.end(), 0);
}

bool canonical_less(const NodeId& a, const NodeId& b) {
  const int ta = a.total_level();
  const int tb = b.total_level();
  if (ta != tb) return ta < tb;
  if (a.level != b.level) return a.level < b.level;
  return a.index < b.index;
}

void check_level_index(int level, int index) {
  if (level < 0 || level > kMaxHatLevel) {
    throw DomainError(fmt::format("invalid hat level {}", level));
  }
  if (level == 0) {
    if (index != 0 && index != 1) {
      throw DomainError(fmt::format("level 0 index must be 0 or 1, got {}", index));
    }
    return;
  }
  if (index < 1 || index > (1 << level) - 1 || index % 2 == 0) {
    throw DomainError(
        fmt::format("index {} is not an odd member of B_{}", index, level));
  }
}

namespace {

double spacing(int level) { return std::ldexp(1.0, 1 - level); }

// No validation; callers hold validated nodes.
inline double hat_unchecked(int level, int index, double y) {
  const double h = spacing(level);
  const double v = 1.0 - std::abs((y + 1.0 - index * h) / h);
  return v > 0.0 ? v : 0.0;
}

void check_node(const NodeId& node) {
  if (node.level.size() != node.index.size()) {
    throw DomainError("node level and index vectors differ in length");
  }
  for (std::size_t n = 0; n < node.level.size(); ++n) {
    check_level_index(node.level[n], node.index[n]);
  }
}

}  // namespace

double node_coordinate(int level, int index) {
  return index * spacing(level) - 1.0;
}

double hat_eval(int level, int index, double y) {
  check_level_index(level, index);
  return hat_unchecked(level, index, y);
}

double basis_eval(const NodeId& node, std::span<const double> y) {
  check_node(node);
  if (y.size() != node.level.size()) {
    throw DomainError(fmt::format("point has {} coordinates, node has {}",
                                  y.size(), node.level.size()));
  }
  double value = 1.0;
  for (std::size_t n = 0; n < y.size() && value != 0.0; ++n) {
    value *= hat_unchecked(node.level[n], node.index[n], y[n]);
  }
  return value;
}

std::vector<NodeId> children(const NodeId& node) {
  check_node(node);
  std::set<NodeId> out;
  for (std::size_t n = 0; n < node.level.size(); ++n) {
    NodeId child = node;
    if (node.level[n] == 0) {
      child.level[n] = 1;
      child.index[n] = 1;
      out.insert(child);
    } else if (node.level[n] < kMaxHatLevel) {
      child.level[n] = node.level[n] + 1;
      child.index[n] = 2 * node.index[n] - 1;
      out.insert(child);
      child.index[n] = 2 * node.index[n] + 1;
      out.insert(child);
    }
  }
  std::vector<NodeId> result(out.begin(), out.end());
  std::sort(result.begin(), result.end(), canonical_less);
  return result;
}

HierGrid::HierGrid(std::size_t dim, std::vector<Interval> domain)
    : dim_(dim), domain_(std::move(domain)) {
  if (dim_ == 0) throw DomainError("sparse grid needs at least one dimension");
  if (domain_.empty()) domain_.assign(dim_, Interval{});
  if (domain_.size() != dim_) {
    throw DomainError("domain interval count differs from grid dimension");
  }
  for (const auto& iv : domain_) {
    if (!(iv.hi > iv.lo)) throw DomainError("empty domain interval");
  }
}

HierGrid HierGrid::full(std::size_t dim, int level, std::vector<Interval> domain) {
  if (level < 0) throw DomainError("initial level must be non-negative");
  HierGrid grid(dim, std::move(domain));

  // Enumerate all level vectors with |l| <= level, then all index vectors.
  std::vector<NodeId> all;
  std::vector<int> lv(dim, 0);
  auto emit_indices = [&](const std::vector<int>& lvec) {
    std::vector<std::vector<int>> choices(dim);
    for (std::size_t n = 0; n < dim; ++n) {
      if (lvec[n] == 0) {
        choices[n] = {0, 1};
      } else {
        for (int i = 1; i < (1 << lvec[n]); i += 2) choices[n].push_back(i);
      }
    }
    std::vector<std::size_t> pos(dim, 0);
    while (true) {
      NodeId id{lvec, std::vector<int>(dim)};
      for (std::size_t n = 0; n < dim; ++n) id.index[n] = choices[n][pos[n]];
      all.push_back(std::move(id));
      std::size_t n = 0;
      for (; n < dim; ++n) {
        if (++pos[n] < choices[n].size()) break;
        pos[n] = 0;
      }
      if (n == dim) break;
    }
  };
  auto recurse = [&](auto&& self, std::size_t n, int remaining) -> void {
    if (n == dim) {
      emit_indices(lv);
      return;
    }
    for (int l = 0; l <= remaining; ++l) {
      lv[n] = l;
      self(self, n + 1, remaining - l);
    }
    lv[n] = 0;
  };
  recurse(recurse, 0, level);

  std::sort(all.begin(), all.end(), canonical_less);
  for (auto& id : all) grid.frontier_.push_back(grid.add_node(std::move(id)));
  grid.level_ = level;
  return grid;
}

std::size_t HierGrid::add_node(NodeId id) {
  check_node(id);
  if (id.level.size() != dim_) throw DomainError("node dimension mismatch");
  const std::size_t k = nodes_.size();
  for (std::size_t n = 0; n < dim_; ++n) {
    canonical_.push_back(node_coordinate(id.level[n], id.index[n]));
  }
  totals_.push_back(id.total_level());
  lookup_.emplace(id, k);
  nodes_.push_back(std::move(id));
  for (auto& [name, ch] : channels_) {
    ch.surplus.push_back(0.0);
    ch.set.push_back(0);
  }
  return k;
}

std::span<const double> HierGrid::canonical_coords(std::size_t k) const {
  return {canonical_.data() + k * dim_, dim_};
}

std::vector<double> HierGrid::coords(std::size_t k) const {
  return from_canonical(canonical_coords(k));
}

std::optional<std::size_t> HierGrid::find(const NodeId& id) const {
  auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> HierGrid::to_canonical(std::span<const double> y) const {
  if (y.size() != dim_) {
    throw DomainError(fmt::format("point has {} coordinates, grid has {}",
                                  y.size(), dim_));
  }
  std::vector<double> out(dim_);
  for (std::size_t n = 0; n < dim_; ++n) {
    const auto& iv = domain_[n];
    out[n] = 2.0 * (y[n] - iv.lo) / (iv.hi - iv.lo) - 1.0;
  }
  return out;
}

std::vector<double> HierGrid::from_canonical(std::span<const double> y) const {
  std::vector<double> out(dim_);
  for (std::size_t n = 0; n < dim_; ++n) {
    const auto& iv = domain_[n];
    out[n] = iv.lo + 0.5 * (y[n] + 1.0) * (iv.hi - iv.lo);
  }
  return out;
}

bool HierGrid::has_channel(std::string_view channel) const {
  return channels_.find(channel) != channels_.end();
}

const HierGrid::Channel& HierGrid::channel_ref(std::string_view channel) const {
  auto it = channels_.find(channel);
  if (it == channels_.end()) {
    throw DomainError(fmt::format("unknown output channel '{}'", channel));
  }
  return it->second;
}

bool HierGrid::has_surplus(std::string_view channel, std::size_t k) const {
  auto it = channels_.find(channel);
  return it != channels_.end() && it->second.set.at(k) != 0;
}

double HierGrid::surplus(std::string_view channel, std::size_t k) const {
  const auto& ch = channel_ref(channel);
  if (!ch.set.at(k)) {
    throw IncompleteDataError(
        fmt::format("node {} has no surplus on channel '{}'", k, channel));
  }
  return ch.surplus[k];
}

double HierGrid::eval_canonical(const Channel& ch, std::span<const double> y,
                                int below_level) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!ch.set[k]) continue;
    if (below_level >= 0 && totals_[k] >= below_level) continue;
    const auto& id = nodes_[k];
    double value = ch.surplus[k];
    for (std::size_t n = 0; n < dim_; ++n) {
      value *= hat_unchecked(id.level[n], id.index[n], y[n]);
      if (value == 0.0) break;
    }
    sum += value;
  }
  return sum;
}

void HierGrid::compute_surpluses(std::string_view channel,
                                 std::span<const double> frontier_values) {
  if (frontier_values.size() != frontier_.size()) {
    throw IncompleteDataError(
        fmt::format("expected {} frontier values for channel '{}', got {}",
                    frontier_.size(), channel, frontier_values.size()));
  }
  auto it = channels_.find(channel);
  if (it == channels_.end()) {
    Channel fresh{std::vector<double>(nodes_.size(), 0.0),
                  std::vector<char>(nodes_.size(), 0)};
    it = channels_.emplace(std::string(channel), std::move(fresh)).first;
  }
  Channel& ch = it->second;

  std::vector<char> in_frontier(nodes_.size(), 0);
  for (auto k : frontier_) in_frontier[k] = 1;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!in_frontier[k] && !ch.set[k]) {
      throw IncompleteDataError(fmt::format(
          "node {} precedes the frontier but has no surplus on '{}'", k, channel));
    }
  }

  // Clear first so a repeated call sees the same lower-level interpolant.
  for (auto k : frontier_) ch.set[k] = 0;

  std::vector<std::size_t> order(frontier_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return totals_[frontier_[a]] < totals_[frontier_[b]];
  });

  // Nodes of one total level never see each other's basis functions, so a
  // level may be finished before any of its surpluses are published.
  std::size_t pos = 0;
  while (pos < order.size()) {
    const int lvl = totals_[frontier_[order[pos]]];
    std::size_t end = pos;
    std::vector<std::pair<std::size_t, double>> pending;
    while (end < order.size() && totals_[frontier_[order[end]]] == lvl) {
      const std::size_t k = frontier_[order[end]];
      const double v = frontier_values[order[end]];
      pending.emplace_back(k, v - eval_canonical(ch, canonical_coords(k), lvl));
      ++end;
    }
    for (auto [k, c] : pending) {
      ch.surplus[k] = c;
      ch.set[k] = 1;
    }
    pos = end;
  }
}

void HierGrid::compute_surpluses(std::string_view channel,
                                 const std::map<NodeId, double>& values) {
  std::vector<double> aligned;
  aligned.reserve(frontier_.size());
  for (auto k : frontier_) {
    auto it = values.find(nodes_[k]);
    if (it == values.end()) {
      throw IncompleteDataError(
          fmt::format("missing value for frontier node {} on '{}'", k, channel));
    }
    aligned.push_back(it->second);
  }
  compute_surpluses(channel, aligned);
}

double HierGrid::eval(std::string_view channel, std::span<const double> y) const {
  const auto& ch = channel_ref(channel);
  const auto canon = to_canonical(y);
  return eval_canonical(ch, canon, -1);
}

double HierGrid::integrate(std::string_view channel) const {
  const auto& ch = channel_ref(channel);
  double sum = 0.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!ch.set[k]) continue;
    double w = ch.surplus[k];
    for (std::size_t n = 0; n < dim_; ++n) {
      const int l = nodes_[k].level[n];
      // Hat integral over [-1,1] divided by the box width 2.
      w *= (l == 0) ? 0.5 : 0.5 * spacing(l);
    }
    sum += w;
  }
  return sum;
}

double HierGrid::frontier_error(std::string_view channel) const {
  const auto& ch = channel_ref(channel);
  double e = 0.0;
  for (auto k : frontier_) {
    if (!ch.set[k]) {
      throw IncompleteDataError("frontier surpluses incomplete");
    }
    e = std::max(e, std::abs(ch.surplus[k]));
  }
  return e;
}

RefinementResult HierGrid::refine(const RefinementPolicy& policy) {
  if (!(policy.tau > 0.0)) throw DomainError("refinement tolerance must be > 0");
  if (policy.max_points < 1) throw DomainError("sample budget must be >= 1");
  const auto& ch = channel_ref(policy.channel);

  std::set<NodeId, decltype(&canonical_less)> candidates(&canonical_less);
  for (auto k : frontier_) {
    if (!ch.set[k]) throw IncompleteDataError("frontier surpluses incomplete");
    if (std::abs(ch.surplus[k]) < policy.tau) continue;
    for (auto& c : children(nodes_[k])) {
      if (!lookup_.contains(c)) candidates.insert(std::move(c));
    }
  }

  RefinementResult result;
  const std::size_t room =
      size() >= policy.max_points ? 0 : policy.max_points - size();
  for (const auto& c : candidates) {
    if (result.added.size() == room) {
      result.budget_exhausted = true;
      break;
    }
    result.added.push_back(c);
  }
  if (result.added.empty()) return result;

  frontier_.clear();
  int top = 0;
  for (const auto& c : result.added) {
    frontier_.push_back(add_node(c));
    top = std::max(top, c.total_level());
  }
  level_ = top;
  return result;
}

bool operator==(const HierGrid& a, const HierGrid& b) {
  return a.dim_ == b.dim_ && a.domain_ == b.domain_ && a.nodes_ == b.nodes_ &&
         a.frontier_ == b.frontier_ && a.channels_ == b.channels_ &&
         a.level_ == b.level_;
}

void to_json(nlohmann::json& j, const NodeId& id) {
  j = nlohmann::json{{"level", id.level}, {"index", id.index}};
}

void from_json(const nlohmann::json& j, NodeId& id) {
  j.at("level").get_to(id.level);
  j.at("index").get_to(id.index);
}

void to_json(nlohmann::json& j, const HierGrid& grid) {
  nlohmann::json domain = nlohmann::json::array();
  for (const auto& iv : grid.domain_) domain.push_back({iv.lo, iv.hi});
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    nlohmann::json surpluses = nlohmann::json::object();
    for (const auto& [name, ch] : grid.channels_) {
      if (ch.set[k]) surpluses[name] = ch.surplus[k];
    }
    nodes.push_back({{"level", grid.nodes_[k].level},
                     {"index", grid.nodes_[k].index},
                     {"coords", grid.coords(k)},
                     {"surpluses", std::move(surpluses)}});
  }
  j = nlohmann::json{{"dim", grid.dim_},
                     {"domain", std::move(domain)},
                     {"level", grid.level_},
                     {"frontier", grid.frontier_},
                     {"channels", nlohmann::json::array()},
                     {"nodes", std::move(nodes)}};
  for (const auto& [name, ch] : grid.channels_) j["channels"].push_back(name);
}

void from_json(const nlohmann::json& j, HierGrid& grid) {
  std::vector<Interval> domain;
  for (const auto& iv : j.at("domain")) {
    domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  }
  HierGrid g(j.at("dim").get<std::size_t>(), std::move(domain));
  if (j.contains("channels")) {
    for (const auto& name : j.at("channels")) {
      g.channels_.emplace(name.get<std::string>(), HierGrid::Channel{});
    }
  }
  for (const auto& node : j.at("nodes")) {
    NodeId id;
    node.at("level").get_to(id.level);
    node.at("index").get_to(id.index);
    const std::size_t k = g.add_node(std::move(id));
    for (const auto& [name, value] : node.at("surpluses").items()) {
      auto it = g.channels_.find(name);
      if (it == g.channels_.end()) {
        it = g.channels_
                 .emplace(name, HierGrid::Channel{std::vector<double>(k + 1, 0.0),
                                                  std::vector<char>(k + 1, 0)})
                 .first;
      }
      it->second.surplus[k] = value.get<double>();
      it->second.set[k] = 1;
    }
  }
  if (j.contains("frontier")) {
    j.at("frontier").get_to(g.frontier_);
  } else {
    g.frontier_.resize(g.size());
    std::iota(g.frontier_.begin(), g.frontier_.end(), 0);
  }
  g.level_ = j.value("level", 0);
  grid = std::move(g);
}

}  // namespace uqgroup
