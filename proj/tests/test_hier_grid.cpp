#include <doctest.h>

#include <cmath>
#include <vector>

#include "uqgroup/errors.hpp"
#include "uqgroup/hier_grid.hpp"

using namespace uqgroup;

namespace {

std::vector<double> frontier_values(const HierGrid& g, double (*f)(std::span<const double>)) {
  std::vector<double> v;
  for (auto k : g.frontier()) {
    const auto y = g.coords(k);
    v.push_back(f(y));
  }
  return v;
}

double square(std::span<const double> y) { return y[0] * y[0]; }

double smooth2d(std::span<const double> y) { return std::sin(y[0]) * std::exp(0.5 * y[1]) + y[0] * y[1]; }

}  // namespace

TEST_CASE("node coordinates and hats") {
  CHECK(node_coordinate(0, 0) == -1.0);
  CHECK(node_coordinate(0, 1) == 1.0);
  CHECK(node_coordinate(1, 1) == 0.0);
  CHECK(node_coordinate(2, 3) == 0.5);
  CHECK_THROWS_AS(check_level_index(2, 2), DomainError);
  CHECK_THROWS_AS(check_level_index(0, 2), DomainError);
  CHECK_THROWS_AS(check_level_index(-1, 0), DomainError);

  NodeId center{{0, 0}, {0, 0}};
  center = NodeId{{1, 1}, {1, 1}};
  const std::vector<double> at{0.0, 0.0};
  const std::vector<double> half{0.5, 0.5};
  const std::vector<double> out{2.0, 0.0};
  CHECK(basis_eval(center, at) == 1.0);
  CHECK(basis_eval(center, half) == doctest::Approx(0.25));
  CHECK(basis_eval(NodeId{{2}, {1}}, std::vector<double>{0.2}) == 0.0);
  CHECK(basis_eval(center, out) == 0.0);
}

TEST_CASE("children rule") {
  CHECK(children(NodeId{{1}, {1}}) == std::vector<NodeId>{{{2}, {1}}, {{2}, {3}}});
  CHECK(children(NodeId{{0}, {0}}) == std::vector<NodeId>{{{1}, {1}}});
  CHECK(children(NodeId{{0}, {1}}) == std::vector<NodeId>{{{1}, {1}}});
  const auto c = children(NodeId{{1, 0}, {1, 1}});
  REQUIRE(c.size() == 3);
  CHECK(std::find(c.begin(), c.end(), NodeId{{2, 0}, {1, 1}}) != c.end());
  CHECK(std::find(c.begin(), c.end(), NodeId{{2, 0}, {3, 1}}) != c.end());
  CHECK(std::find(c.begin(), c.end(), NodeId{{1, 1}, {1, 1}}) != c.end());
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(canonical_less(c[i - 1], c[i]));

  CHECK(children(NodeId{{kMaxHatLevel}, {1}}).empty());
  CHECK(children(NodeId{{kMaxHatLevel, 1}, {1, 1}}) ==
        std::vector<NodeId>{{{kMaxHatLevel, 2}, {1, 1}}, {{kMaxHatLevel, 2}, {1, 3}}});
}

TEST_CASE("surpluses of y^2 match the hand table") {
  auto g = HierGrid::full(1, 1);
  g.compute_surpluses("v", frontier_values(g, square));
  CHECK(g.surplus("v", *g.find(NodeId{{0}, {0}})) == 1.0);
  CHECK(g.surplus("v", *g.find(NodeId{{0}, {1}})) == 1.0);
  CHECK(g.surplus("v", *g.find(NodeId{{1}, {1}})) == -1.0);

  const auto r = g.refine({0.5, "v", 100});
  CHECK(r.added == std::vector<NodeId>{{{2}, {1}}, {{2}, {3}}});
  g.compute_surpluses("v", frontier_values(g, square));
  CHECK(g.surplus("v", *g.find(NodeId{{2}, {3}})) == -0.25);
  CHECK(g.surplus("v", *g.find(NodeId{{2}, {1}})) == -0.25);
}

TEST_CASE("surplus decay for y^2") {
  auto g = HierGrid::full(1, 6);
  g.compute_surpluses("v", frontier_values(g, square));
  double prev = 0.0;
  for (int l = 1; l <= 6; ++l) {
    double mx = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.node(k).level[0] == l) mx = std::max(mx, std::abs(g.surplus("v", k)));
    }
    CHECK(mx == doctest::Approx(std::pow(4.0, -(l - 1))));
    if (l >= 2) CHECK(mx <= prev / 2.0);
    prev = mx;
  }
}

TEST_CASE("interpolation is exact at nodes") {
  const std::vector<Interval> dom{{-2.0, 2.0}, {0.0, 1.0}};
  auto g = HierGrid::full(2, 3, dom);
  g.compute_surpluses("v", frontier_values(g, smooth2d));
  for (int step = 0; step < 3; ++step) {
    g.refine({1e-3, "v", 400});
    g.compute_surpluses("v", frontier_values(g, smooth2d));
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto y = g.coords(k);
    CHECK(std::abs(g.eval("v", y) - smooth2d(y)) <= 1e-14 * std::max(1.0, std::abs(smooth2d(y))));
  }
}

TEST_CASE("constant and linear surrogates") {
  auto g = HierGrid::full(3, 2);
  std::vector<double> v(g.frontier().size(), 3.7);
  g.compute_surpluses("c", v);
  CHECK(g.eval("c", std::vector<double>{0.13, -0.77, 0.4}) == doctest::Approx(3.7).epsilon(1e-15));
  CHECK(g.integrate("c") == doctest::Approx(3.7).epsilon(1e-14));

  auto lin = HierGrid::full(1, 0);
  lin.compute_surpluses("y", std::vector<double>{-1.0, 1.0});
  CHECK(std::abs(lin.integrate("y")) < 1e-15);
  CHECK(lin.eval("y", std::vector<double>{0.3}) == doctest::Approx(0.3));
}

TEST_CASE("level-4 error envelope and integral of y^2") {
  auto g = HierGrid::full(1, 4);
  g.compute_surpluses("v", frontier_values(g, square));
  CHECK(std::abs(g.eval("v", std::vector<double>{0.3}) - 0.09) <= std::pow(2.0, -6));
  auto g3 = HierGrid::full(1, 3);
  g3.compute_surpluses("v", frontier_values(g3, square));
  CHECK(std::abs(g3.integrate("v") - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("piecewise linear data has zero finer surpluses") {
  auto g = HierGrid::full(1, 2);
  auto f = [](std::span<const double> y) { return y[0] <= 0.0 ? 1.0 + y[0] : 1.0 - 0.5 * y[0]; };
  std::vector<double> v;
  for (auto k : g.frontier()) v.push_back(f(g.coords(k)));
  g.compute_surpluses("v", v);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.node(k).level[0] == 2) CHECK(g.surplus("v", k) == 0.0);
  }
}

TEST_CASE("surplus computation is idempotent and needs all values") {
  auto g = HierGrid::full(2, 2);
  const auto v = frontier_values(g, smooth2d);
  g.compute_surpluses("v", v);
  const auto copy = g;
  g.compute_surpluses("v", v);
  CHECK(g == copy);

  std::map<NodeId, double> partial;
  partial[g.node(g.frontier().front())] = 1.0;
  CHECK_THROWS_AS(g.compute_surpluses("w", partial), IncompleteDataError);
  CHECK_THROWS_AS(g.eval("nope", std::vector<double>{0.0, 0.0}), DomainError);
}

TEST_CASE("refinement soundness and budget") {
  const std::vector<Interval> dom{{0.0, 1.0}, {0.0, 1.0}};
  auto g2 = [](std::span<const double> y) {
    const double r = y[0] * y[0] + y[1] * y[1];
    return (r < 0.25 || r > 0.65) ? 1.0 : 0.0;
  };
  auto g = HierGrid::full(2, 1, dom);
  std::vector<double> v;
  for (auto k : g.frontier()) v.push_back(g2(g.coords(k)));
  g.compute_surpluses("G", v);
  for (int step = 0; step < 6; ++step) {
    const std::size_t before = g.size();
    std::vector<std::size_t> old_frontier = g.frontier();
    const auto res = g.refine({5e-4, "G", 300});
    if (res.added.empty()) break;
    CHECK(g.size() <= std::max<std::size_t>(300, before));
    for (const auto& n : res.added) {
      bool has_parent = false;
      for (auto k : old_frontier) {
        const auto ch = children(g.node(k));
        if (std::find(ch.begin(), ch.end(), n) != ch.end() && std::abs(g.surplus("G", k)) >= 5e-4) {
          has_parent = true;
        }
      }
      CHECK(has_parent);
    }
    v.clear();
    for (auto k : g.frontier()) v.push_back(g2(g.coords(k)));
    g.compute_surpluses("G", v);
    if (res.budget_exhausted) {
      CHECK(g.size() == 300);
      break;
    }
  }
}

TEST_CASE("all frontier surpluses below tau stop refinement") {
  auto g = HierGrid::full(1, 2);
  g.compute_surpluses("v", frontier_values(g, square));
  const auto before = g.frontier();
  const auto r = g.refine({0.3, "v", 100});
  CHECK(r.added.empty());
  CHECK(g.frontier() == before);
}

TEST_CASE("JSON round trip") {
  auto g = HierGrid::full(2, 2, {{-2.0, 2.0}, {0.0, 1.0}});
  g.compute_surpluses("v", frontier_values(g, smooth2d));
  g.refine({1e-2, "v", 100});
  g.compute_surpluses("v", frontier_values(g, smooth2d));
  nlohmann::json j;
  to_json(j, g);
  HierGrid back;
  from_json(nlohmann::json::parse(j.dump()), back);
  CHECK(back == g);
  CHECK(back.eval("v", std::vector<double>{0.3, 0.6}) == g.eval("v", std::vector<double>{0.3, 0.6}));
}
