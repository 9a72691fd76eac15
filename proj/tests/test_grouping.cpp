#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "uqgroup/errors.hpp"
#include "uqgroup/grouping.hpp"

using namespace uqgroup;

namespace {

std::vector<std::vector<double>> slot_values(const GroupingPlan& plan,
                                             const std::map<SampleId, double>& its) {
  std::vector<std::vector<double>> out;
  for (const auto& e : plan.ensembles) {
    std::vector<double> g;
    for (auto id : e.slots) g.push_back(its.at(id));
    out.push_back(g);
  }
  return out;
}

}  // namespace

TEST_CASE("natural grouping and padding") {
  const std::vector<SampleId> ids{1, 2, 3, 4, 5};
  const auto p = group_natural(ids, 2);
  REQUIRE(p.ensembles.size() == 3);
  CHECK(p.ensembles[0].slots == std::vector<SampleId>{1, 2});
  CHECK(p.ensembles[2].slots == std::vector<SampleId>{5, 5});
  CHECK(p.ensembles[2].padding == 1);
  CHECK(p.samples() == ids);
  CHECK(group_natural(std::vector<SampleId>{}, 4).ensembles.empty());
  CHECK_THROWS_AS(group_natural(ids, 0), ConfigError);
}

TEST_CASE("key grouping") {
  // a=0 b=1 c=2 d=3
  const std::vector<SampleId> ids{0, 1, 2, 3};
  const std::map<SampleId, double> key{{0, 5}, {1, 1}, {2, 3}, {3, 2}};
  const auto p = group_by_key(ids, key, 2, 2, Strategy::Surrogate);
  CHECK(p.ensembles[0].slots == std::vector<SampleId>{1, 3});
  CHECK(p.ensembles[1].slots == std::vector<SampleId>{2, 0});

  const std::map<SampleId, double> flat{{0, 1}, {1, 1}, {2, 1}, {3, 1}};
  CHECK(group_by_key(ids, flat, 2, 1, Strategy::Surrogate).samples() == ids);

  const std::map<SampleId, double> missing{{0, 1}};
  CHECK_THROWS_AS(group_by_key(ids, missing, 2, 1, Strategy::Surrogate), ConfigError);
}

TEST_CASE("R formula examples") {
  GroupingPlan plan{1, 2, Strategy::Natural, {{{0, 1}, 0}, {{2, 3}, 0}}};
  const std::map<SampleId, double> its{{0, 10}, {1, 20}, {2, 30}, {3, 30}};
  const LevelIterations lvl[] = {attach_iterations(plan, its)};
  const auto r = compute_R(lvl);
  CHECK(r.R == doctest::Approx(10.0 / 9.0).epsilon(1e-15));
  CHECK(r.levels[0].R == r.R);

  const std::map<SampleId, double> same{{0, 7}, {1, 7}, {2, 9}, {3, 9}};
  const LevelIterations perfect[] = {attach_iterations(plan, same)};
  CHECK(compute_R(perfect).R == 1.0);

  const LevelIterations empty[] = {{GroupingPlan{3, 2, Strategy::Natural, {}}, {}}};
  const auto e = compute_R(empty);
  CHECK(e.levels.empty());
  CHECK(e.notes.size() == 1);

  CHECK_THROWS_AS(attach_iterations(plan, std::map<SampleId, double>{{0, 1}}), IncompleteDataError);
}

TEST_CASE("R matches the brute-force oracle and is permutation invariant") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> it(1, 400);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t S = trial % 2 ? 4 : 2;
    std::vector<LevelIterations> levels;
    std::vector<std::vector<std::vector<double>>> raw;
    SampleId next = 0;
    for (int l = 1; l <= 3; ++l) {
      std::vector<SampleId> ids;
      std::map<SampleId, double> its;
      for (int k = 0; k < 3 + trial % 7; ++k) {
        ids.push_back(next);
        its[next++] = it(rng);
      }
      auto plan = group_natural(ids, S, l);
      raw.push_back(slot_values(plan, its));
      levels.push_back(attach_iterations(plan, its));
    }
    const auto r = compute_R(levels);
    CHECK(std::abs(r.R - oracle::brute_force_R(raw)) <= 1e-12);
    CHECK(r.R >= 1.0);

    // Reverse groups and slots.
    for (auto& l : levels) {
      std::reverse(l.plan.ensembles.begin(), l.plan.ensembles.end());
      std::reverse(l.slot_iterations.begin(), l.slot_iterations.end());
      for (auto& g : l.slot_iterations) std::reverse(g.begin(), g.end());
    }
    CHECK(std::abs(compute_R(levels).R - r.R) <= 1e-12);
  }
}

TEST_CASE("base curve and predicted speed-up") {
  std::istringstream in("S,speedup\n4,2.72\n8,3.9\n");
  const auto curve = read_base_curve(in);
  CHECK(curve.at(4) == 2.72);
  CHECK(predicted_speedup(1.15, 4, curve) == doctest::Approx(2.37).epsilon(0.005));
  CHECK(predicted_speedup(1.0, 8, curve) == 3.9);
  CHECK_THROWS_AS(predicted_speedup(1.0, 16, curve), ConfigError);
  std::istringstream bad("4,2\nx,y\n");
  CHECK_THROWS_AS(read_base_curve(bad), ConfigError);
}

TEST_CASE("strategy tags") {
  CHECK(parse_strategies("nat,sur,its,sur") ==
        std::vector<Strategy>{Strategy::Natural, Strategy::Surrogate, Strategy::Iterations});
  CHECK(tag(Strategy::Parameter) == "par");
  CHECK_THROWS_AS(parse_strategy("xyz"), ConfigError);
}
