#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace beamqopt;

TEST(Exact, ZeroRatesGiveEmptyOptimum) {
  const auto s = fixtures::make_scenario({{1.0, 5.0, {0.0, 0.0}}, {2.0, 5.0, {0.0, 0.0}}},
                                         {{0, 1.0}, {0, 1.0}}, {{0, 2.0}});
  const auto r = solve_exact(s);
  EXPECT_TRUE(r.schedule.empty());
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_TRUE(r.optimal);
}

TEST(Exact, UnconstrainedTakesEveryUnit) {
  const auto s = fixtures::make_scenario({{2.0, 10.0, {3.0, 4.0}}}, {{0, 1.0}, {0, 1.0}}, {{0, 5.0}});
  const auto r = solve_exact(s);
  EXPECT_EQ(r.schedule.size(), 2u);
  EXPECT_EQ(r.objective, 14.0);
}

TEST(Exact, MatchesEnumerationOnSmallInstances) {
  for (auto kind : {TrafficKind::Uniform, TrafficKind::Hotspot, TrafficKind::MixedPriority})
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      TrafficProfile p;
      p.kind = kind;
      p.flow_count = 3;
      p.unit_count = 2;
      p.beam_count = 2;
      p.slot_count = 1 + seed % 2;
      const Scenario s = generate_scenario(p, seed);
      for (auto scope : {QueueScope::AllUnits, QueueScope::PerSlot}) {
        const auto r = solve_exact(s, 10'000'000, {scope});
        EXPECT_TRUE(r.optimal);
        EXPECT_TRUE(is_feasible(s, r.schedule, {scope}));
        EXPECT_DOUBLE_EQ(r.objective, oracle::best_throughput(s, scope)) << "seed " << seed;
        EXPECT_DOUBLE_EQ(r.objective, weighted_throughput(s, r.schedule));
      }
    }
}

TEST(Exact, NodeLimitReturnsIncumbent) {
  TrafficProfile p;
  p.flow_count = 4;
  p.unit_count = 4;
  p.beam_count = 2;
  const Scenario s = generate_scenario(p, 1);
  const auto r = solve_exact(s, 3);
  EXPECT_FALSE(r.optimal);
  EXPECT_EQ(r.nodes_explored, 3u);
  EXPECT_TRUE(is_feasible(s, r.schedule));
  EXPECT_THROW(solve_exact(s, 0), DomainError);
}

TEST(Exact, IncumbentTraceIsIncreasing) {
  TrafficProfile p;
  p.flow_count = 3;
  p.unit_count = 4;
  const auto r = solve_exact(generate_scenario(p, 2));
  for (std::size_t i = 1; i < r.incumbent_trace.size(); ++i)
    EXPECT_GT(r.incumbent_trace[i], r.incumbent_trace[i - 1]);
  EXPECT_EQ(r.incumbent_trace.back(), r.objective);
}

TEST(Greedy, SingleUnitAssignedIffFeasible) {
  const auto fits = fixtures::make_scenario({{1.0, 2.0, {2.0}}}, {{0, 1.0}}, {{0, 1.0}});
  EXPECT_EQ(solve_greedy(fits).schedule.size(), 1u);
  const auto too_big = fixtures::make_scenario({{1.0, 1.0, {2.0}}}, {{0, 1.0}}, {{0, 1.0}});
  EXPECT_TRUE(solve_greedy(too_big).schedule.empty());
}

TEST(Greedy, HigherValueWinsContention) {
  const auto s = fixtures::make_scenario({{1.0, 5.0, {2.0}}, {2.0, 5.0, {3.0}}}, {{0, 1.0}}, {{0, 1.0}});
  const auto r = solve_greedy(s);
  EXPECT_TRUE(r.schedule.contains(1, 0));
  EXPECT_EQ(r.objective, 6.0);
}

TEST(Greedy, NeverBeatsExact) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrafficProfile p;
    p.kind = static_cast<TrafficKind>(seed % 3);
    p.flow_count = 2 + seed % 3;
    p.unit_count = 2 + seed % 4;
    p.beam_count = 1 + seed % 2;
    p.slot_count = 1 + seed % 2;
    const Scenario s = generate_scenario(p, seed);
    const auto g = solve_greedy(s);
    const auto e = solve_exact(s);
    EXPECT_TRUE(is_feasible(s, g.schedule));
    EXPECT_LE(g.objective, e.objective) << "seed " << seed;
    EXPECT_LE(throughput_ratio(s, g.schedule, e.schedule), 1.0);
  }
}

TEST(SolveResultJson, CarriesObjectiveAndSchedule) {
  const auto r = solve_exact(fixtures::toy6());
  const auto j = to_json(r);
  EXPECT_EQ(j.at("objective").get<double>(), 6.0);
  EXPECT_TRUE(j.at("optimal").get<bool>());
  EXPECT_EQ(j.at("schedule").dump(), "[[0,0]]");
}
