#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace beamqopt;

namespace {

struct Toy {
  Scenario s = fixtures::toy6();
  QuboModel q = build_qubo(s, default_lambdas(s));
  Bitstring optimum = encode_with_slack(q, s, solve_exact(s).schedule);
};

double binomial(std::size_t n, std::size_t k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

} // namespace

TEST(Hamming, Basics) {
  EXPECT_EQ(hamming_distance(bits_from_string("0110"), bits_from_string("0110")), 0u);
  EXPECT_EQ(hamming_distance(bits_from_string("0110"), bits_from_string("1110")), 1u);
  EXPECT_THROW(hamming_distance(bits_from_string("01"), bits_from_string("011")), DomainError);
}

TEST(Hamming, EqualsPopcountOfXor) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t a = rng() & 0xfffff, b = rng() & 0xfffff;
    EXPECT_EQ(hamming_distance(bits_from_index(a, 20), bits_from_index(b, 20)),
              static_cast<std::size_t>(std::popcount(a ^ b)));
  }
}

TEST(ThroughputRatio, Cases) {
  const Scenario s = fixtures::toy6();
  const auto opt = solve_exact(s).schedule;
  EXPECT_EQ(throughput_ratio(s, opt, opt), 1.0);
  EXPECT_EQ(throughput_ratio(s, {}, opt), 0.0);
  EXPECT_EQ(throughput_ratio(s, {}, {}), 1.0);
  EXPECT_THROW(throughput_ratio(s, opt, {}), DomainError);
}

TEST(Profile, PureOptimalStateAtDistanceZero) {
  const Toy t;
  const auto p = hamming_profile(Statevector::basis(t.q.n, index_from_bits(t.optimum)), t.q, t.s,
                                 t.optimum);
  EXPECT_EQ(p.probability_mass[0], 1.0);
  EXPECT_EQ(p.min_throughput_gap[0], 0.0);
  for (std::size_t h = 1; h < p.distances.size(); ++h)
    EXPECT_TRUE(std::isnan(p.min_throughput_gap[h]));
}

TEST(Profile, UniformStateIsBinomial) {
  TrafficProfile tp;
  tp.flow_count = 2;
  tp.unit_count = 3;
  const Scenario s = generate_scenario(tp, 3);
  const QuboModel q = build_qubo(s, default_lambdas(s));
  const Bitstring ref = encode_with_slack(q, s, solve_exact(s).schedule);
  const std::size_t d = q.index.decision_count();
  const auto p = hamming_profile(init_uniform(q.n), q, s, ref);
  ASSERT_EQ(p.distances.size(), d + 1);
  for (std::size_t h = 0; h <= d; ++h)
    EXPECT_NEAR(p.probability_mass[h], binomial(d, h) / std::ldexp(1.0, static_cast<int>(d)), 1e-9);

  ProfileOptions all;
  all.decision_bits_only = false;
  const auto full = hamming_profile(init_uniform(q.n), q, s, ref, all);
  ASSERT_EQ(full.distances.size(), q.n + 1);
  for (std::size_t h = 0; h <= q.n; ++h)
    EXPECT_NEAR(full.probability_mass[h], binomial(q.n, h) / std::ldexp(1.0, static_cast<int>(q.n)),
                1e-9);
}

TEST(Profile, OptimizedStateSumsToOneWithZeroGapAtOptimum) {
  const Toy t;
  const QaoaProblem problem(t.q, init_uniform(t.q.n), MixerSpec::transverse());
  const auto [params, trace] = layerwise_train(problem, 1, HillClimbConfig{}, 4);
  const auto p = hamming_profile(problem.state(params), t.q, t.s, t.optimum);
  double total = 0.0;
  for (double m : p.probability_mass)
    total += m;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(p.min_throughput_gap[0], 0.0);
  for (std::size_t h = 0; h < p.distances.size(); ++h)
    if (!std::isnan(p.min_throughput_gap[h])) {
      EXPECT_GE(p.min_throughput_gap[h], 0.0);
    }
}

TEST(Profile, HistogramInputMatchesNormalizedCounts) {
  const Toy t;
  Histogram h;
  h[index_from_bits(t.optimum)] = 3;
  h[0] = 1;
  const auto p = hamming_profile(h, t.q, t.s, t.optimum);
  EXPECT_DOUBLE_EQ(p.probability_mass[0], 0.75);
  EXPECT_DOUBLE_EQ(p.probability_mass[1], 0.25);
  EXPECT_THROW(hamming_profile(Histogram{}, t.q, t.s, t.optimum), DomainError);
}

TEST(Profile, CsvFormat) {
  HammingProfile p;
  p.distances = {0, 1};
  p.probability_mass = {0.25, 0.75};
  p.min_throughput_gap = {0.0, std::nan("")};
  std::ostringstream out;
  write_profile_csv(out, p);
  EXPECT_EQ(out.str(), "distance,probability,min_throughput_gap\n0,0.25,0\n1,0.75,nan\n");
}

TEST(SuccessProbability, PureAndUniform) {
  const Toy t;
  const auto e = all_energies(t.q);
  const auto ground = std::min_element(e.begin(), e.end()) - e.begin();
  EXPECT_NEAR(success_probability(Statevector::basis(t.q.n, ground), t.q), 1.0, 1e-15);
  std::size_t minimizers = 0;
  for (double x : e)
    minimizers += x <= e[ground] + 1e-9 * std::abs(e[ground]);
  ASSERT_EQ(minimizers, 1u);
  EXPECT_NEAR(success_probability(init_uniform(t.q.n), t.q), std::ldexp(1.0, -static_cast<int>(t.q.n)),
              1e-15);
}

TEST(SuccessProbability, QaoaBeatsUniformOnToy) {
  const Toy t;
  const QaoaProblem problem(t.q, init_uniform(t.q.n), MixerSpec::transverse());
  const double baseline = std::ldexp(1.0, -static_cast<int>(t.q.n));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [params, trace] = layerwise_train(problem, 1, HillClimbConfig{}, seed);
    EXPECT_GE(success_probability(problem.state(params), problem.energies), baseline) << seed;
  }
}

TEST(MostProbable, PureStateDecodesToItsSchedule) {
  const Toy t;
  const auto out = most_probable_schedule(Statevector::basis(t.q.n, index_from_bits(t.optimum)), t.q, t.s);
  EXPECT_EQ(out.schedule, solve_exact(t.s).schedule);
  EXPECT_NEAR(out.probability, 1.0, 1e-15);
}

TEST(MostProbable, RepairFoldsInfeasibleStates) {
  const Toy t;
  // Both flows on the single unit repairs to flow 0 alone.
  Bitstring both(t.q.n, 0);
  both[0] = both[1] = 1;
  const auto out = most_probable_schedule(Statevector::basis(t.q.n, index_from_bits(both)), t.q, t.s);
  Schedule expected;
  expected.assign(0, 0);
  EXPECT_EQ(out.schedule, expected);
  EXPECT_TRUE(is_feasible(t.s, out.schedule));
}
