#pragma once

#include <cstdint>
#include <vector>

#include "beamqopt/beamqopt.hpp"

namespace fixtures {

using namespace beamqopt;

struct FlowSpec {
  double weight;
  double capacity;
  std::vector<double> rates;
};

struct UnitSpec {
  std::size_t slot;
  double power;
};

/// Units get beam = position, frequency 0.
inline Scenario make_scenario(const std::vector<FlowSpec> &flows, const std::vector<UnitSpec> &units,
                              std::map<std::size_t, double> limits, double dq = 1.0, double dp = 1.0) {
  Scenario s;
  for (std::size_t j = 0; j < units.size(); ++j)
    s.units.push_back({j, j, 0, units[j].slot, units[j].power});
  for (std::size_t k = 0; k < flows.size(); ++k)
    s.flows.push_back({k, flows[k].weight, flows[k].capacity, flows[k].rates});
  s.power_limits = std::move(limits);
  s.dq = dq;
  s.dp = dp;
  validate(s);
  return s;
}

/// Two flows contending for one unit, 6 QUBO bits: 2 decisions, 1 power
/// slack bit, 2 + 1 queue slack bits. Optimum: flow 0 alone (value 6).
inline Scenario toy6() {
  return make_scenario({{2.0, 3.0, {3.0}}, {1.0, 1.0, {1.0}}}, {{0, 1.0}}, {{0, 1.0}});
}

/// The 2-flow / 2-unit instance used for the p=1 QAOA acceptance check:
/// one shared slot whose power limit and one flow's queue both bind.
inline TrafficProfile two_by_two_profile() {
  TrafficProfile p;
  p.flow_count = 2;
  p.unit_count = 2;
  p.beam_count = 2;
  p.volume_max = 3;
  return p;
}
inline constexpr std::uint64_t kTwoByTwoSeed = 3;

inline TrafficProfile random_profile(TrafficKind kind, std::uint64_t seed) {
  TrafficProfile p;
  p.kind = kind;
  p.flow_count = 2 + seed % 2;
  p.unit_count = 2;
  p.beam_count = 1 + seed % 2;
  p.volume_max = 3;
  return p;
}

} // namespace fixtures
