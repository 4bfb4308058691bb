#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "beamqopt/errors.hpp"
#include "beamqopt/random.hpp"

namespace beamqopt {

/// A (beam, frequency, slot) tuple; the atomic schedulable resource.
struct ResourceUnit {
  std::size_t id = 0;
  std::size_t beam = 0;
  std::size_t frequency = 0;
  std::size_t slot = 0;
  double power_required = 0.0;

  bool operator==(const ResourceUnit &) const = default;
};

struct Flow {
  std::size_t id = 0;
  double weight = 1.0;
  double queue_capacity = 0.0;
  /// Achievable rate on each resource unit, indexed by unit id.
  std::vector<double> rates;

  bool operator==(const Flow &) const = default;
};

/// One scheduling instance. Flow and unit ids equal their positions.
struct Scenario {
  std::vector<Flow> flows;
  std::vector<ResourceUnit> units;
  std::map<std::size_t, double> power_limits;
  double dq = 1.0;
  double dp = 1.0;
  std::uint64_t rng_seed = 0;

  std::size_t flow_count() const { return flows.size(); }
  std::size_t unit_count() const { return units.size(); }
  std::size_t decision_count() const { return flows.size() * units.size(); }

  double rate(std::size_t flow, std::size_t unit) const { return flows[flow].rates[unit]; }
  double value(std::size_t flow, std::size_t unit) const {
    return flows[flow].weight * flows[flow].rates[unit];
  }

  /// Slots that hold at least one resource unit, ascending.
  std::vector<std::size_t> active_slots() const {
    std::set<std::size_t> slots;
    for (const auto &u : units)
      slots.insert(u.slot);
    return {slots.begin(), slots.end()};
  }

  bool operator==(const Scenario &) const = default;
};

/// Throws DomainError on any broken structural invariant.
inline void validate(const Scenario &s) {
  if (!(s.dq > 0.0) || !(s.dp > 0.0))
    throw DomainError("scenario: dq and dp must be positive");
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> tuples;
  for (std::size_t j = 0; j < s.units.size(); ++j) {
    const auto &u = s.units[j];
    if (u.id != j)
      throw DomainError("scenario: unit ids must be 0..|U|-1 in order");
    if (!(u.power_required >= 0.0))
      throw DomainError("scenario: negative power_required on unit " + std::to_string(j));
    if (!tuples.emplace(u.beam, u.frequency, u.slot).second)
      throw DomainError("scenario: duplicate (beam, frequency, slot) on unit " +
                        std::to_string(j));
    auto it = s.power_limits.find(u.slot);
    if (it == s.power_limits.end())
      throw DomainError("scenario: no power limit for slot " + std::to_string(u.slot));
  }
  for (const auto &[slot, limit] : s.power_limits)
    if (!(limit > 0.0))
      throw DomainError("scenario: power limit must be positive for slot " +
                        std::to_string(slot));
  for (std::size_t k = 0; k < s.flows.size(); ++k) {
    const auto &f = s.flows[k];
    if (f.id != k)
      throw DomainError("scenario: flow ids must be 0..|K|-1 in order");
    if (!(f.weight > 0.0))
      throw DomainError("scenario: flow weight must be positive");
    if (!(f.queue_capacity >= 0.0))
      throw DomainError("scenario: negative queue capacity");
    if (f.rates.size() != s.units.size())
      throw DomainError("scenario: flow " + std::to_string(k) +
                        " must carry a rate for every unit");
    for (double r : f.rates)
      if (!(r >= 0.0))
        throw DomainError("scenario: negative rate on flow " + std::to_string(k));
  }
}

// ---------------------------------------------------------------------------
// Generation

enum class TrafficKind { Uniform, Hotspot, MixedPriority };

/// Generator knobs. Rates, volumes and powers are drawn as integers in units
/// of dq (rates, volumes) or dp (powers) and then multiplied by `scale`, so
/// rescaling by `scale` yields exact multiples of the slack quanta.
struct TrafficProfile {
  TrafficKind kind = TrafficKind::Uniform;
  std::size_t flow_count = 2;
  std::size_t unit_count = 2;
  std::size_t beam_count = 1;
  std::size_t slot_count = 1;

  std::int64_t volume_min = 1;
  std::int64_t volume_max = 4;
  std::int64_t rate_min = 1;
  std::int64_t rate_max = 3;
  std::int64_t off_beam_rate_max = 1;
  std::int64_t power_min = 1;
  std::int64_t power_max = 2;
  /// Slot power limit as a fraction of the slot's total unit power.
  double power_headroom = 0.6;

  double hot_beam_fraction = 0.25;
  bool correlate_weight_volume = false;

  double dq = 1.0;
  double dp = 1.0;
  double scale = 1.0;
};

inline const char *to_string(TrafficKind kind) {
  switch (kind) {
  case TrafficKind::Uniform: return "uniform";
  case TrafficKind::Hotspot: return "hotspot";
  case TrafficKind::MixedPriority: return "mixed";
  }
  return "?";
}

inline TrafficKind parse_traffic_kind(const std::string &name) {
  if (name == "uniform") return TrafficKind::Uniform;
  if (name == "hotspot") return TrafficKind::Hotspot;
  if (name == "mixed" || name == "mixed-priority") return TrafficKind::MixedPriority;
  throw ConfigError("unknown traffic profile '" + name + "'");
}

namespace detail {

inline void check_profile(const TrafficProfile &p) {
  if (p.flow_count < 1 || p.unit_count < 1 || p.beam_count < 1 || p.slot_count < 1)
    throw ConfigError("profile: flow, unit, beam and slot counts must be >= 1");
  if (p.volume_min < 0 || p.volume_min > p.volume_max)
    throw ConfigError("profile: empty volume range");
  if (p.rate_min < 0 || p.rate_min > p.rate_max)
    throw ConfigError("profile: empty rate range");
  if (p.off_beam_rate_max < 0)
    throw ConfigError("profile: negative off-beam rate bound");
  if (p.power_min < 0 || p.power_min > p.power_max)
    throw ConfigError("profile: empty power range");
  if (!(p.power_headroom > 0.0))
    throw ConfigError("profile: power headroom must be positive");
  if (!(p.hot_beam_fraction > 0.0) || p.hot_beam_fraction > 1.0)
    throw ConfigError("profile: hot beam fraction must lie in (0, 1]");
  if (!(p.dq > 0.0) || !(p.dp > 0.0) || !(p.scale > 0.0))
    throw ConfigError("profile: dq, dp and scale must be positive");
}

template <std::size_t N>
double pick(std::mt19937_64 &rng, const std::array<double, N> &choices) {
  return choices[static_cast<std::size_t>(uniform_int(rng, 0, N - 1))];
}

} // namespace detail

inline Scenario generate_scenario(const TrafficProfile &profile, std::uint64_t seed) {
  detail::check_profile(profile);
  auto rng = make_rng(seed);

  Scenario s;
  s.dq = profile.dq;
  s.dp = profile.dp;
  s.rng_seed = seed;

  // Units fill beams first, then slots, then frequency channels.
  const std::size_t per_freq = profile.beam_count * profile.slot_count;
  for (std::size_t j = 0; j < profile.unit_count; ++j) {
    ResourceUnit u;
    u.id = j;
    u.beam = j % profile.beam_count;
    u.slot = (j / profile.beam_count) % profile.slot_count;
    u.frequency = j / per_freq;
    u.power_required = static_cast<double>(uniform_int(rng, profile.power_min, profile.power_max)) *
                       profile.dp * profile.scale;
    s.units.push_back(u);
  }
  for (std::size_t slot : s.active_slots()) {
    double total = 0.0, largest = 0.0;
    for (const auto &u : s.units)
      if (u.slot == slot) {
        total += u.power_required;
        largest = std::max(largest, u.power_required);
      }
    const double quantum = profile.dp * profile.scale;
    double limit = std::round(profile.power_headroom * total / quantum) * quantum;
    limit = std::max({limit, largest, quantum});
    s.power_limits[slot] = limit;
  }

  static constexpr std::array<double, 3> kUniformWeights{1.0, 2.0, 4.0};
  static constexpr std::array<double, 2> kLowBand{1.0, 2.0};
  static constexpr std::array<double, 2> kHighBand{4.0, 8.0};

  const std::size_t hot_beams = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(profile.hot_beam_fraction *
                                           static_cast<double>(profile.beam_count))),
      1, profile.beam_count);
  const std::size_t cold_beams = profile.beam_count - hot_beams;
  const std::size_t hot_flows = (profile.flow_count + 1) / 2;

  std::vector<std::size_t> home_beam(profile.flow_count);
  for (std::size_t k = 0; k < profile.flow_count; ++k) {
    Flow f;
    f.id = k;
    switch (profile.kind) {
    case TrafficKind::Uniform:
      home_beam[k] = k % profile.beam_count;
      f.weight = detail::pick(rng, kUniformWeights);
      break;
    case TrafficKind::MixedPriority:
      home_beam[k] = k % profile.beam_count;
      f.weight = (k % 2 == 0) ? detail::pick(rng, kHighBand) : detail::pick(rng, kLowBand);
      break;
    case TrafficKind::Hotspot:
      if (k < hot_flows || cold_beams == 0) {
        home_beam[k] = k % hot_beams;
        f.weight = k < hot_flows ? detail::pick(rng, kHighBand) : detail::pick(rng, kLowBand);
      } else {
        home_beam[k] = hot_beams + (k - hot_flows) % cold_beams;
        f.weight = detail::pick(rng, kLowBand);
      }
      break;
    }
    std::int64_t volume = uniform_int(rng, profile.volume_min, profile.volume_max);
    if (profile.correlate_weight_volume) {
      const double rank = std::log2(f.weight) / 3.0; // weights span 1..8
      volume = profile.volume_min +
               std::lround(rank * static_cast<double>(profile.volume_max - profile.volume_min));
    }
    f.queue_capacity = static_cast<double>(volume) * profile.dq * profile.scale;
    f.rates.resize(profile.unit_count);
    for (std::size_t j = 0; j < profile.unit_count; ++j) {
      const std::int64_t units_of_dq =
          s.units[j].beam == home_beam[k] ? uniform_int(rng, profile.rate_min, profile.rate_max)
                                          : uniform_int(rng, 0, profile.off_beam_rate_max);
      f.rates[j] = static_cast<double>(units_of_dq) * profile.dq * profile.scale;
    }
    s.flows.push_back(std::move(f));
  }
  return s;
}

/// Divides every physical magnitude (rates, capacities, unit powers, slot
/// limits) by `factor`. Weights and slack quanta are unchanged.
inline Scenario rescale_scenario(const Scenario &s, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw DomainError("rescale factor must be positive and finite");
  Scenario out = s;
  if (factor == 1.0)
    return out;
  for (auto &f : out.flows) {
    f.queue_capacity /= factor;
    for (double &r : f.rates)
      r /= factor;
  }
  for (auto &u : out.units)
    u.power_required /= factor;
  for (auto &[slot, limit] : out.power_limits)
    limit /= factor;
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Scenario &s) {
  using nlohmann::json;
  json flows = json::array();
  for (const auto &f : s.flows) {
    json rates = json::object();
    for (std::size_t j = 0; j < f.rates.size(); ++j)
      rates[std::to_string(j)] = f.rates[j];
    flows.push_back({{"id", f.id},
                     {"weight", f.weight},
                     {"queue_capacity", f.queue_capacity},
                     {"rates", rates}});
  }
  json units = json::array();
  for (const auto &u : s.units)
    units.push_back({{"id", u.id},
                     {"beam", u.beam},
                     {"frequency", u.frequency},
                     {"slot", u.slot},
                     {"power_required", u.power_required}});
  json limits = json::object();
  for (const auto &[slot, limit] : s.power_limits)
    limits[std::to_string(slot)] = limit;
  return {{"flows", flows}, {"units", units}, {"power_limits", limits},
          {"dq", s.dq},     {"dp", s.dp},       {"rng_seed", s.rng_seed}};
}

inline std::size_t parse_index_key(const std::string &key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(key, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != key.size() || key.empty())
    throw DomainError("expected a non-negative integer key, got '" + key + "'");
  return static_cast<std::size_t>(v);
}

inline Scenario scenario_from_json(const nlohmann::json &j) {
  Scenario s;
  try {
    for (const auto &ju : j.at("units")) {
      ResourceUnit u;
      u.id = ju.at("id").get<std::size_t>();
      u.beam = ju.at("beam").get<std::size_t>();
      u.frequency = ju.at("frequency").get<std::size_t>();
      u.slot = ju.at("slot").get<std::size_t>();
      u.power_required = ju.at("power_required").get<double>();
      s.units.push_back(u);
    }
    std::sort(s.units.begin(), s.units.end(),
              [](const auto &a, const auto &b) { return a.id < b.id; });
    for (const auto &jf : j.at("flows")) {
      Flow f;
      f.id = jf.at("id").get<std::size_t>();
      f.weight = jf.at("weight").get<double>();
      f.queue_capacity = jf.at("queue_capacity").get<double>();
      f.rates.assign(s.units.size(), 0.0);
      std::vector<bool> seen(s.units.size(), false);
      for (const auto &[key, value] : jf.at("rates").items()) {
        const std::size_t unit = parse_index_key(key);
        if (unit >= s.units.size())
          throw DomainError("flow " + std::to_string(f.id) + " has a rate for unknown unit " +
                            key);
        f.rates[unit] = value.get<double>();
        seen[unit] = true;
      }
      if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw DomainError("flow " + std::to_string(f.id) + " is missing a rate entry");
      s.flows.push_back(std::move(f));
    }
    std::sort(s.flows.begin(), s.flows.end(),
              [](const auto &a, const auto &b) { return a.id < b.id; });
    for (const auto &[key, value] : j.at("power_limits").items())
      s.power_limits[parse_index_key(key)] = value.get<double>();
    s.dq = j.at("dq").get<double>();
    s.dp = j.at("dp").get<double>();
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("malformed scenario JSON: ") + e.what());
  }
  validate(s);
  return s;
}

inline void save_scenario(const Scenario &s, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << to_json(s).dump(2) << '\n';
}

inline Scenario load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

} // namespace beamqopt
