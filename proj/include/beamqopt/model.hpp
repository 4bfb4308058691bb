#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "beamqopt/errors.hpp"
#include "beamqopt/scenario.hpp"

namespace beamqopt {

/// Decision bits x_ku stored sparsely: flow id -> units it occupies.
struct Schedule {
  std::map<std::size_t, std::set<std::size_t>> assignments;

  void assign(std::size_t flow, std::size_t unit) { assignments[flow].insert(unit); }

  void unassign(std::size_t flow, std::size_t unit) {
    auto it = assignments.find(flow);
    if (it == assignments.end())
      return;
    it->second.erase(unit);
    if (it->second.empty())
      assignments.erase(it);
  }

  bool contains(std::size_t flow, std::size_t unit) const {
    auto it = assignments.find(flow);
    return it != assignments.end() && it->second.count(unit) != 0;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto &[flow, units] : assignments)
      n += units.size();
    return n;
  }

  bool empty() const { return size() == 0; }

  /// (flow, unit) pairs in flow-major order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto &[flow, units] : assignments)
      for (std::size_t u : units)
        out.emplace_back(flow, u);
    return out;
  }

  bool operator==(const Schedule &other) const { return pairs() == other.pairs(); }
};

/// Summation range of the per-flow queue constraint. The written constraint
/// indexes its sum by a slot that is never bound; AllUnits reads it as a
/// horizon-wide budget, PerSlot as one budget per (flow, slot).
enum class QueueScope { AllUnits, PerSlot };

inline QueueScope parse_queue_scope(const std::string &name) {
  if (name == "all_units") return QueueScope::AllUnits;
  if (name == "per_slot") return QueueScope::PerSlot;
  throw ConfigError("unknown queue scope '" + name + "'");
}

struct ModelOptions {
  QueueScope queue_scope = QueueScope::AllUnits;
  double relative_tolerance = 1e-9;
};

struct PowerViolation {
  std::size_t slot;
  double consumed;
  double limit;
};

struct QueueViolation {
  std::size_t flow;
  std::optional<std::size_t> slot; // set only under QueueScope::PerSlot
  double sent;
  double capacity;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<std::size_t> conflict_violations;
  std::vector<PowerViolation> power_violations;
  std::vector<QueueViolation> queue_violations;
};

/// True when `used` exceeds `limit` beyond a relative tolerance.
inline bool exceeds(double used, double limit, double rel_tol) {
  return used - limit > rel_tol * std::max(std::abs(used), std::abs(limit));
}

inline void check_ids(const Scenario &s, const Schedule &x) {
  for (const auto &[flow, units] : x.assignments) {
    if (flow >= s.flow_count())
      throw DomainError("schedule references unknown flow " + std::to_string(flow));
    for (std::size_t u : units)
      if (u >= s.unit_count())
        throw DomainError("schedule references unknown unit " + std::to_string(u));
  }
}

inline double weighted_throughput(const Scenario &s, const Schedule &x) {
  check_ids(s, x);
  double total = 0.0;
  for (const auto &[flow, unit] : x.pairs())
    total += s.value(flow, unit);
  return total;
}

inline FeasibilityReport check_feasibility(const Scenario &s, const Schedule &x,
                                           const ModelOptions &opt = {}) {
  check_ids(s, x);
  FeasibilityReport report;

  std::vector<std::size_t> holders(s.unit_count(), 0);
  std::map<std::size_t, double> power;
  std::map<std::pair<std::size_t, std::size_t>, double> sent; // (flow, slot or 0)
  for (const auto &[flow, unit] : x.pairs()) {
    ++holders[unit];
    const auto &u = s.units[unit];
    power[u.slot] += u.power_required;
    const std::size_t scope = opt.queue_scope == QueueScope::PerSlot ? u.slot : 0;
    sent[{flow, scope}] += s.rate(flow, unit);
  }

  for (std::size_t u = 0; u < holders.size(); ++u)
    if (holders[u] >= 2)
      report.conflict_violations.push_back(u);
  for (const auto &[slot, consumed] : power) {
    const double limit = s.power_limits.at(slot);
    if (exceeds(consumed, limit, opt.relative_tolerance))
      report.power_violations.push_back({slot, consumed, limit});
  }
  for (const auto &[key, amount] : sent) {
    const double cap = s.flows[key.first].queue_capacity;
    if (exceeds(amount, cap, opt.relative_tolerance)) {
      std::optional<std::size_t> slot;
      if (opt.queue_scope == QueueScope::PerSlot)
        slot = key.second;
      report.queue_violations.push_back({key.first, slot, amount, cap});
    }
  }
  report.feasible = report.conflict_violations.empty() && report.power_violations.empty() &&
                    report.queue_violations.empty();
  return report;
}

inline bool is_feasible(const Scenario &s, const Schedule &x, const ModelOptions &opt = {}) {
  return check_feasibility(s, x, opt).feasible;
}

/// Drops the least valuable offending assignment (ties: lower flow id, then
/// lower unit id) until the schedule is feasible.
inline Schedule repair_schedule(const Scenario &s, Schedule x, const ModelOptions &opt = {}) {
  for (;;) {
    const auto report = check_feasibility(s, x, opt);
    if (report.feasible)
      return x;

    std::set<std::pair<std::size_t, std::size_t>> offending;
    for (const auto &[flow, unit] : x.pairs()) {
      const auto &u = s.units[unit];
      const bool conflict = std::binary_search(report.conflict_violations.begin(),
                                               report.conflict_violations.end(), unit);
      const bool power = std::any_of(report.power_violations.begin(),
                                     report.power_violations.end(),
                                     [&](const auto &v) { return v.slot == u.slot; });
      const bool queue = std::any_of(
          report.queue_violations.begin(), report.queue_violations.end(), [&](const auto &v) {
            return v.flow == flow && (!v.slot || *v.slot == u.slot);
          });
      if (conflict || power || queue)
        offending.emplace(flow, unit);
    }
    const auto victim = *std::min_element(
        offending.begin(), offending.end(), [&](const auto &a, const auto &b) {
          return std::make_tuple(s.value(a.first, a.second), a.first, a.second) <
                 std::make_tuple(s.value(b.first, b.second), b.first, b.second);
        });
    x.unassign(victim.first, victim.second);
  }
}

// ---------------------------------------------------------------------------
// I/O

inline void write_schedule(std::ostream &out, const Schedule &x) {
  for (const auto &[flow, unit] : x.pairs())
    out << flow << ' ' << unit << '\n';
}

inline Schedule read_schedule(std::istream &in) {
  Schedule x;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#')
      continue;
    std::istringstream fields(line);
    long long flow = -1, unit = -1;
    std::string rest;
    if (!(fields >> flow >> unit) || flow < 0 || unit < 0 || (fields >> rest))
      throw DomainError("schedule line " + std::to_string(lineno) + ": expected 'flow_id unit_id'");
    x.assign(static_cast<std::size_t>(flow), static_cast<std::size_t>(unit));
  }
  return x;
}

inline nlohmann::json to_json(const Schedule &x) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &[flow, unit] : x.pairs())
    out.push_back({flow, unit});
  return out;
}

inline nlohmann::json to_json(const FeasibilityReport &r) {
  using nlohmann::json;
  json power = json::array();
  for (const auto &v : r.power_violations)
    power.push_back({{"slot", v.slot}, {"consumed", v.consumed}, {"limit", v.limit}});
  json queue = json::array();
  for (const auto &v : r.queue_violations) {
    json entry = {{"flow", v.flow}, {"sent", v.sent}, {"capacity", v.capacity}};
    if (v.slot)
      entry["slot"] = *v.slot;
    queue.push_back(entry);
  }
  return {{"feasible", r.feasible},
          {"conflict_violations", r.conflict_violations},
          {"power_violations", power},
          {"queue_violations", queue}};
}

} // namespace beamqopt
