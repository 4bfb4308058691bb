#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <map>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "beamqopt/model.hpp"
#include "beamqopt/scenario.hpp"

namespace beamqopt {

struct SolveResult {
  Schedule schedule;
  double objective = 0.0;
  bool optimal = false;
  std::size_t nodes_explored = 0;
  std::chrono::duration<double, std::milli> wall_time{0};
  /// Incumbent objective after each improvement (exact solver only).
  std::vector<double> incumbent_trace;
};

namespace detail {

class BranchAndBound {
public:
  BranchAndBound(const Scenario &s, std::size_t node_limit, const ModelOptions &opt)
      : s_(s), opt_(opt), node_limit_(node_limit), units_(s.unit_count()),
        bits_(s.decision_count()), holder_(units_, false), suffix_(bits_ + 1, 0.0) {
    for (std::size_t slot : s.active_slots())
      power_[slot] = 0.0;
    for (std::size_t t = bits_; t-- > 0;)
      suffix_[t] = suffix_[t + 1] + std::max(0.0, s.value(t / units_, t % units_));
  }

  SolveResult run() {
    SolveResult result;
    result.incumbent_trace.push_back(0.0);
    dfs(0, 0.0, result);
    result.schedule = best_;
    result.objective = weighted_throughput(s_, best_);
    result.optimal = !aborted_;
    result.nodes_explored = nodes_;
    return result;
  }

private:
  double &sent(std::size_t flow, std::size_t unit) {
    const std::size_t scope = opt_.queue_scope == QueueScope::PerSlot ? s_.units[unit].slot : 0;
    return sent_[{flow, scope}];
  }

  bool can_take(std::size_t flow, std::size_t unit) {
    if (holder_[unit])
      return false;
    const auto &u = s_.units[unit];
    if (exceeds(power_[u.slot] + u.power_required, s_.power_limits.at(u.slot),
                opt_.relative_tolerance))
      return false;
    return !exceeds(sent(flow, unit) + s_.rate(flow, unit), s_.flows[flow].queue_capacity,
                    opt_.relative_tolerance);
  }

  void dfs(std::size_t t, double value, SolveResult &result) {
    if (aborted_)
      return;
    if (nodes_ >= node_limit_) {
      aborted_ = true;
      return;
    }
    ++nodes_;
    if (value > best_value_) {
      best_value_ = value;
      best_ = current_;
      result.incumbent_trace.push_back(value);
    }
    if (t == bits_ || value + suffix_[t] <= best_value_)
      return;

    const std::size_t flow = t / units_, unit = t % units_;
    if (can_take(flow, unit)) {
      const auto &u = s_.units[unit];
      const double p_before = power_[u.slot];
      const double q_before = sent(flow, unit);
      holder_[unit] = true;
      power_[u.slot] += u.power_required;
      sent(flow, unit) += s_.rate(flow, unit);
      current_.assign(flow, unit);
      dfs(t + 1, value + s_.value(flow, unit), result);
      current_.unassign(flow, unit);
      sent(flow, unit) = q_before;
      power_[u.slot] = p_before;
      holder_[unit] = false;
    }
    dfs(t + 1, value, result);
  }

  const Scenario &s_;
  ModelOptions opt_;
  std::size_t node_limit_;
  std::size_t units_;
  std::size_t bits_;
  std::vector<bool> holder_;
  std::map<std::size_t, double> power_;
  std::map<std::pair<std::size_t, std::size_t>, double> sent_;
  std::vector<double> suffix_; // optimistic value of bits t..end
  Schedule current_;
  Schedule best_;
  double best_value_ = 0.0;
  std::size_t nodes_ = 0;
  bool aborted_ = false;
};

} // namespace detail

/// Depth-first branch-and-bound over decision bits in flow-major order,
/// trying 1 before 0. Returns the incumbent with optimal = false when the
/// node budget runs out.
inline SolveResult solve_exact(const Scenario &s, std::size_t node_limit = 10'000'000,
                               const ModelOptions &opt = {}) {
  validate(s);
  if (node_limit < 1)
    throw DomainError("node limit must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  auto result = detail::BranchAndBound(s, node_limit, opt).run();
  result.wall_time = std::chrono::steady_clock::now() - start;
  return result;
}

/// Takes (flow, unit) pairs by descending w*r and keeps each one that leaves
/// the schedule feasible.
inline SolveResult solve_greedy(const Scenario &s, const ModelOptions &opt = {}) {
  validate(s);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::tuple<double, std::size_t, std::size_t>> ranked;
  for (std::size_t k = 0; k < s.flow_count(); ++k)
    for (std::size_t u = 0; u < s.unit_count(); ++u)
      if (s.value(k, u) > 0.0)
        ranked.emplace_back(s.value(k, u), k, u);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
    return std::get<0>(a) > std::get<0>(b);
  });

  SolveResult result;
  for (const auto &[value, flow, unit] : ranked) {
    ++result.nodes_explored;
    result.schedule.assign(flow, unit);
    if (!is_feasible(s, result.schedule, opt))
      result.schedule.unassign(flow, unit);
  }
  result.objective = weighted_throughput(s, result.schedule);
  result.wall_time = std::chrono::steady_clock::now() - start;
  return result;
}

inline nlohmann::json to_json(const SolveResult &r) {
  return {{"schedule", to_json(r.schedule)},
          {"objective", r.objective},
          {"optimal", r.optimal},
          {"nodes_explored", r.nodes_explored},
          {"wall_time_ms", r.wall_time.count()}};
}

} // namespace beamqopt
