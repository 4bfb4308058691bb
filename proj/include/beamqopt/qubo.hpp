#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "beamqopt/errors.hpp"
#include "beamqopt/model.hpp"
#include "beamqopt/scenario.hpp"

namespace beamqopt {

/// One variable per QUBO bit, 0/1 valued; index i is QUBO variable i.
using Bitstring = std::vector<std::uint8_t>;

/// Number of binary slack bits needed to span `capacity` in steps of
/// `quantum`: floor(log2(capacity / quantum)) + 1, and 1 when the ratio is
/// below one.
inline std::size_t slack_bit_count(double capacity, double quantum) {
  if (!(quantum > 0.0) || !std::isfinite(quantum))
    throw DomainError("slack quantum must be positive");
  if (!(capacity >= 0.0) || !std::isfinite(capacity))
    throw DomainError("slack capacity must be non-negative");
  // Nudge so ratios like 0.4 / 0.1 = 3.9999999999999996 land on the intended bit.
  const double ratio = capacity / quantum * (1.0 + 1e-12);
  if (ratio < 1.0)
    return 1;
  return static_cast<std::size_t>(std::ilogb(ratio)) + 1;
}

/// A run of slack bits closing one inequality; bit b has weight 2^b * quantum.
struct SlackGroup {
  std::size_t owner = 0;           // slot (power) or flow (queue)
  std::optional<std::size_t> slot; // queue groups under QueueScope::PerSlot
  double capacity = 0.0;
  double quantum = 1.0;
  std::size_t first = 0;
  std::size_t bits = 0;

  std::size_t bit(std::size_t b) const { return first + b; }
  std::uint64_t max_level() const { return (std::uint64_t{1} << bits) - 1; }

  bool operator==(const SlackGroup &) const = default;
};

/// Bit layout: decision bits flow-major/unit-minor, then power slack ordered
/// by (slot, b), then queue slack ordered by (flow, b).
struct VariableIndex {
  std::size_t flows = 0;
  std::size_t units = 0;
  QueueScope queue_scope = QueueScope::AllUnits;
  std::vector<SlackGroup> power_slack;
  std::vector<SlackGroup> queue_slack;
  std::size_t total_bits = 0;

  std::size_t decision_count() const { return flows * units; }
  std::size_t decision(std::size_t flow, std::size_t unit) const { return flow * units + unit; }

  const SlackGroup &power_group(std::size_t slot) const {
    for (const auto &g : power_slack)
      if (g.owner == slot)
        return g;
    throw DomainError("no power slack for slot " + std::to_string(slot));
  }

  const SlackGroup &queue_group(std::size_t flow,
                                std::optional<std::size_t> slot = std::nullopt) const {
    for (const auto &g : queue_slack)
      if (g.owner == flow && g.slot == slot)
        return g;
    throw DomainError("no queue slack for flow " + std::to_string(flow));
  }

  bool operator==(const VariableIndex &) const = default;
};

struct Lambdas {
  double conflict = 1.0; // resource-conflict penalty
  double power = 1.0;    // per-slot power budget penalty
  double queue = 1.0;    // per-flow queue capacity penalty

  bool operator==(const Lambdas &) const = default;
};

struct QuboModel {
  std::size_t n = 0;
  std::map<std::size_t, double> linear;
  std::map<std::pair<std::size_t, std::size_t>, double> quadratic; // i < j
  double offset = 0.0;
  Lambdas lambdas;
  VariableIndex index;
  std::vector<std::string> warnings;
};

struct QuboOptions {
  QueueScope queue_scope = QueueScope::AllUnits;
};

namespace detail {

struct Term {
  std::size_t bit;
  double coef;
};

class QuboAccumulator {
public:
  explicit QuboAccumulator(QuboModel &q) : q_(q) {}

  void linear(std::size_t i, double v) { q_.linear[i] += v; }

  void quadratic(std::size_t i, std::size_t j, double v) {
    if (i > j)
      std::swap(i, j);
    q_.quadratic[{i, j}] += v;
  }

  /// Adds weight * (sum_i coef_i x_i - target)^2 using x_i^2 = x_i and
  /// folding x_i x_j + x_j x_i into the (i<j) entry.
  void square(const std::vector<Term> &terms, double target, double weight) {
    for (std::size_t a = 0; a < terms.size(); ++a) {
      const auto &ta = terms[a];
      linear(ta.bit, weight * (ta.coef * ta.coef - 2.0 * target * ta.coef));
      for (std::size_t b = a + 1; b < terms.size(); ++b)
        quadratic(ta.bit, terms[b].bit, 2.0 * weight * ta.coef * terms[b].coef);
    }
    q_.offset += weight * target * target;
  }

  void prune() {
    std::erase_if(q_.linear, [](const auto &kv) { return kv.second == 0.0; });
    std::erase_if(q_.quadratic, [](const auto &kv) { return kv.second == 0.0; });
  }

private:
  QuboModel &q_;
};

inline SlackGroup make_group(std::size_t owner, std::optional<std::size_t> slot, double capacity,
                             double quantum, std::size_t &next_bit,
                             std::vector<std::string> &warnings, const std::string &what) {
  SlackGroup g;
  g.owner = owner;
  g.slot = slot;
  g.capacity = capacity;
  g.quantum = quantum;
  g.first = next_bit;
  g.bits = slack_bit_count(capacity, quantum);
  if (capacity / quantum < 1.0)
    warnings.push_back(what + " capacity " + std::to_string(capacity) +
                       " is below its slack quantum " + std::to_string(quantum) +
                       "; using a single slack bit");
  next_bit += g.bits;
  return g;
}

} // namespace detail

/// Compiles the penalty-form QUBO: throughput objective plus conflict, power
/// and queue penalties weighted by `lambdas`.
inline QuboModel build_qubo(const Scenario &s, const Lambdas &lambdas,
                            const QuboOptions &opt = {}) {
  validate(s);
  if (!(lambdas.conflict > 0.0) || !(lambdas.power > 0.0) || !(lambdas.queue > 0.0))
    throw DomainError("penalty weights must be positive");

  QuboModel q;
  q.lambdas = lambdas;
  auto &idx = q.index;
  idx.flows = s.flow_count();
  idx.units = s.unit_count();
  idx.queue_scope = opt.queue_scope;

  std::size_t next = idx.decision_count();
  const auto slots = s.active_slots();
  for (std::size_t slot : slots)
    idx.power_slack.push_back(detail::make_group(slot, std::nullopt, s.power_limits.at(slot),
                                                 s.dp, next, q.warnings,
                                                 "slot " + std::to_string(slot) + " power"));
  for (std::size_t k = 0; k < s.flow_count(); ++k) {
    const double cap = s.flows[k].queue_capacity;
    const std::string what = "flow " + std::to_string(k) + " queue";
    if (opt.queue_scope == QueueScope::AllUnits) {
      idx.queue_slack.push_back(detail::make_group(k, std::nullopt, cap, s.dq, next, q.warnings, what));
    } else {
      for (std::size_t slot : slots)
        idx.queue_slack.push_back(detail::make_group(k, slot, cap, s.dq, next, q.warnings, what));
    }
  }
  idx.total_bits = next;
  q.n = next;

  detail::QuboAccumulator acc(q);

  for (std::size_t k = 0; k < s.flow_count(); ++k)
    for (std::size_t u = 0; u < s.unit_count(); ++u)
      if (const double v = s.value(k, u); v != 0.0)
        acc.linear(idx.decision(k, u), -v);

  // (S - 1/2)^2 - 1/4 = S^2 - S = 2 * sum_{k<k'} x_k x_k'
  for (std::size_t u = 0; u < s.unit_count(); ++u)
    for (std::size_t k = 0; k < s.flow_count(); ++k)
      for (std::size_t k2 = k + 1; k2 < s.flow_count(); ++k2)
        acc.quadratic(idx.decision(k, u), idx.decision(k2, u), 2.0 * lambdas.conflict);

  auto slack_terms = [](const SlackGroup &g, std::vector<detail::Term> &terms) {
    for (std::size_t b = 0; b < g.bits; ++b)
      terms.push_back({g.bit(b), std::ldexp(g.quantum, static_cast<int>(b))});
  };

  for (const auto &g : idx.power_slack) {
    std::vector<detail::Term> terms;
    for (std::size_t u = 0; u < s.unit_count(); ++u)
      if (s.units[u].slot == g.owner && s.units[u].power_required != 0.0)
        for (std::size_t k = 0; k < s.flow_count(); ++k)
          terms.push_back({idx.decision(k, u), s.units[u].power_required});
    slack_terms(g, terms);
    acc.square(terms, g.capacity, lambdas.power);
  }

  for (const auto &g : idx.queue_slack) {
    std::vector<detail::Term> terms;
    for (std::size_t u = 0; u < s.unit_count(); ++u)
      if ((!g.slot || s.units[u].slot == *g.slot) && s.rate(g.owner, u) != 0.0)
        terms.push_back({idx.decision(g.owner, u), s.rate(g.owner, u)});
    slack_terms(g, terms);
    acc.square(terms, g.capacity, lambdas.queue);
  }

  acc.prune();
  return q;
}

/// Penalty weights large enough that any single violated constraint costs
/// more than the whole attainable objective.
inline Lambdas default_lambdas(const Scenario &s) {
  double max_value = 0.0;
  double min_rate = 0.0;
  for (std::size_t k = 0; k < s.flow_count(); ++k)
    for (std::size_t u = 0; u < s.unit_count(); ++u) {
      max_value = std::max(max_value, s.value(k, u));
      const double r = s.rate(k, u);
      if (r > 0.0 && (min_rate == 0.0 || r < min_rate))
        min_rate = r;
    }
  if (max_value == 0.0)
    return {1.0, 1.0, 1.0};
  double min_power = 0.0;
  for (const auto &u : s.units)
    if (u.power_required > 0.0 && (min_power == 0.0 || u.power_required < min_power))
      min_power = u.power_required;

  // An overshoot of a quantized constraint is at least min(smallest step, quantum).
  const double power_step = min_power > 0.0 ? std::min(min_power, s.dp) : s.dp;
  const double queue_step = min_rate > 0.0 ? std::min(min_rate, s.dq) : s.dq;
  const double budget = 2.0 * max_value * static_cast<double>(s.decision_count());
  return {budget, budget / (power_step * power_step), budget / (queue_step * queue_step)};
}

inline void check_length(const QuboModel &q, std::size_t len) {
  if (len != q.n)
    throw DomainError("bitstring length " + std::to_string(len) + " does not match QUBO size " +
                      std::to_string(q.n));
}

inline double energy(const QuboModel &q, std::span<const std::uint8_t> x) {
  check_length(q, x.size());
  double e = q.offset;
  for (const auto &[i, v] : q.linear)
    if (x[i])
      e += v;
  for (const auto &[ij, v] : q.quadratic)
    if (x[ij.first] && x[ij.second])
      e += v;
  return e;
}

/// Bit i of the basis index is variable i.
inline Bitstring bits_from_index(std::uint64_t z, std::size_t n) {
  Bitstring x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = static_cast<std::uint8_t>((z >> i) & 1U);
  return x;
}

inline std::uint64_t index_from_bits(std::span<const std::uint8_t> x) {
  if (x.size() > 64)
    throw DomainError("bitstring longer than 64 bits has no basis index");
  std::uint64_t z = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i])
      z |= std::uint64_t{1} << i;
  return z;
}

inline std::string to_string(std::span<const std::uint8_t> x) {
  std::string out(x.size(), '0');
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i])
      out[i] = '1';
  return out;
}

inline Bitstring bits_from_string(const std::string &text) {
  Bitstring x(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1')
      throw DomainError("bitstring may contain only '0' and '1'");
    x[i] = text[i] == '1';
  }
  return x;
}

/// Energies of all 2^n basis states, indexed by basis index.
inline std::vector<double> all_energies(const QuboModel &q) {
  if (q.n > 30)
    throw CapacityError(q.n, 30, "energy table");
  const std::size_t n = q.n;
  std::vector<double> h(n, 0.0);
  std::vector<double> j(n * n, 0.0);
  for (const auto &[i, v] : q.linear)
    h[i] = v;
  for (const auto &[ij, v] : q.quadratic) {
    j[ij.first * n + ij.second] = v;
    j[ij.second * n + ij.first] = v;
  }
  const std::uint64_t dim = std::uint64_t{1} << n;
  std::vector<double> e(dim);
  e[0] = q.offset;
  for (std::uint64_t z = 1; z < dim; ++z) {
    const auto i = static_cast<std::size_t>(std::countr_zero(z));
    std::uint64_t rest = z & (z - 1);
    double v = e[rest] + h[i];
    const double *row = &j[i * n];
    while (rest) {
      v += row[std::countr_zero(rest)];
      rest &= rest - 1;
    }
    e[z] = v;
  }
  return e;
}

inline Schedule decode(const QuboModel &q, std::span<const std::uint8_t> x) {
  check_length(q, x.size());
  Schedule out;
  for (std::size_t k = 0; k < q.index.flows; ++k)
    for (std::size_t u = 0; u < q.index.units; ++u)
      if (x[q.index.decision(k, u)])
        out.assign(k, u);
  return out;
}

/// Decision bits of `x` with every slack bit cleared.
inline Bitstring encode(const QuboModel &q, const Schedule &x) {
  Bitstring bits(q.n, 0);
  for (const auto &[flow, unit] : x.pairs()) {
    if (flow >= q.index.flows || unit >= q.index.units)
      throw DomainError("schedule does not fit the QUBO index");
    bits[q.index.decision(flow, unit)] = 1;
  }
  return bits;
}

/// Encodes `x` and sets every slack group to the level minimizing its own
/// penalty term, i.e. the representable point nearest the residual capacity.
inline Bitstring encode_with_slack(const QuboModel &q, const Scenario &s, const Schedule &x) {
  Bitstring bits = encode(q, x);
  auto fill = [&](const SlackGroup &g, double used) {
    const double residual = (g.capacity - used) / g.quantum;
    const double level = std::clamp(std::round(residual), 0.0, static_cast<double>(g.max_level()));
    const auto m = static_cast<std::uint64_t>(level);
    for (std::size_t b = 0; b < g.bits; ++b)
      bits[g.bit(b)] = static_cast<std::uint8_t>((m >> b) & 1U);
  };
  for (const auto &g : q.index.power_slack) {
    double used = 0.0;
    for (const auto &[flow, unit] : x.pairs())
      if (s.units[unit].slot == g.owner)
        used += s.units[unit].power_required;
    fill(g, used);
  }
  for (const auto &g : q.index.queue_slack) {
    double used = 0.0;
    for (const auto &[flow, unit] : x.pairs())
      if (flow == g.owner && (!g.slot || s.units[unit].slot == *g.slot))
        used += s.rate(flow, unit);
    fill(g, used);
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Text export: "N offset", then "i i v" (linear) and "i j v" (i<j) lines.

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_qubo(std::ostream &out, const QuboModel &q) {
  out << q.n << ' ' << format_real(q.offset) << '\n';
  for (const auto &[i, v] : q.linear)
    out << i << ' ' << i << ' ' << format_real(v) << '\n';
  for (const auto &[ij, v] : q.quadratic)
    out << ij.first << ' ' << ij.second << ' ' << format_real(v) << '\n';
}

/// Reads coefficients only; the variable index comes from the sidecar.
inline QuboModel read_qubo(std::istream &in) {
  QuboModel q;
  std::string line;
  if (!std::getline(in, line))
    throw DomainError("QUBO file is empty");
  {
    std::istringstream header(line);
    long long n = -1;
    if (!(header >> n >> q.offset) || n < 0)
      throw DomainError("QUBO header must be 'N offset'");
    q.n = static_cast<std::size_t>(n);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::istringstream fields(line);
    long long i = -1, j = -1;
    double v = 0.0;
    if (!(fields >> i >> j >> v) || i < 0 || j < i || static_cast<std::size_t>(j) >= q.n)
      throw DomainError("QUBO line " + std::to_string(lineno) + ": expected 'i j v' with i <= j < N");
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
    if (a == b)
      q.linear[a] += v;
    else
      q.quadratic[{a, b}] += v;
  }
  return q;
}

inline nlohmann::json to_json(const SlackGroup &g) {
  nlohmann::json j = {{"owner", g.owner},       {"capacity", g.capacity}, {"quantum", g.quantum},
                      {"first_bit", g.first},   {"bits", g.bits}};
  if (g.slot)
    j["slot"] = *g.slot;
  return j;
}

inline SlackGroup slack_group_from_json(const nlohmann::json &j) {
  SlackGroup g;
  g.owner = j.at("owner").get<std::size_t>();
  if (j.contains("slot"))
    g.slot = j.at("slot").get<std::size_t>();
  g.capacity = j.at("capacity").get<double>();
  g.quantum = j.at("quantum").get<double>();
  g.first = j.at("first_bit").get<std::size_t>();
  g.bits = j.at("bits").get<std::size_t>();
  return g;
}

inline nlohmann::json to_json(const VariableIndex &idx) {
  nlohmann::json power = nlohmann::json::array(), queue = nlohmann::json::array();
  for (const auto &g : idx.power_slack)
    power.push_back(to_json(g));
  for (const auto &g : idx.queue_slack)
    queue.push_back(to_json(g));
  return {{"flows", idx.flows},
          {"units", idx.units},
          {"decision_bits", idx.decision_count()},
          {"decision_order", "flow_major"},
          {"queue_scope", idx.queue_scope == QueueScope::AllUnits ? "all_units" : "per_slot"},
          {"power_slack", power},
          {"queue_slack", queue},
          {"total_bits", idx.total_bits}};
}

inline VariableIndex variable_index_from_json(const nlohmann::json &j) {
  VariableIndex idx;
  try {
    idx.flows = j.at("flows").get<std::size_t>();
    idx.units = j.at("units").get<std::size_t>();
    idx.queue_scope = parse_queue_scope(j.at("queue_scope").get<std::string>());
    for (const auto &g : j.at("power_slack"))
      idx.power_slack.push_back(slack_group_from_json(g));
    for (const auto &g : j.at("queue_slack"))
      idx.queue_slack.push_back(slack_group_from_json(g));
    idx.total_bits = j.at("total_bits").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("malformed variable index: ") + e.what());
  }
  return idx;
}

inline nlohmann::json to_json(const Lambdas &l) {
  return {l.conflict, l.power, l.queue};
}

} // namespace beamqopt
