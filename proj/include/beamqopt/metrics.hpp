#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "beamqopt/errors.hpp"
#include "beamqopt/model.hpp"
#include "beamqopt/quantum.hpp"
#include "beamqopt/qubo.hpp"

namespace beamqopt {

inline std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size())
    throw DomainError("Hamming distance of bitstrings with different lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d += (a[i] != 0) != (b[i] != 0);
  return d;
}

/// Candidate throughput relative to the exact optimum (the 100% reference).
inline double throughput_ratio(const Scenario &s, const Schedule &candidate, const Schedule &optimum) {
  const double best = weighted_throughput(s, optimum);
  const double got = weighted_throughput(s, candidate);
  if (best == 0.0) {
    if (got == 0.0)
      return 1.0;
    throw DomainError("throughput ratio against a zero optimum with a non-zero candidate");
  }
  return got / best;
}

struct HammingProfile {
  std::vector<std::size_t> distances;
  std::vector<double> probability_mass;
  /// Optimal throughput minus the best (repaired) throughput observed at
  /// each distance; NaN where no state carries probability.
  std::vector<double> min_throughput_gap;
};

struct ProfileOptions {
  bool decision_bits_only = true;
  bool repair = true;
  ModelOptions model;
};

namespace detail {

/// Throughput of decode(z), optionally after repair, cached per decision pattern.
class ThroughputCache {
public:
  ThroughputCache(const QuboModel &q, const Scenario &s, const ProfileOptions &opt)
      : q_(q), s_(s), opt_(opt), mask_(decision_mask(q)) {}

  static std::uint64_t decision_mask(const QuboModel &q) {
    const std::size_t d = q.index.decision_count();
    return d >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << d) - 1;
  }

  double operator()(std::uint64_t z) {
    const std::uint64_t key = z & mask_;
    if (auto it = cache_.find(key); it != cache_.end())
      return it->second;
    Schedule x = decode(q_, bits_from_index(z, q_.n));
    if (opt_.repair)
      x = repair_schedule(s_, std::move(x), opt_.model);
    const double v = weighted_throughput(s_, x);
    cache_.emplace(key, v);
    return v;
  }

  std::uint64_t mask() const { return mask_; }

private:
  const QuboModel &q_;
  const Scenario &s_;
  ProfileOptions opt_;
  std::uint64_t mask_;
  std::unordered_map<std::uint64_t, double> cache_;
};

} // namespace detail

/// Aggregates a distribution over basis indices by Hamming distance to
/// `optimum_bits`.
inline HammingProfile hamming_profile(std::span<const double> probabilities, const QuboModel &q,
                                      const Scenario &s, std::span<const std::uint8_t> optimum_bits,
                                      const ProfileOptions &opt = {}) {
  check_length(q, optimum_bits.size());
  if (probabilities.size() != (std::size_t{1} << q.n))
    throw DomainError("distribution size does not match the QUBO");
  detail::ThroughputCache throughput(q, s, opt);
  const std::uint64_t reference = index_from_bits(optimum_bits);
  const std::uint64_t mask = opt.decision_bits_only ? throughput.mask() : ~std::uint64_t{0};
  const std::size_t max_distance = opt.decision_bits_only ? q.index.decision_count() : q.n;
  const double optimal = throughput(reference);

  HammingProfile profile;
  profile.distances.resize(max_distance + 1);
  for (std::size_t h = 0; h <= max_distance; ++h)
    profile.distances[h] = h;
  profile.probability_mass.assign(max_distance + 1, 0.0);
  std::vector<double> best(max_distance + 1, -std::numeric_limits<double>::infinity());

  for (std::uint64_t z = 0; z < probabilities.size(); ++z) {
    const double p = probabilities[z];
    if (p <= 0.0)
      continue;
    const auto h = static_cast<std::size_t>(std::popcount((z ^ reference) & mask));
    profile.probability_mass[h] += p;
    best[h] = std::max(best[h], throughput(z));
  }
  profile.min_throughput_gap.resize(max_distance + 1);
  for (std::size_t h = 0; h <= max_distance; ++h)
    profile.min_throughput_gap[h] = std::isinf(best[h]) ? std::numeric_limits<double>::quiet_NaN()
                                                        : optimal - best[h];
  return profile;
}

inline HammingProfile hamming_profile(const Statevector &v, const QuboModel &q, const Scenario &s,
                                      std::span<const std::uint8_t> optimum_bits,
                                      const ProfileOptions &opt = {}) {
  const auto p = v.probabilities();
  return hamming_profile(p, q, s, optimum_bits, opt);
}

inline HammingProfile hamming_profile(const Histogram &counts, const QuboModel &q, const Scenario &s,
                                      std::span<const std::uint8_t> optimum_bits,
                                      const ProfileOptions &opt = {}) {
  if (q.n > 30)
    throw CapacityError(q.n, 30, "histogram profile");
  std::size_t total = 0;
  for (const auto &[z, c] : counts)
    total += c;
  if (total == 0)
    throw DomainError("empty histogram");
  std::vector<double> p(std::size_t{1} << q.n, 0.0);
  for (const auto &[z, c] : counts)
    p.at(z) = static_cast<double>(c) / static_cast<double>(total);
  return hamming_profile(p, q, s, optimum_bits, opt);
}

/// Probability mass on the minimum-energy basis states.
inline double success_probability(const Statevector &v, std::span<const double> energies) {
  if (energies.size() != v.dimension())
    throw DomainError("energy table does not match the state dimension");
  const double ground = *std::min_element(energies.begin(), energies.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(ground));
  double p = 0.0;
  for (std::size_t z = 0; z < energies.size(); ++z)
    if (energies[z] <= ground + tol)
      p += std::norm(v[z]);
  return p;
}

inline double success_probability(const Statevector &v, const QuboModel &q) {
  if (q.n != v.qubits())
    throw DomainError("QUBO size does not match the state");
  return success_probability(v, all_energies(q));
}

struct ScheduleOutcome {
  Schedule schedule;
  double probability = 0.0;
};

/// Marginalizes the state's distribution over decoded (and repaired)
/// schedules and returns the likeliest one; ties go to the first schedule
/// in (flow, unit) order.
inline ScheduleOutcome most_probable_schedule(const Statevector &v, const QuboModel &q,
                                              const Scenario &s, const ProfileOptions &opt = {}) {
  if (q.n != v.qubits())
    throw DomainError("QUBO size does not match the state");
  std::map<std::uint64_t, double> by_pattern;
  for (std::uint64_t z = 0; z < v.dimension(); ++z)
    by_pattern[z & detail::ThroughputCache::decision_mask(q)] += std::norm(v[z]);
  std::map<std::vector<std::pair<std::size_t, std::size_t>>, double> by_schedule;
  std::map<std::vector<std::pair<std::size_t, std::size_t>>, Schedule> schedules;
  for (const auto &[pattern, p] : by_pattern) {
    Schedule x = decode(q, bits_from_index(pattern, q.n));
    if (opt.repair)
      x = repair_schedule(s, std::move(x), opt.model);
    auto key = x.pairs();
    by_schedule[key] += p;
    schedules.emplace(std::move(key), std::move(x));
  }
  ScheduleOutcome best;
  best.probability = -1.0;
  for (const auto &[key, p] : by_schedule)
    if (p > best.probability) {
      best.probability = p;
      best.schedule = schedules.at(key);
    }
  return best;
}

inline void write_profile_csv(std::ostream &out, const HammingProfile &profile) {
  out << "distance,probability,min_throughput_gap\n";
  for (std::size_t h = 0; h < profile.distances.size(); ++h) {
    out << profile.distances[h] << ',' << format_real(profile.probability_mass[h]) << ',';
    if (std::isnan(profile.min_throughput_gap[h]))
      out << "nan";
    else
      out << format_real(profile.min_throughput_gap[h]);
    out << '\n';
  }
}

} // namespace beamqopt
