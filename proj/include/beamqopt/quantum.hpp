#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "beamqopt/errors.hpp"
#include "beamqopt/qubo.hpp"
#include "beamqopt/random.hpp"

namespace beamqopt {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultMaxQubits = 24;

/// Qubit cap, overridable through BEAMQOPT_MAX_QUBITS.
inline std::size_t max_qubits() {
  if (const char *env = std::getenv("BEAMQOPT_MAX_QUBITS")) {
    char *end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 40)
      return static_cast<std::size_t>(v);
  }
  return kDefaultMaxQubits;
}

inline void check_qubits(std::size_t n, const std::string &what) {
  if (n < 1 || n > max_qubits())
    throw CapacityError(n, max_qubits(), what);
}

/// Dense 2^n amplitude vector. Bit i of a basis index is qubit i, which is
/// QUBO variable i.
class Statevector {
public:
  Statevector() = default;
  Statevector(std::size_t n, std::vector<Complex> amplitudes)
      : n_(n), amps_(std::move(amplitudes)) {
    if (amps_.size() != (std::size_t{1} << n_))
      throw DomainError("amplitude count must be 2^n");
  }

  std::size_t qubits() const { return n_; }
  std::size_t dimension() const { return amps_.size(); }
  std::span<const Complex> amplitudes() const { return amps_; }
  std::span<Complex> amplitudes() { return amps_; }
  const Complex &operator[](std::size_t z) const { return amps_[z]; }
  Complex &operator[](std::size_t z) { return amps_[z]; }

  double norm() const {
    double sum = 0.0;
    for (const auto &a : amps_)
      sum += std::norm(a);
    return std::sqrt(sum);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amps_.size());
    for (std::size_t z = 0; z < amps_.size(); ++z)
      p[z] = std::norm(amps_[z]);
    return p;
  }

  /// Pure basis state |z>.
  static Statevector basis(std::size_t n, std::uint64_t z) {
    check_qubits(n, "basis state");
    std::vector<Complex> amps(std::size_t{1} << n);
    amps.at(z) = 1.0;
    return {n, std::move(amps)};
  }

private:
  std::size_t n_ = 0;
  std::vector<Complex> amps_;
};

/// <a|b>
inline Complex inner_product(const Statevector &a, const Statevector &b) {
  if (a.dimension() != b.dimension())
    throw DomainError("inner product of states with different sizes");
  Complex sum = 0.0;
  for (std::size_t z = 0; z < a.dimension(); ++z)
    sum += std::conj(a[z]) * b[z];
  return sum;
}

inline double fidelity(const Statevector &a, const Statevector &b) {
  return std::abs(inner_product(a, b));
}

/// Equal superposition over all basis states.
inline Statevector init_uniform(std::size_t n) {
  check_qubits(n, "uniform state");
  const double a = std::pow(2.0, -0.5 * static_cast<double>(n));
  return {n, std::vector<Complex>(std::size_t{1} << n, Complex(a, 0.0))};
}

/// Product state of Ry(phi_j)|0> on each qubit j.
inline Statevector init_ry(std::span<const double> phis) {
  const std::size_t n = phis.size();
  check_qubits(n, "Ry product state");
  std::vector<Complex> amps(std::size_t{1} << n, Complex(1.0, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const double c = std::cos(phis[j] / 2.0), s = std::sin(phis[j] / 2.0);
    for (std::size_t z = 0; z < amps.size(); ++z)
      amps[z] *= ((z >> j) & 1U) ? s : c;
  }
  return {n, std::move(amps)};
}

// ---------------------------------------------------------------------------
// Gates

using Gate2 = std::array<Complex, 4>; // row-major 2x2

inline void apply_single_qubit(Statevector &v, std::size_t qubit, const Gate2 &g) {
  const std::size_t stride = std::size_t{1} << qubit;
  auto amps = v.amplitudes();
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride)
    for (std::size_t z = base; z < base + stride; ++z) {
      const Complex a0 = amps[z], a1 = amps[z + stride];
      amps[z] = g[0] * a0 + g[1] * a1;
      amps[z + stride] = g[2] * a0 + g[3] * a1;
    }
}

inline Gate2 ry_gate(double phi) {
  const double c = std::cos(phi / 2.0), s = std::sin(phi / 2.0);
  return {Complex(c), Complex(-s), Complex(s), Complex(c)};
}

inline Gate2 rz_gate(double beta) {
  return {std::polar(1.0, -beta / 2.0), Complex(0.0), Complex(0.0), std::polar(1.0, beta / 2.0)};
}

/// exp(-i beta X)
inline Gate2 x_mixer_gate(double beta) {
  const double c = std::cos(beta), s = std::sin(beta);
  return {Complex(c), Complex(0.0, -s), Complex(0.0, -s), Complex(c)};
}

inline Gate2 multiply(const Gate2 &a, const Gate2 &b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

// ---------------------------------------------------------------------------
// QAOA layers

enum class MixerKind { TransverseX, RotatedRy };

struct MixerSpec {
  MixerKind kind = MixerKind::TransverseX;
  std::vector<double> phis; // RotatedRy only, one per qubit

  static MixerSpec transverse() { return {}; }
  static MixerSpec rotated(std::vector<double> phis) {
    return {MixerKind::RotatedRy, std::move(phis)};
  }
};

struct QaoaParams {
  std::vector<double> gammas;
  std::vector<double> betas;

  std::size_t layers() const { return gammas.size(); }

  /// Flat view: gamma_1, beta_1, gamma_2, beta_2, ...
  std::vector<double> flatten() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
      out.push_back(gammas[i]);
      out.push_back(betas[i]);
    }
    return out;
  }

  static QaoaParams unflatten(std::span<const double> flat) {
    QaoaParams p;
    for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
      p.gammas.push_back(flat[i]);
      p.betas.push_back(flat[i + 1]);
    }
    return p;
  }

  bool operator==(const QaoaParams &) const = default;
};

inline void check_params(const QaoaParams &p) {
  if (p.gammas.size() != p.betas.size() || p.gammas.empty())
    throw ConfigError("QAOA parameters need equally many gammas and betas, at least one each");
}

/// Multiplies amplitude z by exp(-i gamma E(z)), with E given per basis index.
inline Statevector apply_cost(Statevector v, std::span<const double> energies, double gamma) {
  if (energies.size() != v.dimension())
    throw DomainError("energy table does not match the state dimension");
  if (gamma == 0.0)
    return v;
  auto amps = v.amplitudes();
  for (std::size_t z = 0; z < amps.size(); ++z)
    amps[z] *= std::polar(1.0, -gamma * energies[z]);
  return v;
}

inline Statevector apply_cost(Statevector v, const QuboModel &q, double gamma) {
  if (q.n != v.qubits())
    throw DomainError("QUBO size does not match the state");
  const auto energies = all_energies(q);
  return apply_cost(std::move(v), energies, gamma);
}

inline Statevector apply_mixer(Statevector v, const MixerSpec &m, double beta) {
  if (m.kind == MixerKind::RotatedRy && m.phis.size() != v.qubits())
    throw ConfigError("rotated Ry mixer needs one phi per qubit");
  if (beta == 0.0)
    return v;
  if (m.kind == MixerKind::TransverseX) {
    const Gate2 g = x_mixer_gate(beta);
    for (std::size_t j = 0; j < v.qubits(); ++j)
      apply_single_qubit(v, j, g);
  } else {
    const Gate2 rz = rz_gate(beta);
    for (std::size_t j = 0; j < v.qubits(); ++j)
      apply_single_qubit(v, j, multiply(ry_gate(m.phis[j]), multiply(rz, ry_gate(-m.phis[j]))));
  }
  return v;
}

/// U_B(beta_p) U_C(gamma_p) ... U_B(beta_1) U_C(gamma_1) |init>
inline Statevector run_ansatz(std::span<const double> energies, const QaoaParams &params,
                              Statevector init, const MixerSpec &m) {
  check_params(params);
  for (std::size_t layer = 0; layer < params.layers(); ++layer) {
    init = apply_cost(std::move(init), energies, params.gammas[layer]);
    init = apply_mixer(std::move(init), m, params.betas[layer]);
  }
  return init;
}

inline Statevector run_ansatz(const QuboModel &q, const QaoaParams &params, Statevector init,
                              const MixerSpec &m) {
  if (q.n != init.qubits())
    throw DomainError("QUBO size does not match the initial state");
  check_qubits(q.n, "QAOA ansatz");
  return run_ansatz(all_energies(q), params, std::move(init), m);
}

// ---------------------------------------------------------------------------
// Measurement

/// Basis index -> count.
using Histogram = std::map<std::uint64_t, std::size_t>;

namespace detail {

inline std::vector<double> cumulative(const Statevector &v) {
  std::vector<double> cdf(v.dimension());
  double acc = 0.0;
  for (std::size_t z = 0; z < cdf.size(); ++z) {
    acc += std::norm(v[z]);
    cdf[z] = acc;
  }
  return cdf;
}

inline std::uint64_t draw(const std::vector<double> &cdf, std::mt19937_64 &rng) {
  const double u = uniform01(rng) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end())
    --it;
  // Skip zero-probability states sharing the same cumulative value.
  return static_cast<std::uint64_t>(it - cdf.begin());
}

} // namespace detail

inline Histogram sample(const Statevector &v, std::size_t shots, std::uint64_t seed) {
  if (shots < 1)
    throw DomainError("shots must be at least 1");
  const auto cdf = detail::cumulative(v);
  auto rng = make_rng(seed, 0x5a3b1e);
  Histogram h;
  for (std::size_t i = 0; i < shots; ++i)
    ++h[detail::draw(cdf, rng)];
  return h;
}

/// How energies are estimated: exact statevector expectation, or the mean of
/// `shots` measured samples.
struct ExpectationMode {
  std::optional<std::size_t> shots;

  static ExpectationMode exact() { return {}; }
  static ExpectationMode sampled(std::size_t shots) { return {shots}; }
  bool is_exact() const { return !shots.has_value(); }
};

struct EnergyEstimate {
  double mean = 0.0;
  double standard_error = 0.0; // 0 in exact mode
};

inline EnergyEstimate estimate_energy(const Statevector &v, std::span<const double> energies,
                                      ExpectationMode mode, std::uint64_t seed = 0) {
  if (energies.size() != v.dimension())
    throw DomainError("energy table does not match the state dimension");
  if (mode.is_exact()) {
    double e = 0.0;
    for (std::size_t z = 0; z < energies.size(); ++z)
      e += std::norm(v[z]) * energies[z];
    return {e, 0.0};
  }
  const std::size_t shots = *mode.shots;
  if (shots < 1)
    throw DomainError("shots must be at least 1");
  const auto cdf = detail::cumulative(v);
  auto rng = make_rng(seed, 0x5a3b1e);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < shots; ++i) {
    const double e = energies[detail::draw(cdf, rng)];
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(shots);
  const double mean = sum / n;
  const double var = shots > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

inline double expectation(const Statevector &v, std::span<const double> energies,
                          ExpectationMode mode = ExpectationMode::exact(), std::uint64_t seed = 0) {
  return estimate_energy(v, energies, mode, seed).mean;
}

inline double expectation(const Statevector &v, const QuboModel &q,
                          ExpectationMode mode = ExpectationMode::exact(), std::uint64_t seed = 0) {
  if (q.n != v.qubits())
    throw DomainError("QUBO size does not match the state");
  return expectation(v, all_energies(q), mode, seed);
}

// ---------------------------------------------------------------------------
// Hill-climbing optimizer

struct OptimizationTrace {
  std::vector<double> energies;       // incumbent energy after each iteration
  std::vector<double> trial_energies; // energy of each proposal
  std::vector<bool> accepted;
  std::vector<std::size_t> depth;
  std::vector<QaoaParams> params_per_layer;
  std::vector<double> best_energy_per_layer;
  double initial_energy = 0.0;
  std::size_t shots_per_evaluation = 0; // 0 = exact expectation
  std::size_t evaluations = 0;

  std::size_t size() const { return energies.size(); }
};

/// Accept-if-better random search. Each iteration perturbs every free
/// parameter by a uniform draw in [-a_t, a_t], a_t = initial_step / (1+t)^decay;
/// gamma steps are multiplied by gamma_scale.
struct HillClimbConfig {
  std::size_t iterations = 200;
  double initial_step = 0.5;
  double decay = 0.3;
  /// Multiplier on gamma steps; 0 selects 1 / (energy spread over all states).
  double gamma_scale = 0.0;
  ExpectationMode mode = ExpectationMode::exact();
};

/// Standard deviation of the energy under the uniform distribution; sets the
/// natural unit for gamma.
inline double energy_spread(std::span<const double> energies) {
  double mean = 0.0;
  for (double e : energies)
    mean += e;
  mean /= static_cast<double>(energies.size());
  double var = 0.0;
  for (double e : energies)
    var += (e - mean) * (e - mean);
  var /= static_cast<double>(energies.size());
  return std::sqrt(var);
}

inline double resolve_gamma_scale(const HillClimbConfig &cfg, std::span<const double> energies) {
  if (cfg.gamma_scale > 0.0)
    return cfg.gamma_scale;
  const double spread = energy_spread(energies);
  return spread > 0.0 ? 1.0 / spread : 1.0;
}

/// Problem bundle for repeated evaluations: energy table plus initial state.
struct QaoaProblem {
  std::vector<double> energies;
  Statevector init;
  MixerSpec mixer;

  QaoaProblem(const QuboModel &q, Statevector init_state, MixerSpec m)
      : init(std::move(init_state)), mixer(std::move(m)) {
    if (q.n != init.qubits())
      throw DomainError("QUBO size does not match the initial state");
    check_qubits(q.n, "QAOA problem");
    if (mixer.kind == MixerKind::RotatedRy && mixer.phis.size() != q.n)
      throw ConfigError("rotated Ry mixer needs one phi per qubit");
    energies = all_energies(q);
  }

  Statevector state(const QaoaParams &p) const { return run_ansatz(energies, p, init, mixer); }
};

inline std::pair<QaoaParams, OptimizationTrace>
spsa_optimize(const QaoaProblem &problem, const QaoaParams &start, const std::vector<bool> &free_mask,
              const HillClimbConfig &cfg, std::uint64_t seed) {
  check_params(start);
  if (cfg.iterations < 1)
    throw ConfigError("optimizer needs at least one iteration");
  auto incumbent = start.flatten();
  if (free_mask.size() != incumbent.size())
    throw ConfigError("free mask must have one entry per parameter (gamma_1, beta_1, ...)");

  const double gamma_scale = resolve_gamma_scale(cfg, problem.energies);
  auto rng = make_rng(seed, 1);
  OptimizationTrace trace;
  trace.shots_per_evaluation = cfg.mode.shots.value_or(0);

  auto evaluate = [&](std::span<const double> flat) {
    ++trace.evaluations;
    const std::uint64_t eval_seed = rng();
    return expectation(problem.state(QaoaParams::unflatten(flat)), problem.energies, cfg.mode,
                       eval_seed);
  };

  double best = evaluate(incumbent);
  trace.initial_energy = best;
  std::vector<double> trial(incumbent.size());
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const double step = cfg.initial_step / std::pow(1.0 + static_cast<double>(t), cfg.decay);
    for (std::size_t i = 0; i < incumbent.size(); ++i) {
      trial[i] = incumbent[i];
      if (free_mask[i]) {
        const double scale = (i % 2 == 0) ? step * gamma_scale : step;
        trial[i] += uniform_real(rng, -scale, scale);
      }
    }
    const double e = evaluate(trial);
    const bool accept = e < best;
    if (accept) {
      incumbent = trial;
      best = e;
    }
    trace.energies.push_back(best);
    trace.trial_energies.push_back(e);
    trace.accepted.push_back(accept);
    trace.depth.push_back(start.layers());
  }
  auto result = QaoaParams::unflatten(incumbent);
  trace.params_per_layer.push_back(result);
  trace.best_energy_per_layer.push_back(best);
  return {std::move(result), std::move(trace)};
}

inline std::pair<QaoaParams, OptimizationTrace>
spsa_optimize(const QuboModel &q, const Statevector &init, const MixerSpec &m,
              const QaoaParams &start, const std::vector<bool> &free_mask, const HillClimbConfig &cfg,
              std::uint64_t seed) {
  return spsa_optimize(QaoaProblem(q, init, m), start, free_mask, cfg, seed);
}

/// Random depth-1 starting point: gamma in [-1, 1] * gamma_scale, beta in
/// [-pi/4, pi/4].
inline QaoaParams random_start(double gamma_scale, std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  QaoaParams p;
  p.gammas.push_back(uniform_real(rng, -1.0, 1.0) * gamma_scale);
  p.betas.push_back(uniform_real(rng, -std::numbers::pi / 4.0, std::numbers::pi / 4.0));
  return p;
}

/// Seed used for the optimizer run at circuit depth `depth` (1-based).
inline std::uint64_t layer_seed(std::uint64_t seed, std::size_t depth) {
  return splitmix64(seed + 0x9e37u * depth);
}

/// Grows the circuit one layer at a time. Each new layer starts at
/// (gamma, beta) = (0, 0) with all earlier layers frozen, so it begins
/// exactly at the previous depth's optimum.
inline std::pair<QaoaParams, OptimizationTrace>
layerwise_train(const QaoaProblem &problem, std::size_t p_max, const HillClimbConfig &cfg,
                std::uint64_t seed) {
  if (p_max < 1)
    throw ConfigError("layer-wise training needs p_max >= 1");
  const double gamma_scale = resolve_gamma_scale(cfg, problem.energies);
  QaoaParams params = random_start(gamma_scale, seed);
  OptimizationTrace trace;
  for (std::size_t depth = 1; depth <= p_max; ++depth) {
    if (depth > 1) {
      params.gammas.push_back(0.0);
      params.betas.push_back(0.0);
    }
    // Only the newest (gamma, beta) pair moves.
    std::vector<bool> mask(2 * depth, false);
    mask[2 * depth - 2] = mask[2 * depth - 1] = true;

    auto [best, layer] = spsa_optimize(problem, params, mask, cfg, layer_seed(seed, depth));
    params = std::move(best);
    if (depth == 1)
      trace.initial_energy = layer.initial_energy;
    trace.shots_per_evaluation = layer.shots_per_evaluation;
    trace.evaluations += layer.evaluations;
    for (std::size_t i = 0; i < layer.size(); ++i) {
      trace.energies.push_back(layer.energies[i]);
      trace.trial_energies.push_back(layer.trial_energies[i]);
      trace.accepted.push_back(layer.accepted[i]);
      trace.depth.push_back(depth);
    }
    trace.params_per_layer.push_back(params);
    trace.best_energy_per_layer.push_back(layer.best_energy_per_layer.back());
  }
  return {std::move(params), std::move(trace)};
}

inline std::pair<QaoaParams, OptimizationTrace>
layerwise_train(const QuboModel &q, std::size_t p_max, const Statevector &init, const MixerSpec &m,
                const HillClimbConfig &cfg, std::uint64_t seed) {
  return layerwise_train(QaoaProblem(q, init, m), p_max, cfg, seed);
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_trace_csv(std::ostream &out, const OptimizationTrace &trace) {
  out << "iteration,energy,accepted,depth\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << (i + 1) << ',' << format_real(trace.energies[i]) << ',' << (trace.accepted[i] ? 1 : 0)
        << ',' << trace.depth[i] << '\n';
}

/// Basis states with probability >= `threshold`, bit 0 printed first.
inline void write_histogram_csv(std::ostream &out, const Statevector &v, double threshold = 1e-12) {
  out << "bitstring,probability\n";
  for (std::size_t z = 0; z < v.dimension(); ++z) {
    const double p = std::norm(v[z]);
    if (p >= threshold)
      out << to_string(bits_from_index(z, v.qubits())) << ',' << format_real(p) << '\n';
  }
}

} // namespace beamqopt
