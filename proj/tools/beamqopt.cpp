// beamqopt: generate -> build -> solve / verify pipeline for beam slot
// scheduling QUBOs.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error,
// 3 capacity error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "beamqopt/beamqopt.hpp"

namespace fs = std::filesystem;
using namespace beamqopt;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCapacity = 3;
constexpr std::size_t kVerifyMaxBits = 20;

std::string sidecar_path(const std::string &qubo_path) { return qubo_path + ".index.json"; }

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string profile = "uniform";
  TrafficProfile traffic;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs &args) {
  TrafficProfile p = args.traffic;
  p.kind = parse_traffic_kind(args.profile);
  const Scenario s = generate_scenario(p, args.seed);
  save_scenario(s, args.out);
  std::cout << "flows=" << s.flow_count() << " units=" << s.unit_count()
            << " slots=" << s.active_slots().size() << " -> " << args.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  std::string scenario;
  double rescale = 1.0;
  std::optional<double> dq;
  std::optional<double> dp;
  std::vector<double> lambdas;
  std::string queue_scope = "all_units";
  std::string out;
};

/// Scenario as compiled: loaded, rescaled, slack quanta overridden.
Scenario effective_scenario(const Scenario &raw, double rescale, std::optional<double> dq,
                            std::optional<double> dp) {
  Scenario s = rescale_scenario(raw, rescale);
  if (dq)
    s.dq = *dq;
  if (dp)
    s.dp = *dp;
  validate(s);
  return s;
}

int cmd_build(const BuildArgs &args) {
  const Scenario s =
      effective_scenario(load_scenario(args.scenario), args.rescale, args.dq, args.dp);
  Lambdas lambdas = default_lambdas(s);
  if (!args.lambdas.empty())
    lambdas = {args.lambdas.at(0), args.lambdas.at(1), args.lambdas.at(2)};
  QuboOptions opt;
  opt.queue_scope = parse_queue_scope(args.queue_scope);
  const QuboModel q = build_qubo(s, lambdas, opt);
  for (const auto &w : q.warnings)
    std::cerr << "warning: " << w << '\n';

  std::ostringstream text;
  write_qubo(text, q);
  write_text(args.out, text.str());
  const json sidecar = {{"index", to_json(q.index)},
                        {"lambdas", to_json(q.lambdas)},
                        {"rescale", args.rescale},
                        {"dq", s.dq},
                        {"dp", s.dp}};
  write_text(sidecar_path(args.out), sidecar.dump(2) + "\n");

  std::cout << "N=" << q.n << '\n';
  std::cout << "decision_bits=" << q.index.decision_count() << '\n';
  for (const auto &g : q.index.power_slack)
    std::cout << "power_slack slot=" << g.owner << " bits=" << g.bits << '\n';
  for (const auto &g : q.index.queue_slack) {
    std::cout << "queue_slack flow=" << g.owner;
    if (g.slot)
      std::cout << " slot=" << *g.slot;
    std::cout << " bits=" << g.bits << '\n';
  }
  std::cout << "lambdas=" << format_real(lambdas.conflict) << ',' << format_real(lambdas.power)
            << ',' << format_real(lambdas.queue) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// shared loading for solve / verify

struct Compiled {
  Scenario scenario; // effective (rescaled) scenario
  QuboModel qubo;
  ModelOptions model;
};

Compiled load_compiled(const std::string &scenario_path, const std::string &qubo_path) {
  std::ifstream qin(qubo_path);
  if (!qin)
    throw std::runtime_error("cannot open " + qubo_path);
  Compiled c;
  c.qubo = read_qubo(qin);

  std::ifstream sin(sidecar_path(qubo_path));
  if (!sin)
    throw std::runtime_error("cannot open " + sidecar_path(qubo_path));
  json sidecar;
  try {
    sidecar = json::parse(sin);
    c.qubo.index = variable_index_from_json(sidecar.at("index"));
    const auto &l = sidecar.at("lambdas");
    c.qubo.lambdas = {l.at(0).get<double>(), l.at(1).get<double>(), l.at(2).get<double>()};
    c.scenario = effective_scenario(load_scenario(scenario_path), sidecar.at("rescale").get<double>(),
                                    sidecar.at("dq").get<double>(), sidecar.at("dp").get<double>());
  } catch (const json::exception &e) {
    throw DomainError(std::string("malformed QUBO sidecar: ") + e.what());
  }
  if (c.qubo.index.total_bits != c.qubo.n || c.qubo.index.flows != c.scenario.flow_count() ||
      c.qubo.index.units != c.scenario.unit_count())
    throw DomainError("QUBO index does not match the scenario");
  c.model.queue_scope = c.qubo.index.queue_scope;
  return c;
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string scenario;
  std::string qubo;
  std::string solver = "exact";
  std::size_t layers = 1;
  std::size_t iters = 200;
  std::optional<std::size_t> shots;
  bool exact_expectation = false;
  std::string mixer = "x";
  std::string phis = "greedy";
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::size_t node_limit = 10'000'000;
  std::string out_dir = ".";
};

json feasibility_json(const Compiled &c, const Schedule &x) {
  return to_json(check_feasibility(c.scenario, x, c.model));
}

int solve_classical(const SolveArgs &args, const Compiled &c) {
  const SolveResult r = args.solver == "exact" ? solve_exact(c.scenario, args.node_limit, c.model)
                                               : solve_greedy(c.scenario, c.model);
  json out = to_json(r);
  out["solver"] = args.solver;
  out["feasibility"] = feasibility_json(c, r.schedule);
  write_text(fs::path(args.out_dir) / "result.json", out.dump(2) + "\n");
  std::ostringstream sched;
  write_schedule(sched, r.schedule);
  write_text(fs::path(args.out_dir) / "schedule.txt", sched.str());
  std::cout << args.solver << ": objective=" << format_real(r.objective)
            << " optimal=" << (r.optimal ? "true" : "false") << " nodes=" << r.nodes_explored
            << '\n';
  return kExitOk;
}

struct QuantumRun {
  std::uint64_t seed;
  QaoaParams params;
  OptimizationTrace trace;
  Statevector state;
};

QuantumRun run_quantum(const SolveArgs &args, const QaoaProblem &problem, std::uint64_t seed) {
  HillClimbConfig cfg;
  cfg.iterations = args.iters;
  if (args.shots && !args.exact_expectation)
    cfg.mode = ExpectationMode::sampled(*args.shots);
  QuantumRun run{seed, {}, {}, {}};
  if (args.solver == "qaoa") {
    // All layers trained jointly from a random start.
    QaoaParams start = random_start(resolve_gamma_scale(cfg, problem.energies), seed);
    auto rng = make_rng(seed, 7);
    for (std::size_t l = 1; l < args.layers; ++l) {
      start.gammas.push_back(uniform_real(rng, -1.0, 1.0) * resolve_gamma_scale(cfg, problem.energies));
      start.betas.push_back(uniform_real(rng, -std::numbers::pi / 4.0, std::numbers::pi / 4.0));
    }
    const std::vector<bool> mask(2 * args.layers, true);
    std::tie(run.params, run.trace) = spsa_optimize(problem, start, mask, cfg, layer_seed(seed, 1));
  } else {
    std::tie(run.params, run.trace) = layerwise_train(problem, args.layers, cfg, seed);
  }
  run.state = problem.state(run.params);
  return run;
}

int solve_quantum(const SolveArgs &args, const Compiled &c) {
  const auto &q = c.qubo;
  const auto &s = c.scenario;
  if (q.n > max_qubits()) {
    std::cerr << "capacity error: QUBO needs N=" << q.n << " qubits, cap is " << max_qubits()
              << " (set BEAMQOPT_MAX_QUBITS to raise it)\n";
    return kExitCapacity;
  }
  if (args.layers < 1 || args.iters < 1 || args.repeats < 1)
    throw ConfigError("--layers, --iters and --repeats must be >= 1");

  MixerSpec mixer;
  Statevector init;
  if (args.mixer == "x") {
    init = init_uniform(q.n);
  } else if (args.mixer == "ry") {
    std::vector<double> phis(q.n, 0.0);
    if (args.phis == "greedy") {
      const Bitstring warm = encode_with_slack(q, s, solve_greedy(s, c.model).schedule);
      for (std::size_t i = 0; i < q.n; ++i)
        phis[i] = warm[i] ? std::numbers::pi : 0.0;
    } else if (args.phis != "zeros") {
      throw ConfigError("--phis must be 'greedy' or 'zeros'");
    }
    mixer = MixerSpec::rotated(phis);
    init = init_ry(phis);
  } else {
    throw ConfigError("--mixer must be 'x' or 'ry'");
  }
  const QaoaProblem problem(q, init, mixer);

  // Reference optimum for the Hamming profile and throughput ratio.
  std::optional<SolveResult> exact;
  if (s.decision_count() <= 30)
    exact = solve_exact(s, args.node_limit, c.model);

  std::vector<std::future<QuantumRun>> futures;
  for (std::size_t r = 0; r < args.repeats; ++r)
    futures.push_back(std::async(args.repeats > 1 ? std::launch::async : std::launch::deferred,
                                 [&, r] { return run_quantum(args, problem, args.seed + r); }));

  for (auto &f : futures) {
    const QuantumRun run = f.get();
    const std::string suffix = args.repeats > 1 ? "_seed" + std::to_string(run.seed) : "";
    const fs::path dir(args.out_dir);

    std::ostringstream trace_csv, hist_csv;
    write_trace_csv(trace_csv, run.trace);
    write_histogram_csv(hist_csv, run.state);
    write_text(dir / ("trace" + suffix + ".csv"), trace_csv.str());
    write_text(dir / ("histogram" + suffix + ".csv"), hist_csv.str());

    const ScheduleOutcome best = most_probable_schedule(run.state, q, s, {true, true, c.model});
    const double objective = weighted_throughput(s, best.schedule);
    json out = {{"solver", args.solver},
                {"seed", run.seed},
                {"layers", run.params.layers()},
                {"gammas", run.params.gammas},
                {"betas", run.params.betas},
                {"final_energy", run.trace.energies.back()},
                {"initial_energy", run.trace.initial_energy},
                {"best_energy_per_depth", run.trace.best_energy_per_layer},
                {"evaluations", run.trace.evaluations},
                {"shots_per_evaluation", run.trace.shots_per_evaluation},
                {"success_probability", success_probability(run.state, problem.energies)},
                {"schedule", to_json(best.schedule)},
                {"schedule_probability", best.probability},
                {"objective", objective},
                {"feasibility", feasibility_json(c, best.schedule)}};
    if (exact) {
      out["exact_objective"] = exact->objective;
      out["throughput_ratio"] = throughput_ratio(s, best.schedule, exact->schedule);
      out["optimal"] = exact->optimal && objective == exact->objective;
      const Bitstring reference = encode_with_slack(q, s, exact->schedule);
      std::ostringstream profile_csv;
      write_profile_csv(profile_csv, hamming_profile(run.state, q, s, reference, {true, true, c.model}));
      write_text(dir / ("profile" + suffix + ".csv"), profile_csv.str());
    } else {
      out["optimal"] = false;
    }
    write_text(dir / ("result" + suffix + ".json"), out.dump(2) + "\n");

    std::cout << args.solver << " seed=" << run.seed << " objective=" << format_real(objective)
              << " final_energy=" << format_real(run.trace.energies.back()) << '\n';
    for (std::size_t d = 0; d < run.trace.best_energy_per_layer.size(); ++d)
      std::cout << "  depth " << (args.solver == "layerwise" ? d + 1 : args.layers)
                << " best_energy=" << format_real(run.trace.best_energy_per_layer[d]) << '\n';
  }
  return kExitOk;
}

int cmd_solve(const SolveArgs &args) {
  const Compiled c = load_compiled(args.scenario, args.qubo);
  fs::create_directories(args.out_dir);
  if (args.solver == "exact" || args.solver == "greedy")
    return solve_classical(args, c);
  if (args.solver == "qaoa" || args.solver == "layerwise")
    return solve_quantum(args, c);
  throw ConfigError("--solver must be one of exact, greedy, qaoa, layerwise");
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string &scenario_path, const std::string &qubo_path) {
  const Compiled c = load_compiled(scenario_path, qubo_path);
  const auto &q = c.qubo;
  if (q.n > kVerifyMaxBits) {
    std::cerr << "capacity error: verify enumerates 2^N states; N=" << q.n << " exceeds "
              << kVerifyMaxBits << '\n';
    return kExitCapacity;
  }
  const auto energies = all_energies(q);
  const double ground = *std::min_element(energies.begin(), energies.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(ground));
  const SolveResult exact = solve_exact(c.scenario, 10'000'000, c.model);

  bool ok = exact.optimal;
  json minimizers = json::array();
  for (std::uint64_t z = 0; z < energies.size(); ++z) {
    if (energies[z] > ground + tol)
      continue;
    const Bitstring bits = bits_from_index(z, q.n);
    const Schedule x = decode(q, bits);
    const auto report = check_feasibility(c.scenario, x, c.model);
    const double objective = weighted_throughput(c.scenario, x);
    const bool matches = report.feasible &&
                         std::abs(objective - exact.objective) <=
                             1e-9 * std::max(1.0, std::abs(exact.objective));
    ok = ok && matches;
    minimizers.push_back({{"bitstring", to_string(bits)},
                          {"energy", energies[z]},
                          {"objective", objective},
                          {"matches_optimum", matches},
                          {"feasibility", to_json(report)}});
  }
  const json out = {{"ok", ok},
                    {"N", q.n},
                    {"ground_energy", ground},
                    {"exact_objective", exact.objective},
                    {"minimizers", minimizers}};
  std::cout << out.dump(2) << '\n';
  return ok ? kExitOk : kExitVerifyFailed;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Beam slot scheduling as QUBO: generation, compilation, classical and QAOA solvers"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto *generate = app.add_subcommand("generate", "Generate a synthetic scenario JSON");
  generate->add_option("--profile", gen.profile, "uniform | hotspot | mixed")
      ->check(CLI::IsMember({"uniform", "hotspot", "mixed"}));
  generate->add_option("--flows", gen.traffic.flow_count, "Number of flows")
      ->check(CLI::PositiveNumber);
  generate->add_option("--units", gen.traffic.unit_count, "Number of resource units")
      ->check(CLI::PositiveNumber);
  generate->add_option("--beams", gen.traffic.beam_count, "Number of beams")
      ->check(CLI::PositiveNumber);
  generate->add_option("--slots", gen.traffic.slot_count, "Number of time slots")
      ->check(CLI::PositiveNumber);
  generate->add_option("--volume-min", gen.traffic.volume_min, "Minimum queue volume (dq units)");
  generate->add_option("--volume-max", gen.traffic.volume_max, "Maximum queue volume (dq units)");
  generate->add_option("--hot-fraction", gen.traffic.hot_beam_fraction, "Fraction of hot beams");
  generate->add_flag("--correlate-weight-volume", gen.traffic.correlate_weight_volume,
                     "Draw larger volumes for higher-priority flows");
  generate->add_option("--dq", gen.traffic.dq, "Queue slack quantum");
  generate->add_option("--dp", gen.traffic.dp, "Power slack quantum");
  generate->add_option("--scale", gen.traffic.scale, "Physical magnitude multiplier");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--out", gen.out, "Output scenario JSON")->required();

  BuildArgs build;
  auto *build_cmd = app.add_subcommand("build", "Compile a scenario to a QUBO file and index sidecar");
  build_cmd->add_option("--scenario", build.scenario, "Scenario JSON")->required();
  build_cmd->add_option("--rescale", build.rescale, "Divide physical magnitudes by this factor")
      ->check(CLI::PositiveNumber);
  build_cmd->add_option("--dq", build.dq, "Override the queue slack quantum");
  build_cmd->add_option("--dp", build.dp, "Override the power slack quantum");
  build_cmd->add_option("--lambdas", build.lambdas, "Penalty weights: conflict power queue")
      ->expected(3);
  build_cmd->add_option("--queue-scope", build.queue_scope, "all_units | per_slot")
      ->check(CLI::IsMember({"all_units", "per_slot"}));
  build_cmd->add_option("--out", build.out, "Output QUBO text file")->required();

  SolveArgs solve;
  auto *solve_cmd = app.add_subcommand("solve", "Run a classical or QAOA solver");
  solve_cmd->add_option("--scenario", solve.scenario, "Scenario JSON")->required();
  solve_cmd->add_option("--qubo", solve.qubo, "QUBO file written by build")->required();
  solve_cmd->add_option("--solver", solve.solver, "exact | greedy | qaoa | layerwise")
      ->check(CLI::IsMember({"exact", "greedy", "qaoa", "layerwise"}));
  solve_cmd->add_option("--layers", solve.layers, "QAOA depth (max depth for layerwise)");
  solve_cmd->add_option("--iters", solve.iters, "Optimizer iterations per run or per layer");
  auto *shots = solve_cmd->add_option("--shots", solve.shots, "Sampled expectation with this many shots");
  solve_cmd->add_flag("--exact-expectation", solve.exact_expectation, "Use the exact expectation")
      ->excludes(shots);
  solve_cmd->add_option("--mixer", solve.mixer, "x | ry")->check(CLI::IsMember({"x", "ry"}));
  solve_cmd->add_option("--phis", solve.phis, "Ry angles source: greedy | zeros")
      ->check(CLI::IsMember({"greedy", "zeros"}));
  solve_cmd->add_option("--seed", solve.seed, "Optimizer seed");
  solve_cmd->add_option("--repeats", solve.repeats, "Independent seeds run in parallel");
  solve_cmd->add_option("--node-limit", solve.node_limit, "Branch-and-bound node budget");
  solve_cmd->add_option("--out-dir", solve.out_dir, "Directory for result files");

  std::string verify_scenario, verify_qubo;
  auto *verify = app.add_subcommand("verify", "Brute-force check that QUBO minimizers are feasible optima");
  verify->add_option("--scenario", verify_scenario, "Scenario JSON")->required();
  verify->add_option("--qubo", verify_qubo, "QUBO file written by build")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*generate)
      return cmd_generate(gen);
    if (*build_cmd)
      return cmd_build(build);
    if (*solve_cmd)
      return cmd_solve(solve);
    if (*verify)
      return cmd_verify(verify_scenario, verify_qubo);
  } catch (const CapacityError &e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
