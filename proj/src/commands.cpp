#include "bittide/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "bittide/errors.hpp"
#include "bittide/frame_oracle.hpp"
#include "bittide/spectral.hpp"
#include "bittide/trace_io.hpp"
#include "bittide/validators.hpp"
#include "bittide/verify.hpp"

namespace bittide {

namespace {

using nlohmann::json;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Scenario file_scenario(const CommandOptions& options) {
  GraphFile file = load_graph_file(*options.graph_file);
  const int n = file.graph.node_count();
  Eigen::VectorXd omega;
  if (file.omega_u) {
    omega = *file.omega_u;
  } else {
    Rng rng(options.seed);
    omega = random_frequencies(n, 1.0, options.delta.value_or(1e-4), rng);
  }
  Scenario s{"file", std::move(file.graph), file.root.value_or(1), std::move(omega), 32.0, {}, {}, {}, {}};
  s.config.hold_duration = 100.0;
  s.simulation.t_end = 1e7;
  s.simulation.sample_stride = 100;
  return s;
}

void write_outputs(const std::string& dir, const Trace& trace, const CenteringReport* report) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream csv(base / "trace.csv");
    if (!csv) throw ConfigError("cannot write to " + dir);
    write_trace_csv(csv, trace);
  }
  std::ofstream(base / "events.json") << events_json(trace).dump(2) << '\n';
  if (report) std::ofstream(base / "report.json") << report_json(*report).dump(2) << '\n';
}

double default_simulation_end(const Scenario& s, bool proportional) {
  if (!proportional) return 100.0;
  return 20.0 / (s.config.k * spectral_gap(laplacian(build_incidence(s.graph))));
}

struct Pipeline {
  CenteringResult result;
  bool naive = false;
};

Pipeline run_scenario_pipeline(const Scenario& s, const CommandOptions& options, SimulationOptions sim) {
  const ModelParams params = s.params();
  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  if (options.naive) {
    std::vector<EdgeId> targets;
    if (options.order) {
      targets = *options.order;
    } else if (!s.naive_targets.empty()) {
      targets = s.naive_targets;
    } else {
      targets = consistent_ordering(tree).ordering;
      std::reverse(targets.begin(), targets.end());
    }
    RotationConfig config = s.config;
    if (config.policy == PhasePolicy::Fixed && config.phase_times.size() != targets.size() + 1)
      config.policy = PhasePolicy::Adaptive;
    return {run_unordered_centering(s.graph, targets, params, config, sim), true};
  }
  EdgeSchedule schedule;
  if (options.order) {
    schedule.ordering = *options.order;
  } else if (!s.order.empty()) {
    schedule.ordering = s.order;
  } else {
    schedule = consistent_ordering(tree);
  }
  if (!validate_ordering(tree, schedule))
    throw ScheduleError("pulse order violates the tree partial order (use --naive to run it anyway)");
  return {run_centering(s.graph, tree, schedule, params, s.config, sim), false};
}

}  // namespace

Scenario resolve_scenario(const CommandOptions& options) {
  Scenario s = [&] {
    if (options.graph_file) return file_scenario(options);
    if (options.scenario == "triangle") return triangle_scenario();
    if (options.scenario == "mesh") return mesh_scenario();
    if (options.scenario == "random") return random_scenario(options.n, options.seed, options.delta.value_or(1e-4));
    throw ConfigError("unknown scenario '" + options.scenario + "' (triangle, mesh, random)");
  }();
  if (options.root) s.root = *options.root;
  if (s.root < 1 || s.root > s.graph.node_count()) throw ConfigError("root " + std::to_string(s.root) + " out of range");
  if (options.k) s.config.k = *options.k;
  if (options.k2) s.config.k2 = *options.k2;
  if (options.epsilon) s.config.epsilon = *options.epsilon;
  if (options.dt) s.simulation.dt = *options.dt;
  if (options.t_end) s.simulation.t_end = *options.t_end;
  if (options.stride) s.simulation.sample_stride = *options.stride;
  return s;
}

int cmd_tree(const CommandOptions& options, std::ostream& out) {
  const Scenario s = resolve_scenario(options);
  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  const EdgeSchedule schedule = consistent_ordering(tree);
  json edges = json::array();
  for (EdgeId e : tree.tree_edges)
    edges.push_back({{"id", e}, {"src", s.graph.edge(e).src}, {"dst", s.graph.edge(e).dst}});
  json doc = {{"root", tree.root},
              {"nodes", s.graph.node_count()},
              {"edges", s.graph.edge_count()},
              {"strongly_connected", is_strongly_connected(s.graph)},
              {"tree_edges", edges},
              {"ordering", schedule.ordering}};
  int code = kExitOk;
  if (options.order) {
    const bool valid = validate_ordering(tree, EdgeSchedule{*options.order});
    doc["order"] = *options.order;
    doc["order_valid"] = valid;
    if (!valid) code = kExitConfigError;
  }
  out << doc.dump(2) << '\n';
  return code;
}

int cmd_steady_state(const CommandOptions& options, std::ostream& out) {
  const Scenario s = resolve_scenario(options);
  if (!is_strongly_connected(s.graph)) throw TopologyError("graph is reducible (not strongly connected)");
  const IncidenceSet inc = build_incidence(s.graph);
  const Laplacian q = laplacian(inc);
  const SpectralData sd = spectral_data(q);
  const SteadyState ss = steady_state(sd, inc.B, s.config.k, s.omega_u);
  const json doc = {{"k", s.config.k},
                    {"z", to_vector(sd.z)},
                    {"omega_bar", sd.z.dot(s.omega_u)},
                    {"omega_ss", to_vector(ss.omega)},
                    {"beta_ss", to_vector(ss.beta)},
                    {"spectral_gap", spectral_gap(q)}};
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int cmd_simulate(const CommandOptions& options, std::ostream& out) {
  const Scenario s = resolve_scenario(options);
  const std::string choice = options.controller.empty() ? "proportional" : options.controller;
  if (choice != "none" && choice != "proportional") throw ConfigError("controller must be none or proportional");
  const bool proportional = choice == "proportional";
  SimulationOptions sim = s.simulation;
  sim.t_end = options.t_end ? *options.t_end : default_simulation_end(s, proportional);
  if (!options.stride) sim.sample_stride = std::max(1, static_cast<int>(sim.t_end / sim.dt / 2000.0));

  const ModelParams params = s.params();
  NoControl none;
  ProportionalLaw prop(s.config.k);
  ControlLaw& law = proportional ? static_cast<ControlLaw&>(prop) : static_cast<ControlLaw&>(none);
  const Trace trace = simulate(params, law, sim);

  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  const double cycle = cycle_conservation_residual(trace, cycle_basis(smith_partition(params.incidence, tree),
                                                                        params.incidence.edge_count()));
  const double range = range_residual(trace, params.incidence.B);
  const bool ok = cycle <= 1e-9 && range <= 1e-9;
  if (options.out) {
    write_outputs(*options.out, trace, nullptr);
    out << json{{"samples", trace.size()},
                {"t_end", trace.times.back()},
                {"cycle_residual", cycle},
                {"range_residual", range},
                {"final_omega", to_vector(trace.omega.back())},
                {"final_beta", to_vector(trace.beta_tilde.back())}}
               .dump(2)
        << '\n';
  } else {
    write_trace_csv(out, trace);
  }
  return ok ? kExitOk : kExitVerificationFailed;
}

int cmd_center(const CommandOptions& options, std::ostream& out) {
  const Scenario s = resolve_scenario(options);
  Pipeline run;
  try {
    run = run_scenario_pipeline(s, options, s.simulation);
  } catch (const CenteringError& e) {
    if (options.out) write_outputs(*options.out, e.partial_trace(), nullptr);
    out << json{{"error", e.what()}, {"phase", e.phase()}, {"converged", false}}.dump(2) << '\n';
    return kExitVerificationFailed;
  }
  if (options.out) write_outputs(*options.out, run.result.trace, &run.result.report);
  json doc = report_json(run.result.report);
  doc["naive"] = run.naive;
  out << doc.dump(2) << '\n';
  if (run.naive) return kExitOk;
  return run.result.report.converged ? kExitOk : kExitVerificationFailed;
}

int cmd_verify(const CommandOptions& options, std::ostream& out) {
  VerifyOptions vo;
  vo.seeds = options.seeds;
  vo.max_n = options.max_n;
  vo.inject_fault = options.inject_fault;
  if (vo.seeds < 1 || vo.max_n < 3) throw ConfigError("verify needs seeds >= 1 and max-n >= 3");
  const auto results = run_verification(vo);
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.passed == r.total;
    ok = ok && pass;
    out << (pass ? "PASS  " : "FAIL  ") << std::left << std::setw(28) << r.name << ' ' << r.passed << '/' << r.total;
    if (!pass) {
      out << "  seeds:";
      for (std::size_t i = 0; i < r.failing_seeds.size() && i < 10; ++i) out << ' ' << r.failing_seeds[i];
      if (r.failing_seeds.size() > 10) out << " ...";
      out << "  (" << r.first_failure << ')';
    }
    out << '\n';
  }
  return ok ? kExitOk : kExitVerificationFailed;
}

int cmd_oracle_compare(const CommandOptions& options, std::ostream& out) {
  const Scenario s = resolve_scenario(options);
  const std::string choice = options.controller.empty() ? "center" : options.controller;
  if (choice != "none" && choice != "proportional" && choice != "center")
    throw ConfigError("controller must be none, proportional or center");
  const ModelParams params = s.params();
  SimulationOptions sim = s.simulation;
  sim.record_corrections = true;

  Trace fluid;
  std::optional<CenteringReport> report;
  if (choice == "center") {
    CommandOptions ordered = options;
    Pipeline run = run_scenario_pipeline(s, ordered, sim);
    fluid = std::move(run.result.trace);
    report = run.result.report;
  } else {
    sim.t_end = options.t_end ? *options.t_end : default_simulation_end(s, choice == "proportional");
    NoControl none;
    ProportionalLaw prop(s.config.k);
    ControlLaw& law = choice == "none" ? static_cast<ControlLaw&>(none) : static_cast<ControlLaw&>(prop);
    fluid = simulate(params, law, sim);
  }

  const auto capacity = static_cast<long long>(s.buffer_capacity.value_or(32.0));
  OracleOptions oo;
  oo.t_end = fluid.times.back();
  oo.dt = sim.dt;
  oo.sample_stride = sim.sample_stride;
  oo.capacity = capacity;
  const std::vector<long long> boot = centered_occupancy(params.incidence.edge_count(), capacity);
  ReplayLaw replay(fluid.corrections, sim.dt);
  const Trace oracle = oracle_simulate(params, replay, boot, oo);
  const double offset = static_cast<double>(capacity / 2);
  const double deviation = compare_fluid_oracle(fluid, oracle, offset);

  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  const Eigen::MatrixXi cycles = cycle_basis(smith_partition(params.incidence, tree), params.incidence.edge_count());
  const double fluid_cycle = cycle_conservation_residual(fluid, cycles);
  const double oracle_cycle = cycle_conservation_residual(oracle, cycles);
  json faults = json::array();
  for (const auto& e : oracle.events) faults.push_back({{"t", e.t}, {"label", e.label}});
  const double threshold = 2.0;
  json doc = {{"controller", choice},
              {"samples", fluid.size()},
              {"max_deviation", deviation},
              {"threshold", threshold},
              {"fluid_cycle_residual", fluid_cycle},
              {"oracle_cycle_residual", oracle_cycle},
              {"oracle_faults", faults}};

  if (options.closed_loop && choice != "none") {
    // Same law fed the oracle's own integer occupancies instead of the fluid correction.
    Trace closed;
    if (report) {
      RotationConfig config = s.config;
      config.policy = PhasePolicy::Fixed;
      config.margin = 0.0;
      config.phase_times = {report->t1};
      for (const auto& p : report->phases) config.phase_times.push_back(p.t_end);
      ControllerState state;
      state.root = s.root;
      state.allow_root_pulse = options.naive;
      for (const auto& p : report->phases) state.targets.push_back({p.edge, p.node});
      FrameRotationLaw law(params.incidence, params.omega_u, std::move(state), config);
      try {
        closed = oracle_simulate(params, law, boot, oo);
        doc["closed_loop_deviation"] = compare_fluid_oracle(fluid, closed, offset);
      } catch (const CenteringError& e) {
        doc["closed_loop_error"] = e.what();
      }
    } else {
      ProportionalLaw law(s.config.k);
      closed = oracle_simulate(params, law, boot, oo);
      doc["closed_loop_deviation"] = compare_fluid_oracle(fluid, closed, offset);
    }
    if (closed.size()) {
      doc["closed_loop_final_max_offset"] =
          (closed.beta_tilde.back().array() - offset).abs().maxCoeff();
      json closed_faults = json::array();
      for (const auto& e : closed.events) closed_faults.push_back({{"t", e.t}, {"label", e.label}});
      doc["closed_loop_events"] = closed_faults;
    }
  }
  out << doc.dump(2) << '\n';
  const bool ok = deviation <= threshold && faults.empty() && oracle_cycle == 0.0 && fluid_cycle <= 1e-9;
  return ok ? kExitOk : kExitVerificationFailed;
}

int cmd_check_trace(const CommandOptions& options, std::ostream& out) {
  if (!options.trace_file) throw ConfigError("check-trace needs --trace <file>");
  const Scenario s = resolve_scenario(options);
  std::ifstream in(*options.trace_file);
  if (!in) throw ConfigError("cannot read trace " + *options.trace_file);
  const Trace trace = read_trace_csv(in);
  const IncidenceSet inc = build_incidence(s.graph);
  if (trace.size() && trace.beta_tilde.front().size() != inc.edge_count())
    throw ConfigError("trace edge count does not match the graph");
  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  const double cycle = cycle_conservation_residual(trace, cycle_basis(smith_partition(inc, tree), inc.edge_count()));
  const double range = range_residual(trace, inc.B);
  const bool ok = cycle <= 1e-9 && range <= 1e-9;
  out << json{{"samples", trace.size()}, {"cycle_residual", cycle}, {"range_residual", range}, {"pass", ok}}.dump(2)
      << '\n';
  return ok ? kExitOk : kExitVerificationFailed;
}

int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (name == "tree") return cmd_tree(options, out);
    if (name == "steady-state") return cmd_steady_state(options, out);
    if (name == "simulate") return cmd_simulate(options, out);
    if (name == "center") return cmd_center(options, out);
    if (name == "verify") return cmd_verify(options, out);
    if (name == "oracle-compare") return cmd_oracle_compare(options, out);
    if (name == "check-trace") return cmd_check_trace(options, out);
    err << "unknown command " << name << '\n';
    return kExitConfigError;
  } catch (const CenteringError& e) {
    err << "error: " << e.what() << " (phase: " << e.phase() << ")\n";
    return kExitVerificationFailed;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumericError;
  }
}

}  // namespace bittide
