#include "bittide/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "bittide/controller.hpp"
#include "bittide/frame_oracle.hpp"
#include "bittide/scenario.hpp"
#include "bittide/spectral.hpp"
#include "bittide/validators.hpp"

namespace bittide {

namespace {

constexpr double kAlgebraTol = 1e-10;
constexpr double kGain = 0.1;
constexpr double kPulse = 0.05;
constexpr double kDeadZone = 1e-3;
constexpr double kSpread = 5e-3;

struct Check {
  std::string name;
  bool ok = true;
  std::string detail;
};

class SeedRun {
 public:
  explicit SeedRun(std::vector<Check>& out) : out_(out) {}

  void record(const std::string& name, bool ok, const std::string& detail = {}) {
    out_.push_back({name, ok, ok ? std::string{} : detail});
  }

 private:
  std::vector<Check>& out_;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::vector<Check> check_seed(std::uint64_t seed, const VerifyOptions& options) {
  std::vector<Check> checks;
  SeedRun run(checks);
  Rng rng(seed);
  const int n = 3 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, options.max_n - 2))));
  const DirectedGraph graph = random_strongly_connected(n, rng);
  const Eigen::VectorXd omega_u = random_frequencies(n, 1.0, kSpread, rng);
  const IncidenceSet inc = build_incidence(graph);
  const NodeId root = static_cast<NodeId>(rng.index(static_cast<std::size_t>(n)) + 1);

  const Laplacian q = laplacian(inc);
  const SpectralData sd = spectral_data(q);
  const Eigen::MatrixXd zero_nn = Eigen::MatrixXd::Zero(n, n);
  const double gap = spectral_gap(q);
  {
    double worst = max_abs(q.Q * sd.Qdagger * q.Q - q.Q);
    worst = std::max({worst, max_abs(sd.W * q.Q), max_abs(q.Q * sd.W), max_abs(sd.W * sd.Qdagger),
                      max_abs(sd.Qdagger * sd.W), max_abs(sd.W - Eigen::VectorXd::Ones(n) * sd.z.transpose())});
    const double t_long = projector_horizon(gap, n);
    worst = std::max(worst, max_abs(matrix_exponential(q.Q * t_long) - sd.W));
    run.record("spectral identities", worst <= kAlgebraTol && sd.z.minCoeff() > 0.0, "residual " + fmt(worst));
  }

  const SpanningTree tree = outward_spanning_tree(graph, root);
  const SmithPartition part = smith_partition(inc, tree);
  {
    const bool ok = std::llabs(part.det_B11) == 1 && part.B11 * part.N == part.B12;
    run.record("unimodular tree block", ok, "det " + std::to_string(part.det_B11));
  }
  {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(n, [&] { return rng.uniform(-1.0, 1.0); });
    const Eigen::VectorXd y = inc.B.transpose() * x;
    Eigen::VectorXd tree_part(static_cast<Eigen::Index>(part.tree_columns.size()));
    for (std::size_t t = 0; t < part.tree_columns.size(); ++t) tree_part(static_cast<Eigen::Index>(t)) = y(part.tree_columns[t] - 1);
    const double rebuilt = (extend_from_tree(part, tree_part, inc.edge_count()) - y).cwiseAbs().maxCoeff();
    const double zeroed = extend_from_tree(part, Eigen::VectorXd::Zero(tree_part.size()), inc.edge_count()).cwiseAbs().maxCoeff();
    run.record("range property", rebuilt <= kAlgebraTol && zeroed == 0.0, "residual " + fmt(rebuilt));
  }
  {
    bool ok = true;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(inc.edge_count(), inc.edge_count());
    for (EdgeId g = 1; g <= graph.edge_count() && ok; ++g) {
      const Eigen::MatrixXd map = single_pulse_map(inc, g);
      const NodeId head = graph.edge(g).dst;
      ok = map.row(g - 1).isZero(0.0);
      for (EdgeId l = 1; l <= graph.edge_count() && ok; ++l) {
        if (graph.edge(l).src != head && graph.edge(l).dst != head) ok = (map.row(l - 1) - eye.row(l - 1)).isZero(0.0);
      }
    }
    run.record("pulse map structure", ok, "structure mismatch");
  }

  const ModelParams params{omega_u, inc, 32.0};
  const SteadyState ss = steady_state(sd, inc.B, kGain, omega_u);
  {
    ProportionalLaw law(kGain);
    SimulationOptions opts;
    opts.t_end = 20.0 / (kGain * gap);
    opts.sample_stride = 1 << 30;
    const Trace tr = simulate(params, law, opts);
    const double beta_err = (tr.beta_tilde.back() - ss.beta).cwiseAbs().maxCoeff();
    const double omega_err = (tr.omega.back() - ss.omega).cwiseAbs().maxCoeff();
    run.record("proportional steady state", beta_err <= 1e-6 && omega_err <= 1e-8,
               "beta " + fmt(beta_err) + " omega " + fmt(omega_err));
  }

  RotationConfig config;
  config.k = kGain;
  config.k2 = kPulse;
  config.epsilon = kDeadZone;
  config.invert_pulse = options.inject_fault;
  SimulationOptions sim;
  sim.t_end = 1e6;
  sim.sample_stride = 50;
  sim.record_corrections = n <= 10;
  const EdgeSchedule schedule = consistent_ordering(tree);
  CenteringResult result;
  try {
    result = run_centering(graph, tree, schedule, params, config, sim);
  } catch (const CenteringError& e) {
    for (const char* name : {"pulse map", "tree coverage", "frequency restoration", "frozen offset",
                             "all buffers centered", "fluid-oracle agreement", "cycle conservation"}) {
      run.record(name, false, std::string("centering aborted: ") + e.what());
    }
    return checks;
  }
  const CenteringReport& rep = result.report;
  {
    double worst = 0.0;
    for (const auto& p : rep.phases) worst = std::max(worst, p.map_error);
    run.record("pulse map", worst <= 1e-6 + kDeadZone, "map error " + fmt(worst));
  }
  {
    double worst = 0.0;
    for (std::size_t j = 0; j < rep.phases.size(); ++j) {
      for (EdgeId a : tree.tree_edges) {
        const EdgeId g = rep.phases[j].edge;
        if (a == g || tree.precedes(a, g)) worst = std::max(worst, std::abs(rep.phases[j].beta_after(a - 1)));
      }
    }
    run.record("tree coverage", worst <= 5.0 * kDeadZone, "max " + fmt(worst));
  }
  {
    double worst = 0.0;
    for (const auto& p : rep.phases) worst = std::max(worst, (p.omega_after - ss.omega).cwiseAbs().maxCoeff());
    run.record("frequency restoration", worst <= 1e-6, "max deviation " + fmt(worst));
  }
  {
    const Eigen::VectorXd expected = (sd.W - Eigen::MatrixXd::Identity(n, n)) * omega_u;
    const double err = (kGain * rep.frozen_y - expected).cwiseAbs().maxCoeff();
    run.record("frozen offset", err <= 1e-6, "error " + fmt(err));
  }
  run.record("all buffers centered", rep.max_final_beta <= 5.0 * kDeadZone, "max " + fmt(rep.max_final_beta));

  const Eigen::MatrixXi cycles = cycle_basis(part, inc.edge_count());
  double oracle_cycle = 0.0;
  if (n <= 10) {
    ReplayLaw replay(result.trace.corrections, sim.dt);
    OracleOptions oo;
    oo.t_end = result.trace.times.back();
    oo.dt = sim.dt;
    oo.sample_stride = sim.sample_stride;
    const Trace oracle = oracle_simulate(params, replay, centered_occupancy(inc.edge_count()), oo);
    const double dev = compare_fluid_oracle(result.trace, oracle, 16.0);
    run.record("fluid-oracle agreement", dev <= 2.0, "deviation " + fmt(dev));
    oracle_cycle = cycle_conservation_residual(oracle, cycles);
  }
  const double fluid_cycle = cycle_conservation_residual(result.trace, cycles);
  run.record("cycle conservation", fluid_cycle <= 1e-9 && oracle_cycle == 0.0,
             "fluid " + fmt(fluid_cycle) + " oracle " + fmt(oracle_cycle));
  return checks;
}

}  // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  std::vector<PropertyResult> results;
  std::map<std::string, std::size_t> slot;
  for (int s = 1; s <= options.seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    std::vector<Check> checks;
    try {
      checks = check_seed(seed, options);
    } catch (const std::exception& e) {
      checks.push_back({"harness", false, e.what()});
    }
    for (const auto& c : checks) {
      auto [it, inserted] = slot.emplace(c.name, results.size());
      if (inserted) results.push_back({c.name, 0, 0, {}, {}});
      PropertyResult& r = results[it->second];
      ++r.total;
      if (c.ok) {
        ++r.passed;
      } else {
        r.failing_seeds.push_back(seed);
        if (r.first_failure.empty()) r.first_failure = c.detail;
      }
    }
  }
  return results;
}

}  // namespace bittide
