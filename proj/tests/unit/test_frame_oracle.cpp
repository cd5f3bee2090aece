#include <doctest.h>

#include <cmath>

#include "bittide/controller.hpp"
#include "bittide/errors.hpp"
#include "bittide/frame_oracle.hpp"
#include "bittide/scenario.hpp"
#include "bittide/validators.hpp"

using namespace bittide;

namespace {

ModelParams params_for(const DirectedGraph& g, Eigen::VectorXd omega) {
  return ModelParams{std::move(omega), build_incidence(g), 32.0};
}

long long as_count(double x) { return std::llround(x); }

}  // namespace

TEST_CASE("default boot fills every buffer halfway") {
  CHECK(centered_occupancy(3) == std::vector<long long>{16, 16, 16});
  CHECK(centered_occupancy(2, 10) == std::vector<long long>{5, 5});
}

TEST_CASE("equal frequencies keep occupancies constant") {
  const ModelParams p = params_for(triangle_scenario().graph, Eigen::Vector3d::Constant(0.9));
  NoControl law;
  OracleOptions opt;
  opt.t_end = 100.0;
  const Trace tr = oracle_simulate(p, law, centered_occupancy(6), opt);
  for (const auto& b : tr.beta_tilde) CHECK(b == Eigen::VectorXd::Constant(6, 16.0));
  CHECK(tr.events.empty());
}

TEST_CASE("uncontrolled 2-cycle follows the floor identity") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(2.0, 1.0));
  NoControl law;
  OracleOptions opt;
  opt.t_end = 10.0;
  const Trace tr = oracle_simulate(p, law, centered_occupancy(2), opt);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const long long ticks1 = static_cast<long long>(std::floor(tr.theta_tilde[i](0)));
    const long long ticks2 = static_cast<long long>(std::floor(tr.theta_tilde[i](1)));
    CHECK(as_count(tr.beta_tilde[i](0)) == 16 + ticks1 - ticks2);
    CHECK(as_count(tr.beta_tilde[i](1)) == 16 - ticks1 + ticks2);
  }
  const long long growth = as_count(tr.beta_tilde.back()(0)) - 16;
  CHECK(growth >= 9);
  CHECK(growth <= 11);
}

TEST_CASE("buffers that run dry or full raise events") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(2.0, 1.0));
  NoControl law;
  OracleOptions opt;
  opt.t_end = 20.0;
  const Trace tr = oracle_simulate(p, law, centered_occupancy(2), opt);
  bool underflow = false, overflow = false;
  for (const auto& e : tr.events) {
    underflow = underflow || e.label.find("underflow") != std::string::npos;
    overflow = overflow || e.label.find("overflow") != std::string::npos;
  }
  CHECK(underflow);
  CHECK(overflow);
}

TEST_CASE("oracle configuration errors") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(2.0, 1.0));
  NoControl law;
  OracleOptions opt;
  opt.dt = 0.5;
  CHECK_THROWS_AS(oracle_simulate(p, law, centered_occupancy(2), opt), ConfigError);
  opt.dt = 0.01;
  CHECK_THROWS_AS(oracle_simulate(p, law, centered_occupancy(3), opt), ConfigError);
}

TEST_CASE("fluid-oracle comparison") {
  Trace a;
  a.times = {0.0, 1.0};
  a.beta_tilde = {Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(1.0, 2.0)};
  a.omega = a.beta_tilde;
  a.theta_tilde = a.beta_tilde;
  CHECK(compare_fluid_oracle(a, a, 0.0) == 0.0);
  Trace shifted = a;
  for (auto& b : shifted.beta_tilde) b.array() += 16.0;
  CHECK(compare_fluid_oracle(a, shifted, 16.0) == 0.0);
  Trace other = a;
  other.times = {0.0, 2.0};
  CHECK_THROWS_AS(compare_fluid_oracle(a, other, 0.0), ConfigError);
  other = a;
  other.times.push_back(2.0);
  other.beta_tilde.push_back(Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(compare_fluid_oracle(a, other, 0.0), ConfigError);
}

TEST_CASE("equal-frequency fluid and oracle runs agree within one frame") {
  const ModelParams p = params_for(mesh_scenario().graph, Eigen::VectorXd::Constant(9, 1.01));
  NoControl law;
  SimulationOptions sim;
  sim.t_end = 50.0;
  const Trace fluid = simulate(p, law, sim);
  OracleOptions opt;
  opt.t_end = 50.0;
  const Trace oracle = oracle_simulate(p, law, centered_occupancy(16), opt);
  CHECK(compare_fluid_oracle(fluid, oracle, 16.0) <= 1.0);
}

TEST_CASE("proportional control on the triangle, fed integer occupancies, tracks the fluid model") {
  const Scenario s = triangle_scenario();
  const ModelParams p = s.params();
  ProportionalLaw law(s.config.k);
  SimulationOptions sim;
  sim.t_end = 3000.0;
  sim.sample_stride = 10;
  const Trace fluid = simulate(p, law, sim);
  OracleOptions opt;
  opt.t_end = sim.t_end;
  opt.sample_stride = 10;
  const Trace oracle = oracle_simulate(p, law, centered_occupancy(6), opt);
  CHECK(compare_fluid_oracle(fluid, oracle, 16.0) <= 2.0);
  CHECK(oracle.events.empty());
}

TEST_CASE("replayed centering corrections keep the oracle within two frames") {
  auto check_scenario = [](const Scenario& s) {
    SimulationOptions sim = s.simulation;
    sim.record_corrections = true;
    const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
    const EdgeSchedule order = s.order.empty() ? consistent_ordering(tree) : EdgeSchedule{s.order};
    const CenteringResult r = run_centering(s.graph, tree, order, s.params(), s.config, sim);
    REQUIRE(r.report.converged);
    ReplayLaw replay(r.trace.corrections, sim.dt);
    OracleOptions opt;
    opt.t_end = r.trace.times.back();
    opt.dt = sim.dt;
    opt.sample_stride = sim.sample_stride;
    const Trace oracle = oracle_simulate(s.params(), replay, centered_occupancy(s.graph.edge_count()), opt);
    CHECK(compare_fluid_oracle(r.trace, oracle, 16.0) <= 2.0);
    CHECK(oracle.events.empty());
    const Eigen::MatrixXi u = cycle_basis(smith_partition(build_incidence(s.graph), tree), s.graph.edge_count());
    CHECK(cycle_conservation_residual(oracle, u) == 0.0);
  };
  SUBCASE("triangle") { check_scenario(triangle_scenario()); }
  SUBCASE("random graphs") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Scenario s = random_scenario(4 + static_cast<int>(seed), seed, 5e-3);
      s.config.k = 0.1;
      s.config.k2 = 0.05;
      check_scenario(s);
    }
  }
}

TEST_CASE("replay law averages the recorded corrections over a step") {
  std::vector<CorrectionSegment> segs{{0.0, 0.004, Eigen::Vector2d(1.0, 0.0)},
                                      {0.004, 0.01, Eigen::Vector2d(0.0, 1.0)},
                                      {0.01, 0.02, Eigen::Vector2d(2.0, 2.0)}};
  ReplayLaw law(segs, 0.01);
  const Eigen::Vector2d theta = Eigen::Vector2d::Zero(), beta = theta, y = theta;
  const Eigen::VectorXd c0 = law.correction(Observation{0.0, theta, beta, y});
  CHECK(c0(0) == doctest::Approx(0.4));
  CHECK(c0(1) == doctest::Approx(0.6));
  const Eigen::VectorXd c1 = law.correction(Observation{0.01, theta, beta, y});
  CHECK(c1(0) == doctest::Approx(2.0));
}
