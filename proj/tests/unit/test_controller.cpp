#include <doctest.h>

#include "bittide/controller.hpp"
#include "bittide/errors.hpp"
#include "bittide/scenario.hpp"
#include "bittide/spectral.hpp"
#include "bittide/validators.hpp"
#include "support/oracles.hpp"

using namespace bittide;

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

ControllerState pulse_state(NodeId root, PulseTarget target, Eigen::VectorXd frozen) {
  ControllerState s;
  s.phase = PhaseKind::Pulse;
  s.root = root;
  s.targets = {target};
  s.frozen_y = std::move(frozen);
  return s;
}

CenteringResult center(const Scenario& s) {
  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  const EdgeSchedule schedule = s.order.empty() ? consistent_ordering(tree) : EdgeSchedule{s.order};
  return run_centering(s.graph, tree, schedule, s.params(), s.config, s.simulation);
}

Scenario fast_random(int n, std::uint64_t seed) {
  Scenario s = random_scenario(n, seed, 5e-3);
  s.config.k = 0.1;
  s.config.k2 = 0.05;
  return s;
}

}  // namespace

TEST_CASE("proportional control law") {
  CHECK(max_abs(proportional_control(Eigen::Vector2d::Zero(), 0.3)) == 0.0);
  const Eigen::VectorXd c = proportional_control(Eigen::Vector2d(-1.0, 1.0), 0.1);
  CHECK(c(0) == doctest::Approx(-0.1));
  CHECK(c(1) == doctest::Approx(0.1));
}

TEST_CASE("dead-zone sign") {
  CHECK(dead_zone_sign(0.0, 1e-3) == 0.0);
  CHECK(dead_zone_sign(1e-3, 1e-3) == 0.0);
  CHECK(dead_zone_sign(-1e-3, 1e-3) == 0.0);
  CHECK(dead_zone_sign(2e-3, 1e-3) == 1.0);
  CHECK(dead_zone_sign(-5.0, 1e-3) == -1.0);
}

TEST_CASE("frame-rotation law by phase") {
  RotationConfig cfg;
  cfg.k = 0.2;
  cfg.k2 = 0.5;
  const Eigen::Vector3d y(1.0, -2.0, 0.5);
  const Eigen::Vector3d frozen(0.3, 0.1, -0.4);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);

  SUBCASE("proportional phase equals proportional control") {
    ControllerState s;
    s.root = 1;
    CHECK(frame_rotation_control(0.0, s, beta, y, cfg) == proportional_control(y, cfg.k));
  }
  SUBCASE("pulse speeds the destination up when its buffer is positive") {
    beta(0) = 5.0;
    const Eigen::VectorXd c = frame_rotation_control(0.0, pulse_state(1, {1, 2}, frozen), beta, y, cfg);
    CHECK(c(0) == doctest::Approx(cfg.k * frozen(0)));
    CHECK(c(1) == doctest::Approx(cfg.k * frozen(1) + cfg.k2));
    CHECK(c(2) == doctest::Approx(cfg.k * frozen(2)));
  }
  SUBCASE("pulse is off inside the dead zone") {
    beta(0) = 0.5 * cfg.epsilon;
    const Eigen::VectorXd c = frame_rotation_control(0.0, pulse_state(1, {1, 2}, frozen), beta, y, cfg);
    CHECK(max_abs(c - cfg.k * frozen) <= 1e-15);
  }
  SUBCASE("hold keeps the frozen offset") {
    ControllerState s = pulse_state(1, {1, 2}, frozen);
    s.phase = PhaseKind::Hold;
    beta(0) = 7.0;
    CHECK(max_abs(frame_rotation_control(0.0, s, beta, y, cfg) - cfg.k * frozen) <= 1e-15);
  }
  SUBCASE("the root must not pulse") {
    beta(1) = 1.0;
    CHECK_THROWS_AS(frame_rotation_control(0.0, pulse_state(1, {2, 1}, frozen), beta, y, cfg), ScheduleError);
  }
}

TEST_CASE("pulse duration") {
  CHECK(pulse_duration(0.0, 0.1) == 0.0);
  CHECK(pulse_duration(5.0, 0.1) == doctest::Approx(50.0));
  CHECK(pulse_duration(-5.0, 0.1) == doctest::Approx(50.0));
}

TEST_CASE("fixed schedules shorter than the worst-case pulse are rejected") {
  RotationConfig cfg;
  cfg.k2 = 0.1;
  cfg.policy = PhasePolicy::Fixed;
  cfg.phase_times = {100.0, 200.0, 300.0};
  CHECK_THROWS_AS(cfg.validate(2, 32.0), ConfigError);  // needs 160.1 per interval
  cfg.phase_times = {100.0, 300.0, 500.0};
  CHECK_NOTHROW(cfg.validate(2, 32.0));
  CHECK_THROWS_AS(cfg.validate(3, 32.0), ConfigError);
  CHECK_THROWS_AS(cfg.validate(2, std::nullopt), ConfigError);
  cfg.phase_times = {100.0, 400.0, 300.0};
  CHECK_THROWS_AS(cfg.validate(2, 32.0), ConfigError);
}

TEST_CASE("single pulse map") {
  const DirectedGraph two(2, {{1, 2}, {2, 1}});
  Eigen::Matrix2d expected;
  expected << 0, 0, 1, 1;
  CHECK(single_pulse_map(build_incidence(two), 1) == expected);

  SUBCASE("structure and agreement with a direct phase shift") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      Rng rng(seed);
      const DirectedGraph g = random_strongly_connected(3 + static_cast<int>(rng.index(8)), rng);
      const IncidenceSet inc = build_incidence(g);
      Eigen::VectorXd theta(g.node_count());
      for (int i = 0; i < g.node_count(); ++i) theta(i) = rng.uniform(-4, 4);
      const Eigen::VectorXd x = inc.B.transpose() * theta;
      for (EdgeId e = 1; e <= g.edge_count(); ++e) {
        const Eigen::VectorXd mx = single_pulse_map(inc, e) * x;
        CHECK(std::abs(mx(e - 1)) <= 1e-12);
        CHECK(max_abs(mx - oracle::pulse_by_phase_shift(g, e, x)) <= 1e-12);
        const NodeId i = g.edge(e).dst;
        for (EdgeId l = 1; l <= g.edge_count(); ++l)
          if (g.edge(l).src != i && g.edge(l).dst != i) CHECK(mx(l - 1) == x(l - 1));
      }
    }
  }
}

TEST_CASE("pulse targets") {
  const SpanningTree t = outward_spanning_tree(DirectedGraph(3, {{1, 2}, {2, 3}, {3, 1}}), 1);
  const auto targets = pulse_targets(t, {{1, 2}});
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].node == 2);
  CHECK(targets[1].node == 3);
  CHECK_THROWS_AS(pulse_targets(t, {{3}}), ScheduleError);
}

TEST_CASE("triangle centering follows the expected narrative") {
  Scenario s = triangle_scenario();
  s.simulation.sample_stride = 10;
  const CenteringResult r = center(s);
  const CenteringReport& rep = r.report;
  const Trace& tr = r.trace;
  REQUIRE(rep.converged);
  CHECK(rep.proportional_converged);
  CHECK(rep.max_final_beta <= s.config.final_factor * s.config.epsilon);
  REQUIRE(rep.phases.size() == 2);

  const IncidenceSet inc = build_incidence(s.graph);
  const double common = spectral_data(laplacian(inc)).z.dot(s.omega_u);
  auto sample_at = [&](double t) {
    return static_cast<std::size_t>(std::lower_bound(tr.times.begin(), tr.times.end(), t - 1e-9) - tr.times.begin());
  };

  // (a) frequencies agree before the first pulse (the sample at t1 already pulses)
  const std::size_t i1 = sample_at(rep.t1) - 1;
  CHECK(max_abs(tr.omega[i1].array() - common) <= 1e-6);
  CHECK(max_abs(tr.omega[0] - s.omega_u) <= 1e-15);

  // (b) node 2 slows during its pulse and its incoming buffers fill
  const PhaseRecord& p1 = rep.phases[0];
  CHECK(p1.node == 2);
  CHECK(p1.edge == 1);
  const std::size_t a = sample_at(p1.t_start) + 1, b = sample_at(p1.t_end) - 1;
  REQUIRE(b > a + 5);
  for (std::size_t i = a; i < b; ++i) {
    CHECK(tr.omega[i](1) < common - 0.5 * s.config.k2);
    for (EdgeId e : s.graph.in_edges(2)) CHECK(tr.beta_tilde[i + 1](e - 1) > tr.beta_tilde[i](e - 1));
  }

  // (c) edge 1 ends in the dead zone and node 2 is back at the common frequency
  CHECK(std::abs(p1.beta_after(0)) <= s.config.epsilon);
  CHECK(max_abs(p1.omega_after.array() - common) <= 1e-6);
  CHECK(p1.decentered.empty());
  CHECK(rep.phases[1].decentered.empty());
  for (const auto& p : rep.phases) CHECK(p.map_error <= 1e-6 + s.config.epsilon);

  std::vector<std::string> labels;
  for (const auto& e : tr.events) labels.push_back(e.label);
  CHECK(labels.front() == "proportional phase converged");
  CHECK(labels.back() == "hold");
}

TEST_CASE("naive triangle pulses de-center an edge centered earlier") {
  const Scenario s = triangle_scenario();
  const CenteringResult r =
      run_unordered_centering(s.graph, s.naive_targets, s.params(), s.config, s.simulation);
  REQUIRE(r.report.phases.size() == 2);
  const auto& later = r.report.phases[1].decentered;
  CHECK(std::find(later.begin(), later.end(), 1) != later.end());
  CHECK(std::abs(r.report.phases[1].beta_after(0)) > 10 * s.config.epsilon);
  CHECK_FALSE(r.report.converged);
}

TEST_CASE("mesh is centered edge by edge at the scheduled times") {
  const Scenario s = mesh_scenario();
  const CenteringResult r = center(s);
  REQUIRE(r.report.converged);
  CHECK(r.report.t1 == doctest::Approx(500.0));
  REQUIRE(r.report.phases.size() == 8);
  const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
  for (std::size_t j = 0; j < 8; ++j) {
    const PhaseRecord& p = r.report.phases[j];
    CHECK(p.edge == s.order[j]);
    CHECK(p.t_start == doctest::Approx(500.0 + 250.0 * static_cast<double>(j)));
    CHECK(p.t_end == doctest::Approx(750.0 + 250.0 * static_cast<double>(j)));
    for (std::size_t i = 0; i <= j; ++i) CHECK(std::abs(p.beta_after(s.order[i] - 1)) <= 5 * s.config.epsilon);
    CHECK(p.map_error <= 1e-6 + s.config.epsilon);
  }
  CHECK(r.report.max_final_beta <= 5 * s.config.epsilon);
}

TEST_CASE("random graphs: every buffer ends centered") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Scenario s = fast_random(3 + static_cast<int>(seed % 8), seed);
    const CenteringResult r = center(s);
    CHECK(r.report.converged);
    CHECK(r.report.max_final_beta <= 5 * s.config.epsilon);
    const DirectedGraph& g = s.graph;
    const SpanningTree tree = outward_spanning_tree(g, s.root);
    for (const auto& p : r.report.phases) {
      CHECK(oracle::pulse_by_phase_shift(g, p.edge, p.beta_before).isApprox(p.predicted_after, 1e-12));
      CHECK(p.map_error <= 1e-6 + s.config.epsilon);
    }
    const Eigen::MatrixXi u = cycle_basis(smith_partition(build_incidence(g), tree), g.edge_count());
    CHECK(cycle_conservation_residual(r.trace, u) <= 1e-9);
  }
}

TEST_CASE("centering failures") {
  SUBCASE("an out-of-order schedule is a schedule error") {
    const Scenario s = mesh_scenario();
    const SpanningTree tree = outward_spanning_tree(s.graph, s.root);
    CHECK_THROWS_AS(run_centering(s.graph, tree, {{10, 3, 5, 4, 13, 2, 7, 11}}, s.params(), s.config, s.simulation),
                    ScheduleError);
  }
  SUBCASE("reversed pulse direction exhausts the pulse budget") {
    Scenario s = fast_random(5, 3);
    s.config.invert_pulse = true;
    try {
      center(s);
      FAIL("expected a centering error");
    } catch (const CenteringError& e) {
      CHECK(e.phase().find("pulse") != std::string::npos);
      CHECK(e.partial_trace().size() > 0);
    }
  }
  SUBCASE("too small a budget stops in the proportional phase") {
    Scenario s = triangle_scenario();
    s.simulation.t_end = 50.0;
    try {
      center(s);
      FAIL("expected a centering error");
    } catch (const CenteringError& e) {
      CHECK(e.phase() == "proportional");
      CHECK(e.partial_trace().times.back() == doctest::Approx(50.0));
    }
  }
  SUBCASE("a graph that is not strongly connected is rejected") {
    const DirectedGraph g(3, {{1, 2}, {2, 3}, {1, 3}});
    const SpanningTree tree = outward_spanning_tree(g, 1);
    ModelParams p{Eigen::Vector3d::Ones(), build_incidence(g), 32.0};
    CHECK_THROWS_AS(run_centering(g, tree, consistent_ordering(tree), p, {}, {}), TopologyError);
  }
}
