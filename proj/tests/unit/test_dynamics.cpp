#include <doctest.h>

#include "bittide/dynamics.hpp"
#include "bittide/errors.hpp"
#include "bittide/scenario.hpp"
#include "bittide/spectral.hpp"
#include "bittide/validators.hpp"
#include "support/oracles.hpp"

using namespace bittide;

namespace {

ModelParams params_for(const DirectedGraph& g, Eigen::VectorXd omega) {
  return ModelParams{std::move(omega), build_incidence(g), std::nullopt};
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

class ConstantLaw final : public ControlLaw {
 public:
  explicit ConstantLaw(Eigen::VectorXd c) : c_(std::move(c)) {}
  Eigen::VectorXd correction(const Observation&) const override { return c_; }

 private:
  Eigen::VectorXd c_;
};

class ExplodingLaw final : public ControlLaw {
 public:
  Eigen::VectorXd correction(const Observation& obs) const override { return 1e300 * obs.theta.array().exp(); }
};

}  // namespace

TEST_CASE("buffer occupancy and measurement") {
  const IncidenceSet two = build_incidence(DirectedGraph(2, {{1, 2}, {2, 1}}));
  CHECK(max_abs(buffer_occupancy(Eigen::Vector2d::Zero(), two.B)) == 0.0);
  CHECK(buffer_occupancy(Eigen::Vector2d(1, 0), two.B) == Eigen::Vector2d(1, -1));
  CHECK(max_abs(measurement(Eigen::Vector2d::Zero(), two.D)) == 0.0);
  CHECK(measurement(Eigen::Vector2d(1, -1), two.D) == Eigen::Vector2d(-1, 1));

  const IncidenceSet tri = build_incidence(triangle_scenario().graph);
  CHECK(measurement(Eigen::VectorXd::Ones(6), tri.D) == Eigen::Vector3d::Constant(2.0));

  SUBCASE("cycle vectors annihilate every occupancy") {
    Rng rng(2);
    const DirectedGraph g = random_strongly_connected(7, rng);
    const IncidenceSet inc = build_incidence(g);
    const Eigen::MatrixXi u = cycle_basis(smith_partition(inc, outward_spanning_tree(g, 1)), g.edge_count());
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd theta(7);
      for (int i = 0; i < 7; ++i) theta(i) = rng.uniform(-100, 100);
      CHECK(max_abs(u.cast<double>().transpose() * buffer_occupancy(theta, inc.B)) <= 1e-10);
    }
  }
  SUBCASE("edge index agrees with the dense products") {
    Rng rng(3);
    const DirectedGraph g = random_strongly_connected(9, rng);
    const IncidenceSet inc = build_incidence(g);
    const EdgeIndex idx(inc);
    Eigen::VectorXd theta(9);
    for (int i = 0; i < 9; ++i) theta(i) = rng.uniform(-3, 3);
    Eigen::VectorXd beta, y;
    idx.beta(theta, beta);
    idx.y(beta, y);
    CHECK(max_abs(beta - buffer_occupancy(theta, inc.B)) <= 1e-14);
    CHECK(max_abs(y - measurement(beta, inc.D)) <= 1e-14);
  }
}

TEST_CASE("uncontrolled equal frequencies keep buffers at zero") {
  const ModelParams p = params_for(triangle_scenario().graph, Eigen::Vector3d::Ones());
  NoControl law;
  SimulationOptions opt;
  opt.t_end = 50.0;
  const Trace tr = simulate(p, law, opt);
  REQUIRE(tr.size() == 5001);
  CHECK(tr.times.back() == doctest::Approx(50.0));
  for (std::size_t i = 0; i < tr.size(); i += 500) {
    CHECK(max_abs(tr.beta_tilde[i]) <= 1e-12);
    CHECK(max_abs(tr.theta_tilde[i].array() - tr.times[i]) <= 1e-9);
  }
}

TEST_CASE("uncontrolled 2-cycle drifts linearly") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(2.0, 1.0));
  NoControl law;
  SimulationOptions opt;
  opt.t_end = 20.0;
  opt.sample_stride = 7;
  const Trace tr = simulate(p, law, opt);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr.beta_tilde[i](0) == doctest::Approx(tr.times[i]).epsilon(1e-12));
    CHECK(tr.beta_tilde[i](1) == doctest::Approx(-tr.times[i]).epsilon(1e-12));
  }
  CHECK(tr.times.back() == doctest::Approx(20.0));
}

TEST_CASE("constant correction is integrated exactly") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(1.0, 1.0));
  ConstantLaw law(Eigen::Vector2d(0.5, -0.25));
  SimulationOptions opt;
  opt.t_end = 4.0;
  const Trace tr = simulate(p, law, opt);
  CHECK(tr.theta_tilde.back()(0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(tr.theta_tilde.back()(1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(tr.omega.back()(0) == doctest::Approx(1.5));
}

TEST_CASE("proportional control settles at the predicted steady state") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed);
    const int n = 3 + static_cast<int>(rng.index(6));
    const DirectedGraph g = random_strongly_connected(n, rng);
    const Eigen::VectorXd omega = random_frequencies(n, 1.0, 1e-3, rng);
    const ModelParams p = params_for(g, omega);
    const double k = 0.5;
    const Laplacian q = laplacian(p.incidence);
    const SpectralData sd = spectral_data(q);
    SimulationOptions opt;
    opt.t_end = 20.0 / (k * spectral_gap(q));
    opt.sample_stride = 1000;
    ProportionalLaw law(k);
    const Trace tr = simulate(p, law, opt);
    const SteadyState ss = steady_state(sd, p.incidence.B, k, omega);
    CHECK(max_abs(tr.beta_tilde.back() - ss.beta) <= 1e-6);
    CHECK(max_abs(tr.omega.back() - ss.omega) <= 1e-8);
    // fixed-step RK4 against the closed form
    const Eigen::VectorXd exact =
        closed_form_theta(sd, q, k, omega, Eigen::VectorXd::Zero(n), tr.times.back());
    CHECK(max_abs(tr.theta_tilde.back() - exact) <= 1e-8 * (1.0 + tr.times.back()));
  }
}

TEST_CASE("traces conserve cycle sums and stay in the range of B^T") {
  Rng rng(8);
  const DirectedGraph g = random_strongly_connected(8, rng);
  const ModelParams p = params_for(g, random_frequencies(8, 1.0, 1e-2, rng));
  ProportionalLaw law(0.1);
  SimulationOptions opt;
  opt.t_end = 200.0;
  opt.sample_stride = 50;
  const Trace tr = simulate(p, law, opt);
  const Eigen::MatrixXi u = cycle_basis(smith_partition(p.incidence, outward_spanning_tree(g, 1)), g.edge_count());
  CHECK(cycle_conservation_residual(tr, u) <= 1e-9);
  CHECK(range_residual(tr, p.incidence.B) <= 1e-9);

  SUBCASE("a corrupted sample is flagged") {
    Trace bad = tr;
    bad.beta_tilde[3](0) += 1e-3;
    if (u.cols() > 0 && (u.row(0).array() != 0).any()) CHECK(cycle_conservation_residual(bad, u) > 1e-6);
    CHECK(range_residual(bad, p.incidence.B) > 1e-6);
  }
}

TEST_CASE("sampling stride and final state") {
  const ModelParams p = params_for(triangle_scenario().graph, Eigen::Vector3d(1.0, 1.1, 0.9));
  NoControl law;
  SimulationOptions opt;
  opt.t_end = 1.0;
  opt.sample_stride = 30;
  const Trace tr = simulate(p, law, opt);
  const std::vector<double> expected{0.0, 0.3, 0.6, 0.9, 1.0};
  REQUIRE(tr.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(tr.times[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("simulation input errors") {
  const DirectedGraph g(2, {{1, 2}, {2, 1}});
  NoControl law;
  SimulationOptions opt;
  CHECK_THROWS_AS(simulate(params_for(g, Eigen::Vector2d(1.0, -1.0)), law, opt), ConfigError);
  CHECK_THROWS_AS(simulate(params_for(g, Eigen::Vector3d::Ones()), law, opt), ConfigError);
  opt.dt = 0.0;
  CHECK_THROWS_AS(simulate(params_for(g, Eigen::Vector2d::Ones()), law, opt), ConfigError);
  opt.dt = 0.01;
  opt.sample_stride = 0;
  CHECK_THROWS_AS(simulate(params_for(g, Eigen::Vector2d::Ones()), law, opt), ConfigError);
}

TEST_CASE("divergence aborts with the partial trace") {
  const ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d::Ones());
  ExplodingLaw law;
  SimulationOptions opt;
  opt.t_end = 10.0;
  Trace tr;
  CHECK_THROWS_AS(simulate_into(tr, p, law, opt), NumericError);
  CHECK(tr.size() >= 1);
}

TEST_CASE("half-capacity crossings are reported") {
  ModelParams p = params_for(DirectedGraph(2, {{1, 2}, {2, 1}}), Eigen::Vector2d(2.0, 1.0));
  p.buffer_capacity = 8.0;
  NoControl law;
  SimulationOptions opt;
  opt.t_end = 6.0;
  const Trace tr = simulate(p, law, opt);
  REQUIRE_FALSE(tr.events.empty());
  CHECK(tr.events.front().t == doctest::Approx(4.0).epsilon(0.01));
}
