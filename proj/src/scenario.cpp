#include "bittide/scenario.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "bittide/errors.hpp"

namespace bittide {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::index(std::size_t count) {
  if (count == 0) throw ConfigError("empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % count;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % count);
}

DirectedGraph random_strongly_connected(int n, Rng& rng) {
  if (n < 2) throw ConfigError("random graphs need at least two nodes");
  std::vector<NodeId> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 1);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);

  std::vector<Edge> edges;
  std::set<std::pair<NodeId, NodeId>> used;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const Edge e{perm[i], perm[(i + 1) % perm.size()]};
    if (used.emplace(e.src, e.dst).second) edges.push_back(e);
  }
  const std::size_t extra = rng.index(static_cast<std::size_t>(n) + 1);
  const std::size_t possible = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1);
  for (std::size_t added = 0; added < extra && used.size() < possible;) {
    const auto src = static_cast<NodeId>(rng.index(static_cast<std::size_t>(n)) + 1);
    const auto dst = static_cast<NodeId>(rng.index(static_cast<std::size_t>(n)) + 1);
    if (src == dst || !used.emplace(src, dst).second) continue;
    edges.push_back({src, dst});
    ++added;
  }
  return DirectedGraph(n, std::move(edges));
}

Eigen::VectorXd random_frequencies(int n, double center, double delta, Rng& rng) {
  Eigen::VectorXd omega(n);
  for (int i = 0; i < n; ++i) omega(i) = rng.uniform(center - delta, center + delta);
  return omega;
}

ModelParams Scenario::params() const { return ModelParams{omega_u, build_incidence(graph), buffer_capacity}; }

Scenario triangle_scenario() {
  Scenario s{"triangle",
             DirectedGraph(3, {{1, 2}, {2, 1}, {2, 3}, {1, 3}, {3, 1}, {3, 2}}),
             1,
             Eigen::Vector3d(0.998, 1.004, 0.999),
             32.0,
             {},
             {},
             {},
             {}};
  s.config.hold_duration = 200.0;
  s.simulation.t_end = 1e6;
  s.simulation.dt = 0.01;
  s.simulation.sample_stride = 100;
  // node 2 centers its buffer from node 1, then node 1 centers edge 5 out of order
  s.naive_targets = {1, 5};
  return s;
}

Scenario mesh_scenario() {
  // 1 2 3
  // 4 5 6
  // 7 8 9
  Scenario s{"mesh",
             DirectedGraph(9, {{1, 2},
                               {5, 8},
                               {2, 1},
                               {2, 5},
                               {2, 3},
                               {3, 2},
                               {4, 7},
                               {5, 4},
                               {4, 1},
                               {1, 4},
                               {6, 9},
                               {7, 8},
                               {3, 6},
                               {9, 8},
                               {8, 5},
                               {6, 5}}),
             2,
             {},
             32.0,
             {},
             {},
             {3, 5, 10, 4, 13, 2, 7, 11},
             {}};
  s.omega_u.resize(9);
  s.omega_u << 1.030, 0.985, 1.012, 0.970, 1.004, 1.021, 0.992, 1.027, 0.979;
  s.config.k = 0.2;
  s.config.k2 = 0.1;
  s.config.policy = PhasePolicy::Fixed;
  for (int j = 0; j <= 8; ++j) s.config.phase_times.push_back(500.0 + 250.0 * j);
  s.config.hold_duration = 250.0;
  s.simulation.t_end = 1e6;
  s.simulation.dt = 0.01;
  s.simulation.sample_stride = 100;
  return s;
}

Scenario random_scenario(int n, std::uint64_t seed, double delta) {
  Rng rng(seed);
  DirectedGraph graph = random_strongly_connected(n, rng);
  Eigen::VectorXd omega = random_frequencies(n, 1.0, delta, rng);
  Scenario s{"random", std::move(graph), 1, std::move(omega), 32.0, {}, {}, {}, {}};
  s.config.hold_duration = 100.0;
  s.simulation.t_end = 1e7;
  s.simulation.dt = 0.01;
  s.simulation.sample_stride = 100;
  return s;
}

}  // namespace bittide
