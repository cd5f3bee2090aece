#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bittide/controller.hpp"
#include "bittide/dynamics.hpp"
#include "bittide/graph.hpp"

namespace bittide {

/// Portable uniform draws on top of mt19937_64 (the standard distributions
/// are not reproducible across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                     // [0, 1)
  double uniform(double lo, double hi);
  std::size_t index(std::size_t count);  // [0, count)

 private:
  std::mt19937_64 engine_;
};

/// Random Hamiltonian cycle plus up to n extra random edges.
DirectedGraph random_strongly_connected(int n, Rng& rng);

/// Uniform in [center - delta, center + delta].
Eigen::VectorXd random_frequencies(int n, double center, double delta, Rng& rng);

struct Scenario {
  std::string name;
  DirectedGraph graph;
  NodeId root = 1;
  Eigen::VectorXd omega_u;
  std::optional<double> buffer_capacity = 32.0;
  RotationConfig config;
  SimulationOptions simulation;
  /// Preferred pulse order; empty means consistent_ordering of the BFS tree.
  std::vector<EdgeId> order;
  /// Pulse targets used by naive mode; empty means the reversed tree order.
  std::vector<EdgeId> naive_targets;

  ModelParams params() const;
};

/// Three nodes, all six directed edges:
///   1: 1->2  2: 2->1  3: 2->3  4: 1->3  5: 3->1  6: 3->2
Scenario triangle_scenario();

/// Nine-node grid-like mesh with root 2 whose BFS tree is the edge set
/// {2,3,4,5,7,10,11,13}, so that (3,5,10,4,13,2,7,11) is a consistent order.
/// Pulses at t = 500, 750, ..., 2250.
Scenario mesh_scenario();

Scenario random_scenario(int n, std::uint64_t seed, double delta = 1e-4);

}  // namespace bittide
