#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace bittide {

/// Nodes and edges are numbered from 1.
using NodeId = int;
using EdgeId = int;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Simple directed graph. Edge ids are 1-based positions in the edge list.
class DirectedGraph {
 public:
  /// Throws TopologyError on self loops, duplicate edges or out-of-range ids.
  DirectedGraph(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_.at(static_cast<std::size_t>(e - 1)); }

  /// Outgoing edge ids of a node, sorted by destination id.
  const std::vector<EdgeId>& out_edges(NodeId v) const { return out_[static_cast<std::size_t>(v)]; }
  /// Incoming edge ids of a node, ascending edge id.
  const std::vector<EdgeId>& in_edges(NodeId v) const { return in_[static_cast<std::size_t>(v)]; }

 private:
  int node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
};

/// Source, destination and signed incidence matrices (n x m).
struct IncidenceSet {
  Eigen::MatrixXd S;
  Eigen::MatrixXd D;
  Eigen::MatrixXd B;  // S - D

  int node_count() const { return static_cast<int>(B.rows()); }
  int edge_count() const { return static_cast<int>(B.cols()); }
  /// Endpoints of edge e recovered from the columns of S and D.
  Edge endpoints(EdgeId e) const;
};

IncidenceSet build_incidence(const DirectedGraph& graph);

bool is_strongly_connected(const DirectedGraph& graph);

/// Outward directed spanning tree rooted at `root`.
struct SpanningTree {
  int node_count = 0;
  NodeId root = 0;
  std::vector<EdgeId> tree_edges;   // ascending edge id
  std::vector<EdgeId> parent_edge;  // indexed by node id; 0 for the root and index 0
  std::vector<NodeId> parent;       // indexed by node id; 0 for the root and index 0

  bool contains(EdgeId e) const;
  /// Node whose parent edge is e. Throws ScheduleError if e is not a tree edge.
  NodeId head(EdgeId e) const;
  /// Tree depth of a node (root has depth 0).
  int depth(NodeId v) const;
  /// f precedes g: a directed tree walk of nonzero length leads from head(f) to head(g).
  bool precedes(EdgeId f, EdgeId g) const;
};

/// BFS from the root, visiting out-neighbours in ascending node id.
/// Throws TopologyError if some node is unreachable.
SpanningTree outward_spanning_tree(const DirectedGraph& graph, NodeId root);

/// The unique tree edge with destination `node`. Querying the root is an error.
EdgeId tree_edge_into(const SpanningTree& tree, NodeId node);

struct EdgeSchedule {
  std::vector<EdgeId> ordering;
};

/// Topological order of the tree edges; incomparable edges by lowest edge id.
EdgeSchedule consistent_ordering(const SpanningTree& tree);

/// True iff no pair of the ordering violates the tree partial order.
/// Throws ScheduleError if the ordering is not a permutation of the tree edges.
bool validate_ordering(const SpanningTree& tree, const EdgeSchedule& ordering);

/// Exact integer incidence partition against a spanning tree.
struct SmithPartition {
  std::vector<NodeId> row_nodes;     // non-root nodes, ascending
  std::vector<EdgeId> tree_columns;  // ascending edge id
  std::vector<EdgeId> other_columns;
  Eigen::MatrixXi B11;  // (n-1) x (n-1)
  Eigen::MatrixXi B12;  // (n-1) x (m-n+1)
  Eigen::MatrixXi N;    // B11^{-1} B12
  long long det_B11 = 0;
};

/// Tree columns first, root row dropped. Throws TopologyError if |det(B11)| != 1.
SmithPartition smith_partition(const IncidenceSet& incidence, const SpanningTree& tree);

/// Exact determinant of a small integer matrix (fraction-free elimination).
long long integer_determinant(const Eigen::MatrixXi& a);

/// Integer basis of the cycle space {u : B u = 0}, one column per non-tree edge.
Eigen::MatrixXi cycle_basis(const SmithPartition& partition, int edge_count);

/// Rebuild a vector of range(B^T) from its tree coordinates: the non-tree
/// coordinates are N^T times the tree coordinates.
Eigen::VectorXd extend_from_tree(const SmithPartition& partition, const Eigen::VectorXd& tree_values,
                                 int edge_count);

}  // namespace bittide
