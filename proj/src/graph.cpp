#include "bittide/graph.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <queue>
#include <set>
#include <string>
#include <utility>

#include "bittide/errors.hpp"

namespace bittide {

DirectedGraph::DirectedGraph(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ < 1) throw TopologyError("graph needs at least one node");
  out_.resize(static_cast<std::size_t>(node_count_) + 1);
  in_.resize(static_cast<std::size_t>(node_count_) + 1);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    const std::string id = "edge " + std::to_string(i + 1);
    if (e.src < 1 || e.src > node_count_ || e.dst < 1 || e.dst > node_count_)
      throw TopologyError(id + " has a node id outside 1.." + std::to_string(node_count_));
    if (e.src == e.dst) throw TopologyError(id + " is a self loop");
    if (!seen.emplace(e.src, e.dst).second)
      throw TopologyError(id + " duplicates " + std::to_string(e.src) + "->" + std::to_string(e.dst));
    out_[static_cast<std::size_t>(e.src)].push_back(static_cast<EdgeId>(i + 1));
    in_[static_cast<std::size_t>(e.dst)].push_back(static_cast<EdgeId>(i + 1));
  }
  for (auto& list : out_) {
    std::sort(list.begin(), list.end(), [this](EdgeId a, EdgeId b) { return edge(a).dst < edge(b).dst; });
  }
}

Edge IncidenceSet::endpoints(EdgeId e) const {
  Edge result;
  const Eigen::Index col = e - 1;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    if (S(i, col) != 0.0) result.src = static_cast<NodeId>(i + 1);
    if (D(i, col) != 0.0) result.dst = static_cast<NodeId>(i + 1);
  }
  return result;
}

IncidenceSet build_incidence(const DirectedGraph& graph) {
  const int n = graph.node_count();
  const int m = graph.edge_count();
  IncidenceSet inc;
  inc.S = Eigen::MatrixXd::Zero(n, m);
  inc.D = Eigen::MatrixXd::Zero(n, m);
  for (int e = 0; e < m; ++e) {
    const Edge& edge = graph.edges()[static_cast<std::size_t>(e)];
    inc.S(edge.src - 1, e) = 1.0;
    inc.D(edge.dst - 1, e) = 1.0;
  }
  inc.B = inc.S - inc.D;
  return inc;
}

namespace {

std::vector<bool> reachable(const DirectedGraph& graph, NodeId start, bool reversed) {
  std::vector<bool> mark(static_cast<std::size_t>(graph.node_count()) + 1, false);
  std::deque<NodeId> queue{start};
  mark[static_cast<std::size_t>(start)] = true;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    const auto& adj = reversed ? graph.in_edges(v) : graph.out_edges(v);
    for (EdgeId e : adj) {
      const NodeId w = reversed ? graph.edge(e).src : graph.edge(e).dst;
      if (!mark[static_cast<std::size_t>(w)]) {
        mark[static_cast<std::size_t>(w)] = true;
        queue.push_back(w);
      }
    }
  }
  return mark;
}

}  // namespace

bool is_strongly_connected(const DirectedGraph& graph) {
  const auto fwd = reachable(graph, 1, false);
  const auto bwd = reachable(graph, 1, true);
  for (NodeId v = 1; v <= graph.node_count(); ++v) {
    if (!fwd[static_cast<std::size_t>(v)] || !bwd[static_cast<std::size_t>(v)]) return false;
  }
  return true;
}

bool SpanningTree::contains(EdgeId e) const {
  return std::binary_search(tree_edges.begin(), tree_edges.end(), e);
}

NodeId SpanningTree::head(EdgeId e) const {
  for (NodeId v = 1; v <= node_count; ++v) {
    if (parent_edge[static_cast<std::size_t>(v)] == e) return v;
  }
  throw ScheduleError("edge " + std::to_string(e) + " is not a tree edge");
}

int SpanningTree::depth(NodeId v) const {
  int d = 0;
  while (v != root) {
    v = parent[static_cast<std::size_t>(v)];
    ++d;
  }
  return d;
}

bool SpanningTree::precedes(EdgeId f, EdgeId g) const {
  const NodeId from = head(f);
  NodeId v = head(g);
  while (v != root) {
    v = parent[static_cast<std::size_t>(v)];
    if (v == from) return true;
  }
  return false;
}

SpanningTree outward_spanning_tree(const DirectedGraph& graph, NodeId root) {
  const int n = graph.node_count();
  if (root < 1 || root > n) throw TopologyError("root " + std::to_string(root) + " is not a node");
  SpanningTree tree;
  tree.node_count = n;
  tree.root = root;
  tree.parent_edge.assign(static_cast<std::size_t>(n) + 1, 0);
  tree.parent.assign(static_cast<std::size_t>(n) + 1, 0);

  std::vector<bool> visited(static_cast<std::size_t>(n) + 1, false);
  visited[static_cast<std::size_t>(root)] = true;
  std::deque<NodeId> queue{root};
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    // out_edges is sorted by destination, so neighbours are visited in ascending id
    for (EdgeId e : graph.out_edges(v)) {
      const NodeId w = graph.edge(e).dst;
      if (visited[static_cast<std::size_t>(w)]) continue;
      visited[static_cast<std::size_t>(w)] = true;
      tree.parent_edge[static_cast<std::size_t>(w)] = e;
      tree.parent[static_cast<std::size_t>(w)] = v;
      tree.tree_edges.push_back(e);
      queue.push_back(w);
    }
  }
  for (NodeId v = 1; v <= n; ++v) {
    if (!visited[static_cast<std::size_t>(v)])
      throw TopologyError("node " + std::to_string(v) + " is unreachable from root " + std::to_string(root));
  }
  std::sort(tree.tree_edges.begin(), tree.tree_edges.end());
  return tree;
}

EdgeId tree_edge_into(const SpanningTree& tree, NodeId node) {
  if (node < 1 || node > tree.node_count) throw TopologyError("node " + std::to_string(node) + " out of range");
  if (node == tree.root) throw ScheduleError("the root has no incoming tree edge");
  return tree.parent_edge[static_cast<std::size_t>(node)];
}

EdgeSchedule consistent_ordering(const SpanningTree& tree) {
  // Kahn's algorithm on the tree: an edge becomes available once the parent
  // edge of its source has been scheduled.
  std::priority_queue<EdgeId, std::vector<EdgeId>, std::greater<>> ready;
  std::vector<std::vector<EdgeId>> children(static_cast<std::size_t>(tree.node_count) + 1);
  for (NodeId v = 1; v <= tree.node_count; ++v) {
    if (v == tree.root) continue;
    const NodeId p = tree.parent[static_cast<std::size_t>(v)];
    const EdgeId e = tree.parent_edge[static_cast<std::size_t>(v)];
    if (p == tree.root) {
      ready.push(e);
    } else {
      children[static_cast<std::size_t>(p)].push_back(e);
    }
  }
  EdgeSchedule schedule;
  while (!ready.empty()) {
    const EdgeId e = ready.top();
    ready.pop();
    schedule.ordering.push_back(e);
    for (EdgeId child : children[static_cast<std::size_t>(tree.head(e))]) ready.push(child);
  }
  return schedule;
}

bool validate_ordering(const SpanningTree& tree, const EdgeSchedule& ordering) {
  std::vector<EdgeId> sorted = ordering.ordering;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != tree.tree_edges)
    throw ScheduleError("ordering is not a permutation of the tree edges");
  const auto& g = ordering.ordering;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (tree.precedes(g[i], g[j])) return false;
    }
  }
  return true;
}

long long integer_determinant(const Eigen::MatrixXi& a) {
  // Bareiss fraction-free elimination; every division is exact.
  const Eigen::Index n = a.rows();
  if (n != a.cols()) throw Error("determinant of a non-square matrix");
  if (n == 0) return 1;
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> m = a.cast<long long>();
  long long sign = 1;
  long long prev = 1;
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    if (m(k, k) == 0) {
      Eigen::Index swap = k + 1;
      while (swap < n && m(swap, k) == 0) ++swap;
      if (swap == n) return 0;
      m.row(k).swap(m.row(swap));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      for (Eigen::Index j = k + 1; j < n; ++j) {
        m(i, j) = (m(i, j) * m(k, k) - m(i, k) * m(k, j)) / prev;
      }
    }
    prev = m(k, k);
  }
  return sign * m(n - 1, n - 1);
}

SmithPartition smith_partition(const IncidenceSet& incidence, const SpanningTree& tree) {
  const int n = incidence.node_count();
  const int m = incidence.edge_count();
  SmithPartition part;
  for (NodeId v = 1; v <= n; ++v) {
    if (v != tree.root) part.row_nodes.push_back(v);
  }
  part.tree_columns = tree.tree_edges;
  for (EdgeId e = 1; e <= m; ++e) {
    if (!tree.contains(e)) part.other_columns.push_back(e);
  }
  const auto rows = static_cast<Eigen::Index>(part.row_nodes.size());
  const auto tcols = static_cast<Eigen::Index>(part.tree_columns.size());
  const auto ocols = static_cast<Eigen::Index>(part.other_columns.size());
  if (tcols != rows) throw TopologyError("tree has " + std::to_string(tcols) + " edges, expected " + std::to_string(rows));

  part.B11.resize(rows, tcols);
  part.B12.resize(rows, ocols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index node = part.row_nodes[static_cast<std::size_t>(r)] - 1;
    for (Eigen::Index c = 0; c < tcols; ++c)
      part.B11(r, c) = static_cast<int>(incidence.B(node, part.tree_columns[static_cast<std::size_t>(c)] - 1));
    for (Eigen::Index c = 0; c < ocols; ++c)
      part.B12(r, c) = static_cast<int>(incidence.B(node, part.other_columns[static_cast<std::size_t>(c)] - 1));
  }
  part.det_B11 = integer_determinant(part.B11);
  if (std::llabs(part.det_B11) != 1)
    throw TopologyError("tree incidence block has determinant " + std::to_string(part.det_B11) + ", not +-1");

  // Gauss-Jordan on [B11 | B12]. Pivoting a totally unimodular matrix keeps it
  // totally unimodular, so every pivot is +-1 and all arithmetic stays integral.
  Eigen::MatrixXi aug(rows, tcols + ocols);
  aug << part.B11, part.B12;
  for (Eigen::Index k = 0; k < tcols; ++k) {
    Eigen::Index p = k;
    while (p < rows && aug(p, k) == 0) ++p;
    if (p == rows) throw TopologyError("tree incidence block is singular");
    aug.row(k).swap(aug.row(p));
    const int pivot = aug(k, k);
    if (pivot != 1 && pivot != -1) throw TopologyError("non-unit pivot in tree incidence block");
    aug.row(k) *= pivot;  // pivot^2 == 1
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i != k && aug(i, k) != 0) aug.row(i) -= aug(i, k) * aug.row(k);
    }
  }
  part.N = aug.rightCols(ocols);
  return part;
}

Eigen::MatrixXi cycle_basis(const SmithPartition& partition, int edge_count) {
  // B [x_T; x_N] = 0  <=>  x_T = -N x_N
  const auto cycles = static_cast<Eigen::Index>(partition.other_columns.size());
  Eigen::MatrixXi basis = Eigen::MatrixXi::Zero(edge_count, cycles);
  for (Eigen::Index c = 0; c < cycles; ++c) {
    basis(partition.other_columns[static_cast<std::size_t>(c)] - 1, c) = 1;
    for (std::size_t t = 0; t < partition.tree_columns.size(); ++t)
      basis(partition.tree_columns[t] - 1, c) = -partition.N(static_cast<Eigen::Index>(t), c);
  }
  return basis;
}

Eigen::VectorXd extend_from_tree(const SmithPartition& partition, const Eigen::VectorXd& tree_values,
                                 int edge_count) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(edge_count);
  const Eigen::VectorXd rest = partition.N.cast<double>().transpose() * tree_values;
  for (std::size_t t = 0; t < partition.tree_columns.size(); ++t)
    y(partition.tree_columns[t] - 1) = tree_values(static_cast<Eigen::Index>(t));
  for (std::size_t c = 0; c < partition.other_columns.size(); ++c)
    y(partition.other_columns[c] - 1) = rest(static_cast<Eigen::Index>(c));
  return y;
}

}  // namespace bittide
