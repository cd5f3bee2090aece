#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bittide/controller.hpp"
#include "bittide/dynamics.hpp"
#include "bittide/graph.hpp"

namespace bittide {

/// Header `t,omega_1..omega_n,beta_1..beta_m`; values with 12 significant digits.
void write_trace_csv(std::ostream& out, const Trace& trace);

/// Reads back times, omega and beta columns. Throws ConfigError on malformed input.
Trace read_trace_csv(std::istream& in);

/// [{"t": ..., "label": ...}, ...]
nlohmann::json events_json(const Trace& trace);

nlohmann::json report_json(const CenteringReport& report);

/// {"nodes": n, "edges": [[src, dst], ...], "root": r}
struct GraphFile {
  DirectedGraph graph;
  std::optional<NodeId> root;
  std::optional<Eigen::VectorXd> omega_u;
};

/// Parses the graph document; optional "omega_u" is accepted as well.
/// Throws ConfigError on malformed input and TopologyError on invalid graphs.
GraphFile parse_graph_json(const nlohmann::json& doc);
GraphFile load_graph_file(const std::string& path);
nlohmann::json graph_json(const DirectedGraph& graph, std::optional<NodeId> root = std::nullopt);

}  // namespace bittide
