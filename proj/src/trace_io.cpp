#include "bittide/trace_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "bittide/errors.hpp"

namespace bittide {

namespace {

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  const Eigen::Index n = trace.size() ? trace.omega.front().size() : 0;
  const Eigen::Index m = trace.size() ? trace.beta_tilde.front().size() : 0;
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",omega_" << (i + 1);
  for (Eigen::Index e = 0; e < m; ++e) out << ",beta_" << (e + 1);
  out << '\n';
  for (std::size_t s = 0; s < trace.size(); ++s) {
    out << format_number(trace.times[s]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_number(trace.omega[s](i));
    for (Eigen::Index e = 0; e < m; ++e) out << ',' << format_number(trace.beta_tilde[s](e));
    out << '\n';
  }
}

Trace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trace file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.front() != "t") throw ConfigError("trace header must start with t");
  Eigen::Index n = 0, m = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("omega_", 0) == 0) {
      if (m) throw ConfigError("omega columns must precede beta columns");
      ++n;
    } else if (header[c].rfind("beta_", 0) == 0) {
      ++m;
    } else {
      throw ConfigError("unexpected trace column " + header[c]);
    }
  }
  Trace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number in trace: " + cell);
      }
    }
    if (row.size() != header.size()) throw ConfigError("trace row has the wrong number of columns");
    trace.times.push_back(row[0]);
    trace.omega.push_back(Eigen::Map<Eigen::VectorXd>(row.data() + 1, n));
    trace.beta_tilde.push_back(Eigen::Map<Eigen::VectorXd>(row.data() + 1 + n, m));
  }
  return trace;
}

nlohmann::json events_json(const Trace& trace) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : trace.events) events.push_back({{"t", e.t}, {"label", e.label}});
  return events;
}

nlohmann::json report_json(const CenteringReport& report) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : report.phases) {
    phases.push_back({{"edge", p.edge},
                      {"node", p.node},
                      {"t_start", p.t_start},
                      {"t_end", p.t_end},
                      {"beta_before", to_vector(p.beta_before)},
                      {"beta_after", to_vector(p.beta_after)},
                      {"predicted_after", to_vector(p.predicted_after)},
                      {"map_error", p.map_error},
                      {"decentered", p.decentered}});
  }
  return {{"phases", phases},
          {"t1", report.t1},
          {"frozen_y", to_vector(report.frozen_y)},
          {"final_beta", to_vector(report.final_beta)},
          {"max_final_beta", report.max_final_beta},
          {"proportional_converged", report.proportional_converged},
          {"converged", report.converged}};
}

GraphFile parse_graph_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw ConfigError("graph document must be an object");
    const int n = doc.at("nodes").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("each edge must be a [src, dst] pair");
      edges.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    GraphFile file{DirectedGraph(n, std::move(edges)), std::nullopt, std::nullopt};
    if (doc.contains("root")) file.root = doc["root"].get<int>();
    if (doc.contains("omega_u")) {
      const auto values = doc["omega_u"].get<std::vector<double>>();
      file.omega_u = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph document: ") + e.what());
  }
}

GraphFile load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read graph file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("graph file " + path + " is not valid JSON: " + e.what());
  }
  return parse_graph_json(doc);
}

nlohmann::json graph_json(const DirectedGraph& graph, std::optional<NodeId> root) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges()) edges.push_back({e.src, e.dst});
  nlohmann::json doc = {{"nodes", graph.node_count()}, {"edges", edges}};
  if (root) doc["root"] = *root;
  return doc;
}

}  // namespace bittide
