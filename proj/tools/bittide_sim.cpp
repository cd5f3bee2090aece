#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bittide/commands.hpp"

namespace {

std::vector<bittide::EdgeId> parse_edge_list(const std::string& text) {
  std::vector<bittide::EdgeId> edges;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int id = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    edges.push_back(id);
  }
  return edges;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bittide-sim: frame-rotation buffer centering for bittide clock networks"};
  app.require_subcommand(1);
  bittide::CommandOptions opt;
  std::string order_text;
  std::optional<std::string> graph, out, trace;
  std::optional<int> root, stride;
  std::optional<double> delta, k, k2, epsilon, dt, t_end;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--graph", graph, "graph JSON file {nodes, edges, root, omega_u}");
    sub->add_option("--scenario", opt.scenario, "triangle | mesh | random")->capture_default_str();
    sub->add_option("--root", root, "spanning tree root");
    sub->add_option("--seed", opt.seed, "random scenario seed")->capture_default_str();
    sub->add_option("--n", opt.n, "random scenario node count")->capture_default_str();
    sub->add_option("--delta", delta, "frequency spread around 1");
    sub->add_option("--k", k, "proportional gain");
    sub->add_option("--k2", k2, "pulse strength");
    sub->add_option("--epsilon", epsilon, "pulse dead zone");
    sub->add_option("--dt", dt, "integration step");
    sub->add_option("--t-end", t_end, "time budget");
    sub->add_option("--stride", stride, "record every n-th step");
    sub->add_option("--out", out, "output directory");
  };

  auto* tree = app.add_subcommand("tree", "spanning tree and consistent pulse ordering");
  auto* steady = app.add_subcommand("steady-state", "closed-form steady state under proportional control");
  auto* simulate = app.add_subcommand("simulate", "fluid simulation with no or proportional control");
  auto* center = app.add_subcommand("center", "full frame-rotation centering run");
  auto* verify = app.add_subcommand("verify", "randomized property suite");
  auto* compare = app.add_subcommand("oracle-compare", "fluid model against the frame-level oracle");
  auto* check = app.add_subcommand("check-trace", "check invariants of an emitted trace CSV");
  for (auto* sub : {tree, steady, simulate, center, compare, check}) add_common(sub);
  for (auto* sub : {tree, center, compare}) sub->add_option("--order", order_text, "comma separated edge ids");
  for (auto* sub : {center, compare}) sub->add_flag("--naive", opt.naive, "pulse the given targets without order checks");
  simulate->add_option("--controller", opt.controller, "none | proportional");
  compare->add_option("--controller", opt.controller, "none | proportional | center");
  compare->add_flag("--closed-loop", opt.closed_loop, "also drive the controller from integer occupancies");
  verify->add_option("--seeds", opt.seeds, "number of random graphs")->capture_default_str();
  verify->add_option("--max-n", opt.max_n, "largest node count")->capture_default_str();
  verify->add_option("--seed", opt.seed, "unused; kept for symmetry");
  verify->add_flag("--inject-fault", opt.inject_fault, "flip the pulse direction (suite must fail)");
  check->add_option("--trace", trace, "trace CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bittide::kExitConfigError;
  }

  opt.graph_file = graph;
  opt.out = out;
  opt.trace_file = trace;
  opt.root = root;
  opt.stride = stride;
  opt.delta = delta;
  opt.k = k;
  opt.k2 = k2;
  opt.epsilon = epsilon;
  opt.dt = dt;
  opt.t_end = t_end;
  if (!order_text.empty()) {
    try {
      opt.order = parse_edge_list(order_text);
    } catch (const std::exception&) {
      std::cerr << "error: --order expects comma separated edge ids\n";
      return bittide::kExitConfigError;
    }
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return bittide::run_command(name, opt, std::cout, std::cerr);
}
