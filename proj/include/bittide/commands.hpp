#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bittide/scenario.hpp"

namespace bittide {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,
  kExitConfigError = 2,
  kExitNumericError = 3,
};

struct CommandOptions {
  std::optional<std::string> graph_file;
  std::string scenario = "triangle";
  std::optional<NodeId> root;
  std::uint64_t seed = 1;
  int n = 8;
  std::optional<double> delta;
  std::optional<double> k;
  std::optional<double> k2;
  std::optional<double> epsilon;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> stride;
  std::optional<std::string> out;
  std::optional<std::vector<EdgeId>> order;
  bool naive = false;
  std::string controller;  // simulate: none|proportional; oracle-compare: none|proportional|center
  bool closed_loop = false;
  int seeds = 100;
  int max_n = 12;
  bool inject_fault = false;
  std::optional<std::string> trace_file;
};

/// Scenario from --graph or --scenario plus flag overrides.
Scenario resolve_scenario(const CommandOptions& options);

int cmd_tree(const CommandOptions& options, std::ostream& out);
int cmd_steady_state(const CommandOptions& options, std::ostream& out);
int cmd_simulate(const CommandOptions& options, std::ostream& out);
int cmd_center(const CommandOptions& options, std::ostream& out);
int cmd_verify(const CommandOptions& options, std::ostream& out);
int cmd_oracle_compare(const CommandOptions& options, std::ostream& out);
/// Post-hoc check of an emitted trace CSV: cycle conservation and range membership.
int cmd_check_trace(const CommandOptions& options, std::ostream& out);

/// Runs a subcommand and maps exceptions to exit codes, writing diagnostics to `err`.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace bittide
