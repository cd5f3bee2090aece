#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bittide {

struct VerifyOptions {
  int seeds = 100;
  int max_n = 12;
  /// Flip the pulse direction so that the pulse-map check must fail.
  bool inject_fault = false;
};

struct PropertyResult {
  std::string name;
  int passed = 0;
  int total = 0;
  std::vector<std::uint64_t> failing_seeds;
  std::string first_failure;
};

/// Randomized property suites over seeds 1..seeds, graph sizes 3..max_n.
std::vector<PropertyResult> run_verification(const VerifyOptions& options);

}  // namespace bittide
