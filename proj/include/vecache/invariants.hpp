#pragma once

// Run-level invariant checks shared by `vecsim validate` and the tests.

#include <string>
#include <vector>

#include "vecache/simulation.hpp"

namespace vecache::harness {

struct InvariantResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Properties of a single finished run: request conservation, the latency
/// accounting identity, ledger closure and ordering, oracle dominance,
/// capacity monotonicity of the nested-cache schemes and report round trips.
std::vector<InvariantResult> check_run(const SimConfig& config, const SimulationResult& result);

/// check_run plus a replay of the same config for byte-identical outputs.
std::vector<InvariantResult> validate_suite(const SimConfig& config);

/// Small, fast configuration used by `vecsim validate` without arguments.
SimConfig validation_preset();

}  // namespace vecache::harness
