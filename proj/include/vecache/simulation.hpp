#pragma once

// Discrete-event driver. One run evaluates every configured scheme at every
// configured capacity against the same mobility, request trace and refresh
// triggers, so cells differ only in their caching decisions.

#include <cstdint>
#include <map>
#include <vector>

#include "vecache/config.hpp"
#include "vecache/dataset.hpp"
#include "vecache/fed_distill.hpp"
#include "vecache/report.hpp"

namespace vecache::harness {

/// Data, mobility and requests derived from a config before any learning.
struct World {
  std::vector<dataset::LocalDataset> locals;  // one per vehicle
  Eigen::MatrixXd public_data;                // K x public users, normalized
  std::vector<std::vector<mobility::CoverageInterval>> trips;
  dataset::RequestTrace trace;
  int num_contents = dataset::kMovieLensContents;
};

/// Throws ConfigError for infeasible configs (e.g. more vehicles than users).
World build_world(const SimConfig& config);

struct CellMetrics {
  Scheme scheme = Scheme::Proposed;
  int capacity = 0;
  caching::ServeCounters counters;
  fd::ByteLedger ledger;  // vehicle <-> RSU traffic charged to this cell
};

struct Metrics {
  std::vector<CellMetrics> cells;  // scheme-major, capacities in config order
  std::uint64_t requests = 0;
  std::uint64_t dropped_requests = 0;
  int visits = 0;            // RSU entries inside the horizon
  int visits_completed = 0;  // proposed visits that uploaded KI
  int visits_distilled = 0;  // completed visits that trained against neighbour knowledge
  std::map<Scheme, int> fl_rounds_completed;
  int fl_rounds_required = 0;
  int kc_merges = 0;
  std::uint64_t backhaul_bytes = 0;  // RSU <-> MBS knowledge-cache sync, not in the cell ledgers
  std::vector<double> loss_trajectory;  // per episode, mean over the vehicles' initial local training

  const CellMetrics* find(Scheme scheme, int capacity) const;
};

struct SimulationResult {
  Report report;
  Metrics metrics;
};

SimulationResult run_simulation(const SimConfig& config);

Report make_report(const SimConfig& config, const Metrics& metrics);

/// Machine-readable dump of the raw counters.
std::string metrics_json(const Metrics& metrics);

}  // namespace vecache::harness
