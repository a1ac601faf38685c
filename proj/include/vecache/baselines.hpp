#pragma once

// Reference caching policies and the parameter-exchange (FedAvg / AsyFed)
// round accounting.

#include <cstdint>
#include <span>
#include <vector>

#include "vecache/caching.hpp"
#include "vecache/config.hpp"
#include "vecache/fed_distill.hpp"

namespace vecache::harness {

/// Request counts per content, index id - 1.
using ContentCounts = std::vector<std::uint32_t>;

/// Caches the N contents with the most requests in the coming window; ties
/// and zero-count fillers by ascending id.
caching::CacheState oracle_policy(const ContentCounts& future_counts, int capacity, int rsu_id, double now);

/// With probability tau a uniformly random N-subset, otherwise top-N by the
/// observed counts (ties by ascending id). The random subset is a prefix of a
/// shuffled id list, so replaying the same rng for a larger N gives a superset.
caching::CacheState n_tau_greedy_policy(const ContentCounts& observed_counts, int capacity, double tau, Rng& rng,
                                        int rsu_id, double now);

/// Uniformly random N-subset (prefix of a shuffled id list).
caching::CacheState random_policy(int num_contents, int capacity, Rng& rng, int rsu_id, double now);

/// Top-N ids by count, ties by ascending id.
std::vector<caching::ContentId> top_by_counts(const ContentCounts& counts, int capacity);

enum class FlKind { FedAvg, AsyFed };

/// One stay of one vehicle inside one RSU.
struct FlVisit {
  int vehicle_id = 0;
  int rsu = 0;
  double entry = 0.0;
  double exit = 0.0;  // physical departure (may lie beyond the horizon)
};

struct FlOutcome {
  std::vector<int> completed_rounds;  // per visit, same order as the input
  std::vector<fd::Message> messages;  // MODEL_DOWN / MODEL_UP in time order
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;

  /// completed / required, in [0, 1].
  double completion_fraction(std::size_t visit, int required) const;
};

/// Simulates full-parameter rounds over the visits. A round costs one model
/// download at its start and one upload at its end, and completes only when
/// the vehicle is still covered at the end (and the end lies within the
/// horizon).
///
/// AsyFed: each visit runs its rounds back to back from entry, independent of
/// other vehicles; a straggler simply stops.
/// FedAvg: each RSU starts rounds on a fixed clock (multiples of the round
/// time); every covered vehicle that still needs rounds joins, and the round
/// fails for all participants if any of them departs before it ends.
FlOutcome parameter_exchange_baseline(FlKind kind, std::span<const FlVisit> visits, const FlConfig& config,
                                      double horizon);

}  // namespace vecache::harness
