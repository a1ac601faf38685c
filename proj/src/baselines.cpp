#include "vecache/baselines.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "vecache/error.hpp"

namespace vecache::harness {

std::vector<caching::ContentId> top_by_counts(const ContentCounts& counts, int capacity) {
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(capacity, 0)), counts.size());
  std::vector<caching::ContentId> ids(counts.size());
  std::iota(ids.begin(), ids.end(), caching::ContentId{1});
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                    [&](caching::ContentId a, caching::ContentId b) {
                      const auto ca = counts[a - 1], cb = counts[b - 1];
                      return ca != cb ? ca > cb : a < b;
                    });
  ids.resize(keep);
  return ids;
}

caching::CacheState oracle_policy(const ContentCounts& future_counts, int capacity, int rsu_id, double now) {
  caching::CacheState cache(rsu_id, static_cast<int>(future_counts.size()));
  const auto ids = top_by_counts(future_counts, capacity);
  cache.assign(ids, now);
  return cache;
}

namespace {

std::vector<caching::ContentId> shuffled_prefix(int num_contents, int capacity, Rng& rng) {
  std::vector<caching::ContentId> ids(static_cast<std::size_t>(num_contents));
  std::iota(ids.begin(), ids.end(), caching::ContentId{1});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(std::max(capacity, 0))));
  return ids;
}

}  // namespace

caching::CacheState n_tau_greedy_policy(const ContentCounts& observed_counts, int capacity, double tau, Rng& rng,
                                        int rsu_id, double now) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractViolation("n_tau_greedy_policy: tau must be in [0, 1]");
  const int k = static_cast<int>(observed_counts.size());
  caching::CacheState cache(rsu_id, k);
  const bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < tau;
  const auto ids = explore ? shuffled_prefix(k, capacity, rng) : top_by_counts(observed_counts, capacity);
  cache.assign(ids, now);
  return cache;
}

caching::CacheState random_policy(int num_contents, int capacity, Rng& rng, int rsu_id, double now) {
  caching::CacheState cache(rsu_id, num_contents);
  const auto ids = shuffled_prefix(num_contents, capacity, rng);
  cache.assign(ids, now);
  return cache;
}

double FlOutcome::completion_fraction(std::size_t visit, int required) const {
  if (required < 1) throw ContractViolation("completion_fraction: required rounds must be >= 1");
  return std::min(1.0, static_cast<double>(completed_rounds.at(visit)) / required);
}

FlOutcome parameter_exchange_baseline(FlKind kind, std::span<const FlVisit> visits, const FlConfig& config,
                                      double horizon) {
  config.validate();
  const double rt = config.round_seconds();
  const auto bytes = fd::wire::model_bytes(config.param_count);
  const int need = config.rounds_per_visit;

  FlOutcome out;
  out.completed_rounds.assign(visits.size(), 0);
  auto send = [&](double t, int vehicle, int rsu, fd::MessageType type) {
    const bool up = fd::is_uplink(type);
    const auto v = fd::vehicle_endpoint(vehicle), r = fd::rsu_endpoint(rsu);
    out.messages.push_back(fd::Message{t, up ? v : r, up ? r : v, type, bytes});
    (up ? out.uplink_bytes : out.downlink_bytes) += bytes;
  };

  if (kind == FlKind::AsyFed) {
    for (std::size_t i = 0; i < visits.size(); ++i) {
      const auto& v = visits[i];
      for (int k = 0; k < need; ++k) {
        const double start = v.entry + k * rt;
        if (start >= v.exit || start >= horizon) break;
        send(start, v.vehicle_id, v.rsu, fd::MessageType::ModelDown);
        const double end = start + rt;
        if (end > v.exit || end > horizon) break;
        send(end, v.vehicle_id, v.rsu, fd::MessageType::ModelUp);
        ++out.completed_rounds[i];
      }
    }
  } else {
    std::map<int, std::vector<std::size_t>> by_rsu;
    for (std::size_t i = 0; i < visits.size(); ++i) by_rsu[visits[i].rsu].push_back(i);
    for (const auto& [rsu, members] : by_rsu) {
      for (long k = 0;; ++k) {
        const double start = static_cast<double>(k) * rt;
        if (start >= horizon) break;
        const double end = start + rt;
        std::vector<std::size_t> part;
        for (std::size_t i : members) {
          const auto& v = visits[i];
          if (v.entry <= start && start < v.exit && out.completed_rounds[i] < need) part.push_back(i);
        }
        if (part.empty()) continue;
        bool all_stay = end <= horizon;
        for (std::size_t i : part) {
          send(start, visits[i].vehicle_id, rsu, fd::MessageType::ModelDown);
          if (visits[i].exit < end) all_stay = false;
        }
        for (std::size_t i : part) {
          // Vehicles still covered deliver their update even when the round fails.
          if (visits[i].exit >= end && end <= horizon) send(end, visits[i].vehicle_id, rsu, fd::MessageType::ModelUp);
          if (all_stay) ++out.completed_rounds[i];
        }
      }
    }
  }
  std::stable_sort(out.messages.begin(), out.messages.end(),
                     [](const fd::Message& a, const fd::Message& b) { return a.time < b.time; });
  return out;
}

}  // namespace vecache::harness
