#pragma once

// Per-RSU content cache: popularity scoring of decoded samples, top-M
// recommendation lists, residence-weighted replacement and request serving.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "vecache/dataset.hpp"

namespace vecache::caching {

using dataset::ContentId;

struct RecommendationList {
  int vehicle_id = 0;
  int rsu_id = 0;
  std::vector<ContentId> contents;  // descending score, ties by ascending id
};

class CacheState {
 public:
  CacheState() = default;
  CacheState(int rsu_id, int num_contents);

  int rsu_id() const { return rsu_id_; }
  int num_contents() const { return static_cast<int>(present_.size()); }
  std::size_t size() const { return contents_.size(); }
  bool contains(ContentId id) const;
  /// Cached ids, ascending.
  const std::vector<ContentId>& contents() const { return contents_; }
  double last_update_time() const { return last_update_; }

  /// Replaces the cached set.
  void assign(std::span<const ContentId> ids, double now);

 private:
  int rsu_id_ = 0;
  std::vector<ContentId> contents_;
  std::vector<std::uint8_t> present_;  // indexed by id - 1
  double last_update_ = 0.0;
};

struct LatencyModel {
  double hit_latency = 0.020;   // s
  double miss_latency = 0.100;  // s

  void validate() const;
};

struct ServeCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double latency_sum = 0.0;  // s

  std::uint64_t total() const { return hits + misses; }
  double hit_pct() const { return total() ? 100.0 * static_cast<double>(hits) / static_cast<double>(total()) : 0.0; }
  double mean_latency() const { return total() ? latency_sum / static_cast<double>(total()) : 0.0; }
};

/// Mean of the decoded reconstructions; `reconstructions` is K x F.
Eigen::VectorXd score_contents(const Eigen::MatrixXd& reconstructions);

/// Full ordering of content ids by descending score, ties by ascending id.
std::vector<ContentId> rank_contents(std::span<const double> scores);

/// First min(M, K) entries of rank_contents.
std::vector<ContentId> top_m(std::span<const double> scores, int m);

/// A vehicle currently inside the RSU together with its uploaded list.
struct ActiveVehicle {
  std::span<const ContentId> list;
  double position = 0.0;  // P_i
  double speed = 0.0;     // V_i^r
};

/// u_r(k) = sum_i eta (B - P_i) / V_i^r 1(k in L_i), dense over ids (index id - 1).
std::vector<double> replacement_scores(std::span<const ActiveVehicle> vehicles, double eta,
                                       double coverage_length, int num_contents);

/// Caches the top-N contents by score, ties by ascending id; zero-scored
/// lowest ids fill the remainder when fewer than N contents score positive.
void update_cache(CacheState& cache, std::span<const double> scores, int capacity, double now);

struct ServeResult {
  bool hit = false;
  double latency = 0.0;
};

/// Looks the content up and accumulates the outcome into `counters`.
ServeResult serve_request(const CacheState& cache, ContentId id, const LatencyModel& latency,
                          ServeCounters& counters);

}  // namespace vecache::caching
