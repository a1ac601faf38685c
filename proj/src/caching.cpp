#include "vecache/caching.hpp"

#include <algorithm>
#include <numeric>

#include "vecache/error.hpp"

namespace vecache::caching {

CacheState::CacheState(int rsu_id, int num_contents)
    : rsu_id_(rsu_id), present_(static_cast<std::size_t>(num_contents), 0) {}

bool CacheState::contains(ContentId id) const {
  if (id < 1 || id > present_.size()) throw ContractViolation("content id " + std::to_string(id) + " out of range");
  return present_[id - 1] != 0;
}

void CacheState::assign(std::span<const ContentId> ids, double now) {
  for (ContentId id : contents_) present_[id - 1] = 0;
  contents_.assign(ids.begin(), ids.end());
  std::sort(contents_.begin(), contents_.end());
  for (ContentId id : contents_) {
    if (id < 1 || id > present_.size()) throw ContractViolation("content id " + std::to_string(id) + " out of range");
    present_[id - 1] = 1;
  }
  last_update_ = now;
}

void LatencyModel::validate() const {
  if (!(hit_latency > 0.0 && hit_latency < miss_latency))
    throw ConfigError("latency: require 0 < hit latency < miss latency");
}

Eigen::VectorXd score_contents(const Eigen::MatrixXd& reconstructions) {
  if (reconstructions.cols() == 0) throw ContractViolation("score_contents: no reconstructions");
  return reconstructions.rowwise().mean();
}

std::vector<ContentId> rank_contents(std::span<const double> scores) {
  std::vector<ContentId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), ContentId{1});
  std::stable_sort(ids.begin(), ids.end(),
                   [&](ContentId a, ContentId b) { return scores[a - 1] > scores[b - 1]; });
  return ids;
}

std::vector<ContentId> top_m(std::span<const double> scores, int m) {
  if (m < 1) throw ContractViolation("top_m: M must be >= 1");
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(m), scores.size());
  std::vector<ContentId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), ContentId{1});
  auto before = [&](ContentId a, ContentId b) {
    const double sa = scores[a - 1], sb = scores[b - 1];
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), before);
  ids.resize(keep);
  return ids;
}

std::vector<double> replacement_scores(std::span<const ActiveVehicle> vehicles, double eta,
                                       double coverage_length, int num_contents) {
  std::vector<double> u(static_cast<std::size_t>(num_contents), 0.0);
  for (const auto& v : vehicles) {
    if (!(v.speed > 0.0)) throw ContractViolation("replacement_scores: vehicle speed must be > 0");
    const double weight = eta * (coverage_length - v.position) / v.speed;
    for (ContentId id : v.list) {
      if (id < 1 || id > u.size()) throw ContractViolation("replacement_scores: content id out of range");
      u[id - 1] += weight;
    }
  }
  return u;
}

void update_cache(CacheState& cache, std::span<const double> scores, int capacity, double now) {
  if (static_cast<int>(scores.size()) != cache.num_contents())
    throw ContractViolation("update_cache: score vector must cover every content");
  if (capacity < 1) {
    cache.assign({}, now);
    return;
  }
  const auto chosen = top_m(scores, capacity);
  cache.assign(chosen, now);
}

ServeResult serve_request(const CacheState& cache, ContentId id, const LatencyModel& latency,
                          ServeCounters& counters) {
  ServeResult r;
  r.hit = cache.contains(id);
  r.latency = r.hit ? latency.hit_latency : latency.miss_latency;
  if (r.hit)
    ++counters.hits;
  else
    ++counters.misses;
  counters.latency_sum += r.latency;
  return r;
}

}  // namespace vecache::caching
