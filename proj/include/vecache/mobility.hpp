#pragma once

// Highway topology, truncated-Gaussian vehicle speeds and RSU handoffs.

#include <optional>
#include <vector>

#include "vecache/rng.hpp"

namespace vecache::mobility {

/// Per-RSU vehicle speed law: Gaussian(mu, sigma) truncated to [v_min, v_max], m/s.
struct SpeedDistribution {
  double mu = 25.0;
  double sigma = 5.0;
  double v_min = 15.0;
  double v_max = 35.0;

  /// Throws ConfigError unless sigma > 0 and v_min < v_max.
  void validate() const;
};

/// A straight road covered by `num_rsus` back-to-back zones of equal length.
struct HighwayTopology {
  int num_rsus = 2;
  double coverage_length = 500.0;           // B, metres
  std::vector<double> rsu_entry_positions;  // global coordinate of each zone entrance

  static HighwayTopology contiguous(int num_rsus, double coverage_length, double origin = 0.0);
  void validate() const;
};

struct VehicleState {
  int vehicle_id = 0;
  int rsu_index = 0;             // == num_rsus once the vehicle has left the highway
  double position_in_rsu = 0.0;  // P_i, distance from the zone entrance
  double speed = 0.0;            // V_i^r
  double entry_time = 0.0;       // when the vehicle entered the current zone

  bool on_highway(const HighwayTopology& topo) const { return rsu_index < topo.num_rsus; }
};

enum class EventKind { Handoff, Exit };

struct MobilityEvent {
  EventKind kind;
  double time;
  int from_rsu;
  int to_rsu;        // num_rsus for Exit
  double new_speed;  // speed sampled for the new zone; 0 on Exit
};

struct AdvanceResult {
  VehicleState state;
  std::vector<MobilityEvent> events;  // in time order; empty when the step stays interior
};

double truncated_gaussian_pdf(double v, const SpeedDistribution& dist);
double truncated_gaussian_cdf(double v, const SpeedDistribution& dist);

/// Exact rejection sampler. Uses the untruncated Gaussian as proposal when
/// the support holds enough mass, otherwise a uniform proposal on the support.
double sample_speed(const SpeedDistribution& dist, Rng& rng);

/// (B - P_i) / V_i^r.
double residence_time(const VehicleState& vehicle, const HighwayTopology& topo);

/// Moves the vehicle by speed * dt. Boundary crossings are resolved exactly;
/// each crossing resamples the speed from `dist` and emits a Handoff, or an
/// Exit after the last zone. A single long step may cross several zones.
AdvanceResult advance(const VehicleState& vehicle, double now, double dt,
                      const HighwayTopology& topo, const SpeedDistribution& dist, Rng& rng);

/// Contiguous time span a vehicle spends inside one RSU zone.
struct CoverageInterval {
  int rsu = 0;
  double entry = 0.0;
  double exit = 0.0;   // clipped to the horizon when the vehicle is still inside
  double speed = 0.0;
  bool completed = false;  // false when clipped by the horizon

  double duration() const { return exit - entry; }
  /// Position inside the zone at absolute time t (entry <= t <= exit).
  double position_at(double t) const { return speed * (t - entry); }
};

/// Drives one vehicle with the fixed-increment loop from `arrival` until it
/// leaves the highway or `horizon` is reached.
std::vector<CoverageInterval> build_trip(int vehicle_id, double arrival, double horizon, double dt,
                                         const HighwayTopology& topo,
                                         const SpeedDistribution& dist, Rng& rng);

}  // namespace vecache::mobility
