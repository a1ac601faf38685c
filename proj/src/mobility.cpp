#include "vecache/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vecache/error.hpp"

namespace vecache::mobility {

namespace {

// Below this support mass the Gaussian proposal wastes too many draws.
constexpr double kMinGaussianAcceptance = 0.3;

double support_mass(const SpeedDistribution& d) {
  const double s = d.sigma * std::numbers::sqrt2;
  return 0.5 * (std::erf((d.v_max - d.mu) / s) - std::erf((d.v_min - d.mu) / s));
}

}  // namespace

void SpeedDistribution::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("mobility.sigma must be > 0");
  if (!(v_min < v_max)) throw ConfigError("mobility.v_min must be < mobility.v_max");
  if (!(v_min > 0.0)) throw ConfigError("mobility.v_min must be > 0 (residence time needs a positive speed)");
}

HighwayTopology HighwayTopology::contiguous(int num_rsus, double coverage_length, double origin) {
  HighwayTopology t;
  t.num_rsus = num_rsus;
  t.coverage_length = coverage_length;
  for (int r = 0; r < num_rsus; ++r) t.rsu_entry_positions.push_back(origin + r * coverage_length);
  t.validate();
  return t;
}

void HighwayTopology::validate() const {
  if (num_rsus < 1) throw ConfigError("topology.num_rsus must be >= 1");
  if (!(coverage_length > 0.0)) throw ConfigError("topology.coverage_length must be > 0");
  if (rsu_entry_positions.size() != static_cast<std::size_t>(num_rsus))
    throw ConfigError("topology: one entry position per RSU required");
  for (std::size_t r = 1; r < rsu_entry_positions.size(); ++r) {
    const double gap = rsu_entry_positions[r] - rsu_entry_positions[r - 1];
    if (std::abs(gap - coverage_length) > 1e-9 * std::max(1.0, coverage_length))
      throw ConfigError("topology: RSU zones must be contiguous");
  }
}

double truncated_gaussian_pdf(double v, const SpeedDistribution& dist) {
  dist.validate();
  if (v < dist.v_min || v > dist.v_max) return 0.0;
  const double s = dist.sigma * std::numbers::sqrt2;
  const double z = v - dist.mu;
  const double norm = std::sqrt(2.0 * std::numbers::pi * dist.sigma * dist.sigma) *
                      (std::erf((dist.v_max - dist.mu) / s) - std::erf((dist.v_min - dist.mu) / s));
  return 2.0 * std::exp(-z * z / (2.0 * dist.sigma * dist.sigma)) / norm;
}

double truncated_gaussian_cdf(double v, const SpeedDistribution& dist) {
  dist.validate();
  if (v <= dist.v_min) return 0.0;
  if (v >= dist.v_max) return 1.0;
  const double s = dist.sigma * std::numbers::sqrt2;
  const double lo = std::erf((dist.v_min - dist.mu) / s);
  return (std::erf((v - dist.mu) / s) - lo) / (std::erf((dist.v_max - dist.mu) / s) - lo);
}

double sample_speed(const SpeedDistribution& dist, Rng& rng) {
  dist.validate();
  if (support_mass(dist) >= kMinGaussianAcceptance) {
    std::normal_distribution<double> normal(dist.mu, dist.sigma);
    for (;;) {
      const double v = normal(rng);
      if (v >= dist.v_min && v <= dist.v_max) return v;
    }
  }
  // Uniform proposal with the density's maximum on the support as envelope.
  const double peak = std::clamp(dist.mu, dist.v_min, dist.v_max);
  auto unnormalised = [&](double v) {
    const double z = (v - dist.mu) / dist.sigma;
    return std::exp(-0.5 * z * z);
  };
  const double envelope = unnormalised(peak);
  std::uniform_real_distribution<double> proposal(dist.v_min, dist.v_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const double v = proposal(rng);
    if (unit(rng) * envelope <= unnormalised(v)) return v;
  }
}

double residence_time(const VehicleState& vehicle, const HighwayTopology& topo) {
  if (!(vehicle.speed > 0.0)) throw ContractViolation("residence_time: speed must be > 0");
  if (!vehicle.on_highway(topo)) throw ContractViolation("residence_time: vehicle is off the highway");
  return (topo.coverage_length - vehicle.position_in_rsu) / vehicle.speed;
}

AdvanceResult advance(const VehicleState& vehicle, double now, double dt,
                      const HighwayTopology& topo, const SpeedDistribution& dist, Rng& rng) {
  if (!(dt > 0.0)) throw ContractViolation("advance: dt must be > 0");
  AdvanceResult out{vehicle, {}};
  VehicleState& s = out.state;
  double t = now;
  double remaining = dt;
  while (remaining > 0.0 && s.on_highway(topo)) {
    const double to_boundary = (topo.coverage_length - s.position_in_rsu) / s.speed;
    if (to_boundary > remaining) {
      s.position_in_rsu += s.speed * remaining;
      break;
    }
    t += to_boundary;
    remaining -= to_boundary;
    const int from = s.rsu_index;
    if (from + 1 < topo.num_rsus) {
      s.rsu_index = from + 1;
      s.speed = sample_speed(dist, rng);
      s.position_in_rsu = 0.0;
      s.entry_time = t;
      out.events.push_back({EventKind::Handoff, t, from, s.rsu_index, s.speed});
    } else {
      s.rsu_index = topo.num_rsus;
      s.speed = 0.0;
      s.position_in_rsu = 0.0;
      s.entry_time = t;
      out.events.push_back({EventKind::Exit, t, from, topo.num_rsus, 0.0});
    }
  }
  return out;
}

std::vector<CoverageInterval> build_trip(int vehicle_id, double arrival, double horizon, double dt,
                                         const HighwayTopology& topo,
                                         const SpeedDistribution& dist, Rng& rng) {
  if (!(dt > 0.0)) throw ConfigError("sim.dt must be > 0");
  std::vector<CoverageInterval> trip;
  if (arrival >= horizon) return trip;

  VehicleState state{vehicle_id, 0, 0.0, sample_speed(dist, rng), arrival};
  trip.push_back({0, arrival, horizon, state.speed, false});

  for (long step = 0;; ++step) {
    const double t = arrival + static_cast<double>(step) * dt;
    if (t >= horizon) break;
    const double h = std::min(dt, horizon - t);
    auto result = advance(state, t, h, topo, dist, rng);
    for (const auto& ev : result.events) {
      trip.back().exit = ev.time;
      trip.back().completed = true;
      if (ev.kind == EventKind::Handoff && ev.time < horizon)
        trip.push_back({ev.to_rsu, ev.time, horizon, ev.new_speed, false});
    }
    state = result.state;
    if (!state.on_highway(topo)) break;
  }
  return trip;
}

}  // namespace vecache::mobility
