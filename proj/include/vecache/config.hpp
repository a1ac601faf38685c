#pragma once

// Simulation configuration: a flat `key = value` file (# comments) plus
// command-line `key=value` overrides. Unknown keys are rejected.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "vecache/caching.hpp"
#include "vecache/dataset.hpp"
#include "vecache/fed_distill.hpp"
#include "vecache/latent_codec.hpp"
#include "vecache/mobility.hpp"

namespace vecache::harness {

enum class Scheme { Proposed, Oracle, NTauGreedy, FedAvg, AsyFed, Random };

inline constexpr Scheme kAllSchemes[] = {Scheme::Proposed, Scheme::Oracle, Scheme::NTauGreedy,
                                         Scheme::FedAvg,   Scheme::AsyFed, Scheme::Random};

const char* to_string(Scheme scheme);
/// Throws ConfigError on an unknown name.
Scheme parse_scheme(const std::string& name);

/// Parameter-exchange (FedAvg / AsyFed) round model.
struct FlConfig {
  std::uint64_t param_count = 770000;
  int rounds_per_visit = 4;       // rounds a visit needs for a fully trained model
  double round_compute_s = 3.0;   // local training time per round
  double bandwidth_mbps = 10.0;   // per-vehicle link rate, both directions

  /// Compute time plus one full-model download and one upload.
  double round_seconds() const;
  void validate() const;
};

struct SimConfig {
  // mobility
  double speed_mu = 25.0;
  double speed_sigma = 5.0;
  std::optional<double> speed_min;  // default mu - 10
  std::optional<double> speed_max;  // default mu + 10
  int num_rsus = 2;
  double coverage_length = 500.0;
  double dt = 0.1;

  // run
  std::uint64_t seed = 1;
  double duration = 600.0;
  std::vector<Scheme> schemes{std::begin(kAllSchemes), std::end(kAllSchemes)};

  // data
  std::string data_path;  // empty: synthetic MovieLens-shaped ratings
  int num_vehicles = 60;
  double split_ratio = 0.8;
  int subsample_users = 600;  // 0 keeps every user
  double public_fraction = 0.1;

  codec::CodecHyper codec;

  // diffusion + federated distillation
  int diffusion_steps = 50;
  fd::ProtocolConfig protocol;
  double kc_sync_period = 60.0;

  // caching
  std::vector<int> capacities{500};
  int list_length = 0;  // 0: M = N
  double eta = 0.1;
  caching::LatencyModel latency;
  double tau = 0.2;

  FlConfig fl;

  std::string trace_path;  // optional NDJSON message trace of the proposed scheme

  mobility::SpeedDistribution speed_distribution() const;
  mobility::HighwayTopology topology() const;
  int list_length_for(int capacity) const { return list_length > 0 ? list_length : capacity; }
  bool has_scheme(Scheme s) const;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

/// Applies one `key = value` setting. Throws ConfigError on unknown keys or
/// unparsable values.
void apply_setting(SimConfig& config, const std::string& key, const std::string& value);

/// Parses `key=value` (as given to --set).
void apply_override(SimConfig& config, const std::string& assignment);

/// Reads settings on top of `base`. Blank lines and `#` comments are ignored.
SimConfig parse_config(std::istream& in, SimConfig base = {});
SimConfig load_config(const std::string& path, SimConfig base = {});

/// Every key with its current value, in a stable order; parse_config of this
/// text reproduces the config.
std::string dump_config(const SimConfig& config);

/// Named starting points: "desk" (the defaults) and "paper" (full dataset,
/// capacity grid 150..500).
SimConfig preset(const std::string& name);

/// Splits "a, b ,c" into trimmed non-empty items.
std::vector<std::string> split_list(const std::string& text);
std::string trim(const std::string& s);

}  // namespace vecache::harness
