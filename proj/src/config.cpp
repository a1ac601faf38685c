#include "vecache/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "vecache/error.hpp"

namespace vecache::harness {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Proposed: return "proposed";
    case Scheme::Oracle: return "oracle";
    case Scheme::NTauGreedy: return "n_tau_greedy";
    case Scheme::FedAvg: return "fedavg";
    case Scheme::AsyFed: return "asyfed";
    case Scheme::Random: return "random";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : kAllSchemes)
    if (name == to_string(s)) return s;
  throw ConfigError("unknown scheme '" + name + "'");
}

double FlConfig::round_seconds() const {
  const double transfer = 8.0 * static_cast<double>(fd::wire::model_bytes(param_count)) / (bandwidth_mbps * 1e6);
  return round_compute_s + 2.0 * transfer;
}

void FlConfig::validate() const {
  if (param_count == 0) throw ConfigError("fl.param_count must be > 0");
  if (rounds_per_visit < 1) throw ConfigError("fl.rounds_per_visit must be >= 1");
  if (!(round_compute_s >= 0.0)) throw ConfigError("fl.round_compute_s must be >= 0");
  if (!(bandwidth_mbps > 0.0)) throw ConfigError("fl.bandwidth_mbps must be > 0");
}

mobility::SpeedDistribution SimConfig::speed_distribution() const {
  return {speed_mu, speed_sigma, speed_min.value_or(speed_mu - 10.0), speed_max.value_or(speed_mu + 10.0)};
}

mobility::HighwayTopology SimConfig::topology() const {
  return mobility::HighwayTopology::contiguous(num_rsus, coverage_length);
}

bool SimConfig::has_scheme(Scheme s) const {
  for (Scheme x : schemes)
    if (x == s) return true;
  return false;
}

void SimConfig::validate() const {
  speed_distribution().validate();
  topology().validate();
  if (!(dt > 0.0)) throw ConfigError("sim.dt must be > 0");
  if (!(duration >= 0.0)) throw ConfigError("sim.duration must be >= 0");
  if (schemes.empty()) throw ConfigError("sim.schemes must name at least one scheme");
  if (!data_path.empty() && !std::filesystem::exists(data_path))
    throw ConfigError("data.path '" + data_path + "' does not exist");
  if (num_vehicles < 1) throw ConfigError("data.num_vehicles must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("data.split_ratio must be in (0, 1)");
  if (subsample_users < 0) throw ConfigError("data.subsample_users must be >= 0");
  if (!(public_fraction > 0.0 && public_fraction < 1.0)) throw ConfigError("data.public_fraction must be in (0, 1)");
  if (codec.latent_dim < 1 || codec.hidden < 1) throw ConfigError("codec dimensions must be >= 1");
  if (!(codec.lr > 0.0)) throw ConfigError("codec.lr must be > 0");
  if (codec.epochs < 0 || codec.finetune_epochs < 0) throw ConfigError("codec epochs must be >= 0");
  if (codec.batch < 1) throw ConfigError("codec.batch must be >= 1");
  if (!(codec.unrated_weight >= 0.0)) throw ConfigError("codec.unrated_weight must be >= 0");
  if (diffusion_steps < 1) throw ConfigError("ldpm.T must be >= 1");
  protocol.distill.validate();
  if (protocol.samples < 1) throw ConfigError("ldpm.F must be >= 1");
  if (!(protocol.train.lr > 0.0)) throw ConfigError("ldpm.lr must be > 0");
  if (protocol.train.episodes < 0) throw ConfigError("ldpm.episodes must be >= 0");
  if (protocol.train.batch < 1) throw ConfigError("ldpm.batch must be >= 1");
  if (protocol.neighbors < 0) throw ConfigError("fd.neighbors must be >= 0");
  if (!(protocol.visit_seconds >= 0.0)) throw ConfigError("compute.visit_seconds must be >= 0");
  if (!(kc_sync_period > 0.0)) throw ConfigError("kc.sync_period must be > 0");
  if (capacities.empty()) throw ConfigError("cache.capacity_n must list at least one capacity");
  for (int n : capacities)
    if (n < 1) throw ConfigError("cache.capacity_n entries must be >= 1");
  if (list_length < 0) throw ConfigError("cache.list_m must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("cache.eta must be > 0");
  latency.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("baseline.tau must be in [0, 1]");
  fl.validate();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key + ": value out of range");
  return static_cast<int>(x);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(SimConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;
};

#define VEC_DOUBLE(KEY, MEMBER)                                                                          \
  Field {                                                                                                \
    KEY, [](SimConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); },   \
        [](const SimConfig& c) { return fmt_double(c.MEMBER); }                                         \
  }
#define VEC_INT(KEY, MEMBER)                                                                          \
  Field {                                                                                             \
    KEY, [](SimConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_int(k, v); },   \
        [](const SimConfig& c) { return std::to_string(c.MEMBER); }                                  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      VEC_DOUBLE("mobility.mu", speed_mu),
      VEC_DOUBLE("mobility.sigma", speed_sigma),
      Field{"mobility.v_min",
            [](SimConfig& c, const std::string& k, const std::string& v) {
              if (v == "auto") c.speed_min.reset();
              else c.speed_min = to_double(k, v);
            },
            [](const SimConfig& c) { return c.speed_min ? fmt_double(*c.speed_min) : std::string("auto"); }},
      Field{"mobility.v_max",
            [](SimConfig& c, const std::string& k, const std::string& v) {
              if (v == "auto") c.speed_max.reset();
              else c.speed_max = to_double(k, v);
            },
            [](const SimConfig& c) { return c.speed_max ? fmt_double(*c.speed_max) : std::string("auto"); }},
      VEC_INT("topology.num_rsus", num_rsus),
      VEC_DOUBLE("topology.coverage_length", coverage_length),
      VEC_DOUBLE("sim.dt", dt),
      Field{"sim.seed",
            [](SimConfig& c, const std::string& k, const std::string& v) {
              const long long s = to_integer(k, v);
              if (s < 0) throw ConfigError(k + ": seed must be >= 0");
              c.seed = static_cast<std::uint64_t>(s);
            },
            [](const SimConfig& c) { return std::to_string(c.seed); }},
      VEC_DOUBLE("sim.duration", duration),
      Field{"sim.schemes",
            [](SimConfig& c, const std::string&, const std::string& v) {
              c.schemes.clear();
              if (v == "all") {
                c.schemes.assign(std::begin(kAllSchemes), std::end(kAllSchemes));
                return;
              }
              for (const auto& name : split_list(v)) c.schemes.push_back(parse_scheme(name));
            },
            [](const SimConfig& c) {
              std::string out;
              for (Scheme s : c.schemes) out += (out.empty() ? "" : ",") + std::string(to_string(s));
              return out;
            }},
      Field{"sim.trace_path", [](SimConfig& c, const std::string&, const std::string& v) { c.trace_path = v; },
            [](const SimConfig& c) { return c.trace_path; }},
      Field{"data.path", [](SimConfig& c, const std::string&, const std::string& v) { c.data_path = v; },
            [](const SimConfig& c) { return c.data_path; }},
      VEC_INT("data.num_vehicles", num_vehicles),
      VEC_DOUBLE("data.split_ratio", split_ratio),
      VEC_INT("data.subsample_users", subsample_users),
      VEC_DOUBLE("data.public_fraction", public_fraction),
      VEC_INT("codec.latent_dim", codec.latent_dim),
      VEC_INT("codec.hidden", codec.hidden),
      VEC_DOUBLE("codec.lr", codec.lr),
      VEC_INT("codec.epochs", codec.epochs),
      VEC_INT("codec.batch", codec.batch),
      VEC_INT("codec.finetune_epochs", codec.finetune_epochs),
      VEC_DOUBLE("codec.unrated_weight", codec.unrated_weight),
      VEC_INT("ldpm.T", diffusion_steps),
      VEC_DOUBLE("ldpm.lambda", protocol.distill.lambda),
      VEC_DOUBLE("ldpm.delta", protocol.distill.delta),
      VEC_INT("ldpm.F", protocol.samples),
      VEC_DOUBLE("ldpm.lr", protocol.train.lr),
      VEC_INT("ldpm.episodes", protocol.train.episodes),
      VEC_INT("ldpm.batch", protocol.train.batch),
      VEC_INT("fd.neighbors", protocol.neighbors),
      VEC_DOUBLE("fd.gamma", protocol.gamma),
      VEC_DOUBLE("compute.visit_seconds", protocol.visit_seconds),
      VEC_DOUBLE("kc.sync_period", kc_sync_period),
      Field{"cache.capacity_n",
            [](SimConfig& c, const std::string& k, const std::string& v) {
              c.capacities.clear();
              for (const auto& item : split_list(v)) c.capacities.push_back(to_int(k, item));
            },
            [](const SimConfig& c) {
              std::string out;
              for (int n : c.capacities) out += (out.empty() ? "" : ",") + std::to_string(n);
              return out;
            }},
      VEC_INT("cache.list_m", list_length),
      VEC_DOUBLE("cache.eta", eta),
      Field{"latency.hit_ms",
            [](SimConfig& c, const std::string& k, const std::string& v) { c.latency.hit_latency = to_double(k, v) / 1000.0; },
            [](const SimConfig& c) { return fmt_double(c.latency.hit_latency * 1000.0); }},
      Field{"latency.miss_ms",
            [](SimConfig& c, const std::string& k, const std::string& v) { c.latency.miss_latency = to_double(k, v) / 1000.0; },
            [](const SimConfig& c) { return fmt_double(c.latency.miss_latency * 1000.0); }},
      VEC_DOUBLE("baseline.tau", tau),
      Field{"fl.param_count",
            [](SimConfig& c, const std::string& k, const std::string& v) {
              const long long n = to_integer(k, v);
              if (n < 0) throw ConfigError(k + ": must be >= 0");
              c.fl.param_count = static_cast<std::uint64_t>(n);
            },
            [](const SimConfig& c) { return std::to_string(c.fl.param_count); }},
      VEC_INT("fl.rounds_per_visit", fl.rounds_per_visit),
      VEC_DOUBLE("fl.round_compute_s", fl.round_compute_s),
      VEC_DOUBLE("fl.bandwidth_mbps", fl.bandwidth_mbps),
  };
  return table;
}

#undef VEC_DOUBLE
#undef VEC_INT

}  // namespace

void apply_setting(SimConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(SimConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

SimConfig parse_config(std::istream& in, SimConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

SimConfig load_config(const std::string& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, std::move(base));
}

std::string dump_config(const SimConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

SimConfig preset(const std::string& name) {
  SimConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.subsample_users = 0;
    c.capacities = {150, 200, 250, 300, 350, 400, 450, 500};
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace vecache::harness
