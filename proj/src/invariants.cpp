#include "vecache/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vecache::harness {

namespace {

std::string ledger_text(const Metrics& m) {
  std::ostringstream out;
  for (const auto& c : m.cells) {
    out << "# " << to_string(c.scheme) << ' ' << c.capacity << '\n';
    c.ledger.write_ndjson(out);
  }
  return out.str();
}

}  // namespace

std::vector<InvariantResult> check_run(const SimConfig& cfg, const SimulationResult& result) {
  std::vector<InvariantResult> out;
  const auto& m = result.metrics;

  {
    InvariantResult r{"requests_conserved", true, ""};
    for (const auto& c : m.cells) {
      if (c.counters.total() != m.requests) {
        r.passed = false;
        r.detail = std::string(to_string(c.scheme)) + " served " + std::to_string(c.counters.total()) + " of " +
                   std::to_string(m.requests);
      }
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"latency_identity", true, ""};
    for (const auto& c : m.cells) {
      if (c.counters.total() == 0) continue;
      const double n = static_cast<double>(c.counters.total());
      const double expect = (static_cast<double>(c.counters.hits) * cfg.latency.hit_latency +
                             static_cast<double>(c.counters.misses) * cfg.latency.miss_latency) / n;
      if (std::abs(c.counters.mean_latency() - expect) > 1e-12) {
        r.passed = false;
        r.detail = to_string(c.scheme);
      }
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"ledger_closure", true, ""};
    for (const auto& c : m.cells) {
      std::uint64_t up = 0, down = 0;
      double last = -1.0;
      for (const auto& msg : c.ledger.messages()) {
        (fd::is_uplink(msg.type) ? up : down) += msg.bytes;
        if (msg.time < last) {
          r.passed = false;
          r.detail = std::string(to_string(c.scheme)) + ": ledger not time ordered";
        }
        last = msg.time;
      }
      if (up != c.ledger.uplink_bytes() || down != c.ledger.downlink_bytes()) {
        r.passed = false;
        r.detail = std::string(to_string(c.scheme)) + ": counters differ from message replay";
      }
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"oracle_dominates", true, ""};
    if (cfg.has_scheme(Scheme::Oracle)) {
      for (int n : cfg.capacities) {
        const auto* o = m.find(Scheme::Oracle, n);
        for (const auto& c : m.cells) {
          if (c.capacity == n && c.counters.hits > o->counters.hits) {
            r.passed = false;
            r.detail = std::string(to_string(c.scheme)) + " beats oracle at N=" + std::to_string(n);
          }
        }
      }
    }
    out.push_back(r);
  }
  {
    // Oracle, greedy and random caches are nested in N by construction.
    InvariantResult r{"capacity_monotone", true, ""};
    for (Scheme s : {Scheme::Oracle, Scheme::NTauGreedy, Scheme::Random}) {
      if (!cfg.has_scheme(s)) continue;
      std::vector<int> caps = cfg.capacities;
      std::sort(caps.begin(), caps.end());
      for (std::size_t i = 1; i < caps.size(); ++i) {
        if (m.find(s, caps[i])->counters.hits < m.find(s, caps[i - 1])->counters.hits) {
          r.passed = false;
          r.detail = std::string(to_string(s)) + " loses hits between N=" + std::to_string(caps[i - 1]) + " and " +
                     std::to_string(caps[i]);
        }
      }
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"report_round_trip", true, ""};
    for (auto f : {ReportFormat::Csv, ReportFormat::Json}) {
      if (!(parse_report(emit_report(result.report, f), f) == result.report)) {
        r.passed = false;
        r.detail = f == ReportFormat::Csv ? "csv" : "json";
      }
    }
    out.push_back(r);
  }
  return out;
}

std::vector<InvariantResult> validate_suite(const SimConfig& cfg) {
  const auto first = run_simulation(cfg);
  auto out = check_run(cfg, first);
  const auto second = run_simulation(cfg);
  InvariantResult r{"deterministic_replay", true, ""};
  if (emit_report(first.report, ReportFormat::Csv) != emit_report(second.report, ReportFormat::Csv)) {
    r.passed = false;
    r.detail = "reports differ";
  } else if (ledger_text(first.metrics) != ledger_text(second.metrics)) {
    r.passed = false;
    r.detail = "ledgers differ";
  }
  out.push_back(r);
  return out;
}

SimConfig validation_preset() {
  SimConfig c;
  c.subsample_users = 240;
  c.num_vehicles = 20;
  c.duration = 200.0;
  c.capacities = {150, 300, 500};
  c.protocol.train.episodes = 100;
  c.protocol.samples = 200;
  c.codec.epochs = 20;
  return c;
}

}  // namespace vecache::harness
