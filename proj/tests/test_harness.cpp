#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "vecache/baselines.hpp"
#include "vecache/error.hpp"
#include "vecache/invariants.hpp"
#include "vecache/simulation.hpp"

using namespace vecache;
using namespace vecache::harness;

namespace {

// Best achievable hits for a static N-subset, by enumerating every subset.
std::uint64_t best_static_hits(const ContentCounts& counts, int n) {
  const int k = static_cast<int>(counts.size());
  std::vector<int> pick(static_cast<std::size_t>(n));
  std::iota(pick.begin(), pick.end(), 0);
  std::uint64_t best = 0;
  while (true) {
    std::uint64_t h = 0;
    for (int i : pick) h += counts[static_cast<std::size_t>(i)];
    best = std::max(best, h);
    int j = n - 1;
    while (j >= 0 && pick[static_cast<std::size_t>(j)] == k - n + j) --j;
    if (j < 0) break;
    ++pick[static_cast<std::size_t>(j)];
    for (int m = j + 1; m < n; ++m) pick[static_cast<std::size_t>(m)] = pick[static_cast<std::size_t>(m - 1)] + 1;
  }
  return best;
}

std::uint64_t hits_of(const caching::CacheState& c, const ContentCounts& counts) {
  std::uint64_t h = 0;
  for (auto id : c.contents()) h += counts[id - 1];
  return h;
}

SimConfig tiny_config() {
  SimConfig c = validation_preset();
  c.subsample_users = 120;
  c.num_vehicles = 10;
  c.duration = 120.0;
  c.capacities = {100, 300};
  c.protocol.train.episodes = 20;
  c.protocol.samples = 50;
  c.codec.epochs = 5;
  return c;
}

}  // namespace

TEST_CASE("config: parse, override, dump round trip") {
  std::istringstream in("# comment\nmobility.mu = 20\n\ncache.capacity_n = 150, 300\nsim.schemes = proposed, oracle\n");
  SimConfig c = parse_config(in);
  CHECK(c.speed_mu == 20.0);
  CHECK(c.capacities == std::vector<int>{150, 300});
  CHECK(c.schemes == std::vector<Scheme>{Scheme::Proposed, Scheme::Oracle});
  CHECK(c.speed_distribution().v_min == 10.0);
  CHECK(c.speed_distribution().v_max == 30.0);

  apply_override(c, "ldpm.lambda=0.25");
  apply_override(c, "fd.gamma = 0.7");
  CHECK(c.protocol.distill.lambda == 0.25);
  CHECK(c.protocol.gamma == 0.7);

  const std::string text = dump_config(c);
  std::istringstream again(text);
  CHECK(dump_config(parse_config(again)) == text);

  CHECK_THROWS_AS(apply_override(c, "no.such.key=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "mobility.mu=fast"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "mobility.mu"), ConfigError);
  CHECK_THROWS_AS(preset("nonsense"), ConfigError);
  CHECK(preset("paper").capacities.size() == 8);
}

TEST_CASE("config validation catches infeasible settings") {
  SimConfig c;
  c.speed_sigma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.capacities = {0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  SimConfig too_many = tiny_config();
  too_many.num_vehicles = 500;
  CHECK_THROWS_AS(run_simulation(too_many), ConfigError);
}

TEST_CASE("oracle policy: closed cases") {
  ContentCounts one(10, 0);
  one[6] = 40;
  const auto c = oracle_policy(one, 3, 0, 0.0);
  CHECK(c.contents() == std::vector<caching::ContentId>{1, 2, 7});

  ContentCounts few(10, 0);
  few[1] = 3, few[4] = 1, few[8] = 2;
  const auto all = oracle_policy(few, 3, 0, 0.0);
  CHECK(hits_of(all, few) == 6);
}

TEST_CASE("oracle policy matches subset enumeration on randomized 20-content fixtures") {
  auto rng = make_stream(99, {});
  std::uniform_int_distribution<int> cnt(0, 6), cap(1, 5);
  for (int trial = 0; trial < 150; ++trial) {
    ContentCounts counts(20);
    for (auto& x : counts) x = static_cast<std::uint32_t>(cnt(rng));
    const int n = cap(rng);
    const auto c = oracle_policy(counts, n, 0, 0.0);
    CHECK(c.size() == static_cast<std::size_t>(n));
    CHECK(hits_of(c, counts) == best_static_hits(counts, n));
  }
}

TEST_CASE("n-tau-greedy: tau extremes and the random-branch frequency") {
  ContentCounts counts(1000, 1);
  for (int i = 990; i < 1000; ++i) counts[static_cast<std::size_t>(i)] = 50;
  const auto top = top_by_counts(counts, 10);
  std::vector<caching::ContentId> top_sorted = top;
  std::sort(top_sorted.begin(), top_sorted.end());

  auto rng = make_stream(1, {});
  for (int i = 0; i < 100; ++i) CHECK(n_tau_greedy_policy(counts, 10, 0.0, rng, 0, 0.0).contents() == top_sorted);

  int random_branch = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    if (n_tau_greedy_policy(counts, 10, 0.2, rng, 0, 0.0).contents() != top_sorted) ++random_branch;
  CHECK(std::abs(static_cast<double>(random_branch) / draws - 0.2) < 0.01);

  // tau = 1: every content equally likely to be cached
  ContentCounts small(20, 0);
  small[0] = 100;
  std::vector<int> seen(20, 0);
  for (int i = 0; i < 4000; ++i) {
    const auto cache = n_tau_greedy_policy(small, 5, 1.0, rng, 0, 0.0);
    for (auto id : cache.contents()) ++seen[id - 1];
  }
  for (int s : seen) CHECK(std::abs(s / 4000.0 - 0.25) < 0.03);
}

TEST_CASE("random policy nests in capacity under a replayed stream") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto a = make_stream(seed, {});
    auto b = make_stream(seed, {});
    const auto small = random_policy(200, 30, a, 0, 0.0);
    const auto large = random_policy(200, 90, b, 0, 0.0);
    CHECK(std::includes(large.contents().begin(), large.contents().end(), small.contents().begin(),
                        small.contents().end()));
  }
}

TEST_CASE("parameter exchange: one full round") {
  FlConfig cfg;
  cfg.rounds_per_visit = 1;
  const std::vector<FlVisit> v{{0, 0, 0.0, 1000.0}};
  for (auto kind : {FlKind::FedAvg, FlKind::AsyFed}) {
    const auto out = parameter_exchange_baseline(kind, v, cfg, 1000.0);
    CHECK(out.uplink_bytes == 3080000);
    CHECK(out.downlink_bytes == 3080000);
    CHECK(out.completed_rounds[0] == 1);
    CHECK(out.completion_fraction(0, 1) == 1.0);
    REQUIRE(out.messages.size() == 2);
    CHECK(out.messages[0].type == fd::MessageType::ModelDown);
    CHECK(out.messages[1].time == doctest::Approx(cfg.round_seconds()));
  }
  CHECK(cfg.round_seconds() == doctest::Approx(3.0 + 2.0 * 8.0 * 3080000.0 / 10e6));
}

TEST_CASE("parameter exchange: early departure and failed rounds") {
  FlConfig cfg;
  const double rt = cfg.round_seconds();
  const std::vector<FlVisit> leaver{{0, 0, 0.0, 0.5 * rt}};
  for (auto kind : {FlKind::FedAvg, FlKind::AsyFed}) {
    const auto out = parameter_exchange_baseline(kind, leaver, cfg, 1000.0);
    CHECK(out.completed_rounds[0] == 0);
    CHECK(out.uplink_bytes == 0);
    CHECK(out.downlink_bytes == fd::wire::model_bytes(cfg.param_count));
  }

  // FedAvg: a straggler sinks the shared round; the stayer still uploads
  const std::vector<FlVisit> pair{{0, 0, 0.0, 100.0}, {1, 0, 0.0, 0.5 * rt}};
  const auto fed = parameter_exchange_baseline(FlKind::FedAvg, pair, cfg, 1000.0);
  CHECK(fed.completed_rounds[0] == cfg.rounds_per_visit);
  CHECK(fed.completed_rounds[1] == 0);
  const auto first_up = std::find_if(fed.messages.begin(), fed.messages.end(),
                                     [](const fd::Message& m) { return m.type == fd::MessageType::ModelUp; });
  REQUIRE(first_up != fed.messages.end());
  CHECK(first_up->time == doctest::Approx(rt));
  // round 1 failed, so vehicle 0 needs one extra round
  std::size_t ups = 0;
  for (const auto& m : fed.messages) ups += m.type == fd::MessageType::ModelUp && m.src == fd::vehicle_endpoint(0);
  CHECK(ups == static_cast<std::size_t>(cfg.rounds_per_visit + 1));

  // AsyFed runs back to back and is not held up by others
  const auto asy = parameter_exchange_baseline(FlKind::AsyFed, pair, cfg, 1000.0);
  CHECK(asy.completed_rounds[0] == cfg.rounds_per_visit);

  // a visit shorter than the schedule completes a fraction
  const std::vector<FlVisit> partial{{0, 0, 0.0, 2.5 * rt}};
  const auto p = parameter_exchange_baseline(FlKind::AsyFed, partial, cfg, 1000.0);
  CHECK(p.completed_rounds[0] == 2);
  CHECK(p.completion_fraction(0, 4) == 0.5);
  for (const auto& out : {fed, asy, p}) {
    std::uint64_t up = 0, down = 0;
    for (const auto& m : out.messages) (fd::is_uplink(m.type) ? up : down) += m.bytes;
    CHECK(up == out.uplink_bytes);
    CHECK(down == out.downlink_bytes);
  }
}

TEST_CASE("report: round trips, empty header, MB conversion, parse errors") {
  Report r;
  r.rows.push_back({"proposed", 150, 25.0, 45.3212, 56.1234, 0.47, 0.01, 1});
  r.rows.push_back({"fedavg", 500, 17.5, 38.45, 61.2, 555.6, 901.82, 3});
  for (auto f : {ReportFormat::Csv, ReportFormat::Json}) CHECK(parse_report(emit_report(r, f), f) == r);
  CHECK(emit_report(Report{}, ReportFormat::Csv) == std::string(kCsvHeader) + "\n");
  CHECK(parse_report(emit_report(Report{}, ReportFormat::Csv), ReportFormat::Csv).rows.empty());

  CHECK(to_mb(1048576) == 1.0);
  CHECK(to_mb(3080000) == 2.94);
  CHECK(to_mb(0) == 0.0);
  CHECK(to_mb(5242) == 0.0);
  CHECK(to_mb(5243) == 0.01);

  try {
    parse_report(std::string(kCsvHeader) + "\nproposed,150,25,1,2,3,4,1\nbad,row\n", ReportFormat::Csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_report("{\"rows\": [{}]}", ReportFormat::Json), ParseError);
  CHECK_THROWS_AS(parse_format("xml"), ConfigError);
}

TEST_CASE("zero duration gives zero requests and 0% rows") {
  SimConfig c = tiny_config();
  c.duration = 0.0;
  const auto r = run_simulation(c);
  CHECK(r.metrics.requests == 0);
  REQUIRE(r.report.rows.size() == std::size(kAllSchemes) * c.capacities.size());
  for (const auto& row : r.report.rows) {
    CHECK(row.hit_pct == 0.0);
    CHECK(row.mean_latency_ms == 0.0);
  }
}

TEST_CASE("invariant suite passes on a small run") {
  const SimConfig c = tiny_config();
  const auto results = validate_suite(c);
  std::set<std::string> names;
  for (const auto& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.passed);
    names.insert(r.name);
  }
  CHECK(names.count("deterministic_replay") == 1);
  CHECK(names.count("ledger_closure") == 1);
  CHECK(names.count("requests_conserved") == 1);
}

TEST_CASE("every cell serves every request and overhead closes against the ledger") {
  const SimConfig c = tiny_config();
  const auto r = run_simulation(c);
  REQUIRE(r.metrics.requests > 0);
  for (const auto& cell : r.metrics.cells) {
    CHECK(cell.counters.total() == r.metrics.requests);
    std::uint64_t replay = 0;
    for (const auto& m : cell.ledger.messages()) replay += m.bytes;
    CHECK(replay == cell.ledger.total_bytes());
    const auto* row = r.report.find(to_string(cell.scheme), cell.capacity);
    REQUIRE(row != nullptr);
    CHECK(row->uplink_mb == to_mb(cell.ledger.uplink_bytes()));
    CHECK(row->downlink_mb == to_mb(cell.ledger.downlink_bytes()));
  }
  const auto* oracle = r.report.find("oracle", 300);
  for (const auto& row : r.report.rows)
    if (row.capacity == 300) CHECK(row.hit_pct <= oracle->hit_pct);
}
