#include "vecache/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "vecache/baselines.hpp"
#include "vecache/error.hpp"

namespace vecache::harness {

const CellMetrics* Metrics::find(Scheme scheme, int capacity) const {
  for (const auto& c : cells)
    if (c.scheme == scheme && c.capacity == capacity) return &c;
  return nullptr;
}

World build_world(const SimConfig& cfg) {
  cfg.validate();
  dataset::RatingMatrix ratings;
  if (!cfg.data_path.empty()) {
    std::ifstream in(cfg.data_path);
    if (!in) throw ConfigError("cannot open data.path '" + cfg.data_path + "'");
    ratings = dataset::load_ratings(in);
    if (cfg.subsample_users > 0) {
      Rng rng = make_stream(cfg.seed, {stream::kSubsample});
      ratings = dataset::subsample_users(ratings, static_cast<std::size_t>(cfg.subsample_users), rng);
    }
  } else {
    dataset::SyntheticOptions opts;
    opts.num_users = cfg.subsample_users > 0 ? cfg.subsample_users : 6040;
    ratings = dataset::synthesize_ratings(opts, cfg.seed);
  }

  World w;
  w.num_contents = ratings.num_contents;
  Rng part = make_stream(cfg.seed, {stream::kPartition});
  auto [pub, rest] = dataset::split_public(ratings, cfg.public_fraction, part);
  w.public_data = dataset::normalized_columns(ratings, pub);
  w.locals = dataset::partition_users(ratings.restrict_to(rest), cfg.num_vehicles, cfg.split_ratio, part);

  const auto topo = cfg.topology();
  const auto dist = cfg.speed_distribution();
  Rng arrivals = make_stream(cfg.seed, {stream::kArrivals});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& local : w.locals) {
    const double arrival = cfg.duration * unit(arrivals);
    Rng speeds = make_stream(cfg.seed, {stream::kSpeeds, static_cast<std::uint64_t>(local.vehicle_id)});
    w.trips.push_back(mobility::build_trip(local.vehicle_id, arrival, cfg.duration, cfg.dt, topo, dist, speeds));
  }
  w.trace = dataset::generate_requests(w.locals, w.trips, cfg.seed);
  return w;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Visit {
  int vehicle = 0;
  int interval = 0;
  int rsu = 0;
  double entry = 0.0;
  double exit = kInf;      // exit event time; infinite when still covered at the horizon
  double residence = 0.0;  // full physical stay, coverage_length / speed
  bool completes = false;  // local training finishes inside both the stay and the horizon
  const mobility::CoverageInterval* iv = nullptr;
};

// Equal-time order: a finishing visit uploads before its vehicle leaves; a
// departure frees the RSU before a newcomer arrives; requests see the result.
enum class EventKind { Completion = 0, Exit = 1, Merge = 2, Entry = 3, Request = 4 };

struct Event {
  double time;
  EventKind kind;
  int vehicle;
  std::size_t index;  // visit, merge or request index
};

struct Present {
  std::size_t visit = 0;
  std::vector<caching::ContentId> ranking;  // current uploaded list, full length
};

struct Pending {
  fd::KIPair ki;
  std::vector<caching::ContentId> ranking;
};

std::uint64_t kc_bytes(const fd::KnowledgeCache& kc, int d) {
  return kc.hi().size() * fd::wire::hi_bytes(d) + kc.ki().size() * fd::wire::ki_bytes(d);
}

bool is_list_scheme(Scheme s) { return s == Scheme::Proposed || s == Scheme::FedAvg || s == Scheme::AsyFed; }

}  // namespace

SimulationResult run_simulation(const SimConfig& cfg) {
  const World world = build_world(cfg);
  const int K = world.num_contents;
  const int num_rsus = cfg.num_rsus;
  const double B = cfg.coverage_length;
  const bool learn = cfg.has_scheme(Scheme::Proposed) || cfg.has_scheme(Scheme::FedAvg) || cfg.has_scheme(Scheme::AsyFed);
  const double budget = cfg.protocol.visit_seconds;
  const int d = cfg.codec.latent_dim;

  // Visits and the event queue.
  std::vector<Visit> visits;
  for (const auto& trip : world.trips) {
    for (std::size_t i = 0; i < trip.size(); ++i) {
      const auto& iv = trip[i];
      Visit x;
      x.vehicle = world.locals[static_cast<std::size_t>(&trip - world.trips.data())].vehicle_id;
      x.interval = static_cast<int>(i);
      x.rsu = iv.rsu;
      x.entry = iv.entry;
      x.exit = iv.completed ? iv.exit : kInf;
      x.residence = B / iv.speed;
      x.completes = learn && x.residence >= budget && iv.entry + budget < cfg.duration;
      x.iv = &iv;
      visits.push_back(x);
    }
  }

  std::vector<Event> events;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const auto& x = visits[i];
    events.push_back({x.entry, EventKind::Entry, x.vehicle, i});
    if (x.completes) events.push_back({x.entry + budget, EventKind::Completion, x.vehicle, i});
    if (x.exit < cfg.duration) events.push_back({x.exit, EventKind::Exit, x.vehicle, i});
  }
  if (learn) {
    for (std::size_t k = 1; static_cast<double>(k) * cfg.kc_sync_period < cfg.duration; ++k)
      events.push_back({static_cast<double>(k) * cfg.kc_sync_period, EventKind::Merge, -1, k});
  }
  const auto& requests = world.trace.events;
  for (std::size_t j = 0; j < requests.size(); ++j)
    events.push_back({requests[j].time, EventKind::Request, requests[j].vehicle_id, j});
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.vehicle != b.vehicle) return a.vehicle < b.vehicle;
    return a.index < b.index;
  });

  // Refresh triggers per RSU (entries and completions) and each RSU's requests,
  // both in processing order; the oracle looks one trigger window ahead.
  std::vector<std::vector<double>> triggers(static_cast<std::size_t>(num_rsus));
  std::vector<std::vector<std::size_t>> rsu_requests(static_cast<std::size_t>(num_rsus));
  for (const auto& ev : events) {
    if (ev.kind == EventKind::Entry || ev.kind == EventKind::Completion)
      triggers[static_cast<std::size_t>(visits[ev.index].rsu)].push_back(ev.time);
    else if (ev.kind == EventKind::Request)
      rsu_requests[static_cast<std::size_t>(requests[ev.index].rsu)].push_back(ev.index);
  }
  std::vector<std::size_t> trigger_count(static_cast<std::size_t>(num_rsus), 0);

  Metrics metrics;
  metrics.requests = requests.size();
  metrics.dropped_requests = world.trace.dropped;

  // Learning state.
  const auto sched = ldpm::build_schedule(cfg.diffusion_steps);
  std::vector<std::optional<fd::VehicleModel>> models(world.locals.size());
  std::vector<std::vector<caching::ContentId>> prior(world.locals.size());
  if (learn) {
    Rng codec_rng = make_stream(cfg.seed, {stream::kCodec});
    const auto base = codec::pretrain_codec(world.public_data, cfg.codec, codec_rng).params;
    std::vector<double> loss_sum;
    int trained = 0;
    for (std::size_t v = 0; v < world.locals.size(); ++v) {
      if (world.trips[v].empty()) continue;
      const auto& local = world.locals[v];
      models[v] = fd::bootstrap_vehicle(local.vehicle_id, base, local.train, cfg.codec, cfg.protocol, sched, cfg.seed);
      const auto& losses = models[v]->loss_trajectory;
      if (loss_sum.size() < losses.size()) loss_sum.resize(losses.size(), 0.0);
      for (std::size_t e = 0; e < losses.size(); ++e) loss_sum[e] += losses[e];
      ++trained;

      // Fallback list of an untrained parameter-exchange vehicle: what its own users rated most.
      Eigen::VectorXd counts = (local.train.array() > 0.0).cast<double>().rowwise().sum();
      prior[v] = caching::rank_contents(std::span<const double>(counts.data(), static_cast<std::size_t>(counts.size())));
    }
    for (double& x : loss_sum) x /= std::max(trained, 1);
    metrics.loss_trajectory = std::move(loss_sum);
  }

  // Parameter-exchange round outcomes and the per-visit list choice.
  std::map<Scheme, FlOutcome> fl;
  std::map<Scheme, std::vector<char>> use_true_list;
  metrics.fl_rounds_required = cfg.fl.rounds_per_visit * static_cast<int>(visits.size());
  for (Scheme s : {Scheme::FedAvg, Scheme::AsyFed}) {
    if (!cfg.has_scheme(s)) continue;
    std::vector<FlVisit> fv;
    for (const auto& x : visits) fv.push_back({x.vehicle, x.rsu, x.entry, x.entry + x.residence});
    auto outcome = parameter_exchange_baseline(s == Scheme::FedAvg ? FlKind::FedAvg : FlKind::AsyFed, fv, cfg.fl,
                                               cfg.duration);
    auto& choice = use_true_list[s];
    int done = 0;
    for (std::size_t i = 0; i < visits.size(); ++i) {
      Rng u_rng = make_stream(cfg.seed, {stream::kListChoice, static_cast<std::uint64_t>(visits[i].vehicle),
                                         static_cast<std::uint64_t>(visits[i].interval)});
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(u_rng);
      choice.push_back(u < outcome.completion_fraction(i, cfg.fl.rounds_per_visit) ? 1 : 0);
      done += outcome.completed_rounds[i];
    }
    metrics.fl_rounds_completed[s] = done;
    fl.emplace(s, std::move(outcome));
  }

  // Cells.
  for (Scheme s : cfg.schemes)
    for (int n : cfg.capacities) metrics.cells.push_back(CellMetrics{s, n, {}, {}});
  const std::size_t num_cells = metrics.cells.size();
  std::vector<std::vector<caching::CacheState>> caches(num_cells);
  for (auto& row : caches)
    for (int r = 0; r < num_rsus; ++r) row.emplace_back(r, K);
  std::vector<std::vector<fd::Message>> cell_messages(num_cells);

  std::vector<fd::KnowledgeCache> kcs;
  for (int r = 0; r < num_rsus; ++r) kcs.emplace_back(r);
  std::vector<std::map<int, Present>> present(static_cast<std::size_t>(num_rsus));
  std::vector<std::optional<Pending>> pending(visits.size());
  std::vector<ContentCounts> observed(static_cast<std::size_t>(num_rsus), ContentCounts(static_cast<std::size_t>(K), 0));

  auto record_protocol = [&](const fd::Message& m) {
    for (std::size_t c = 0; c < num_cells; ++c)
      if (metrics.cells[c].scheme == Scheme::Proposed) cell_messages[c].push_back(m);
  };
  auto record_lists = [&](double t, int vehicle, int rsu) {
    for (std::size_t c = 0; c < num_cells; ++c) {
      if (!is_list_scheme(metrics.cells[c].scheme)) continue;
      const int m = std::min(cfg.list_length_for(metrics.cells[c].capacity), K);
      cell_messages[c].push_back(fd::Message{t, fd::vehicle_endpoint(vehicle), fd::rsu_endpoint(rsu),
                                             fd::MessageType::RecList, fd::wire::rec_list_bytes(static_cast<std::size_t>(m))});
    }
  };

  auto refresh = [&](int rsu, double now) {
    const auto r = static_cast<std::size_t>(rsu);
    const std::size_t index = trigger_count[r]++;
    const double window_end = index + 1 < triggers[r].size() ? triggers[r][index + 1] : kInf;

    std::optional<ContentCounts> future;
    const Rng greedy_rng = make_stream(cfg.seed, {stream::kGreedy, r, index});
    const Rng random_rng = make_stream(cfg.seed, {stream::kRandomCache, r, index});

    for (std::size_t c = 0; c < num_cells; ++c) {
      const auto& cell = metrics.cells[c];
      auto& cache = caches[c][r];
      switch (cell.scheme) {
        case Scheme::Proposed:
        case Scheme::FedAvg:
        case Scheme::AsyFed: {
          const auto m = static_cast<std::size_t>(std::min(cfg.list_length_for(cell.capacity), K));
          std::vector<caching::ActiveVehicle> active;
          for (const auto& [vehicle, p] : present[r]) {
            const auto& x = visits[p.visit];
            const bool true_list = cell.scheme == Scheme::Proposed || use_true_list.at(cell.scheme)[p.visit];
            const auto& list = true_list ? p.ranking : prior[static_cast<std::size_t>(vehicle)];
            active.push_back({std::span<const caching::ContentId>(list.data(), m), x.iv->position_at(now), x.iv->speed});
          }
          const auto scores = caching::replacement_scores(active, cfg.eta, B, K);
          caching::update_cache(cache, scores, cell.capacity, now);
          break;
        }
        case Scheme::Oracle: {
          if (!future) {
            future.emplace(static_cast<std::size_t>(K), 0);
            const auto& ids = rsu_requests[r];
            auto it = std::lower_bound(ids.begin(), ids.end(), now,
                                       [&](std::size_t j, double t) { return requests[j].time < t; });
            for (; it != ids.end() && requests[*it].time < window_end; ++it) ++(*future)[requests[*it].content - 1];
          }
          cache = oracle_policy(*future, cell.capacity, rsu, now);
          break;
        }
        case Scheme::NTauGreedy: {
          Rng rng = greedy_rng;
          cache = n_tau_greedy_policy(observed[r], cell.capacity, cfg.tau, rng, rsu, now);
          break;
        }
        case Scheme::Random: {
          Rng rng = random_rng;
          cache = random_policy(K, cell.capacity, rng, rsu, now);
          break;
        }
      }
    }
  };

  for (const auto& ev : events) {
    switch (ev.kind) {
      case EventKind::Entry: {
        const auto& x = visits[ev.index];
        const auto v = static_cast<std::size_t>(x.vehicle);
        ++metrics.visits;
        Present p{ev.index, learn ? models[v]->ranking : std::vector<caching::ContentId>{}};
        present[static_cast<std::size_t>(x.rsu)][x.vehicle] = std::move(p);
        if (learn) {
          record_lists(ev.time, x.vehicle, x.rsu);
          // A visit that cannot finish inside the horizon aborts after its HI upload.
          const double residence = x.completes ? x.residence : -1.0;
          auto outcome = fd::begin_visit(*models[v], kcs[static_cast<std::size_t>(x.rsu)], ev.time, residence,
                                         cfg.protocol, sched, cfg.seed);
          for (const auto& m : outcome.messages)
            if (m.type != fd::MessageType::KI) record_protocol(m);
          if (outcome.completed) {
            if (outcome.integrated) ++metrics.visits_distilled;
            pending[ev.index] = Pending{*outcome.ki, models[v]->ranking};
          }
        }
        refresh(x.rsu, ev.time);
        break;
      }
      case EventKind::Completion: {
        const auto& x = visits[ev.index];
        auto& done = pending[ev.index];
        if (!done) throw ContractViolation("completion event without a finished visit");
        kcs[static_cast<std::size_t>(x.rsu)].upsert_ki(done->ki);
        record_protocol(fd::Message{ev.time, fd::vehicle_endpoint(x.vehicle), fd::rsu_endpoint(x.rsu),
                                    fd::MessageType::KI, fd::wire::ki_bytes(d)});
        present[static_cast<std::size_t>(x.rsu)].at(x.vehicle).ranking = std::move(done->ranking);
        done.reset();
        ++metrics.visits_completed;
        record_lists(ev.time, x.vehicle, x.rsu);
        refresh(x.rsu, ev.time);
        break;
      }
      case EventKind::Exit: {
        const auto& x = visits[ev.index];
        present[static_cast<std::size_t>(x.rsu)].erase(x.vehicle);
        break;
      }
      case EventKind::Merge: {
        const auto merged = fd::merge_kc(kcs);
        for (auto& kc : kcs) {
          metrics.backhaul_bytes += kc_bytes(kc, d) + kc_bytes(merged, d);
          kc.replace_entries(merged);
        }
        ++metrics.kc_merges;
        break;
      }
      case EventKind::Request: {
        const auto& q = requests[ev.index];
        const auto r = static_cast<std::size_t>(q.rsu);
        for (std::size_t c = 0; c < num_cells; ++c)
          caching::serve_request(caches[c][r], q.content, cfg.latency, metrics.cells[c].counters);
        ++observed[r][q.content - 1];
        break;
      }
    }
  }

  // Parameter-exchange transfers join the list uploads in time order.
  for (std::size_t c = 0; c < num_cells; ++c) {
    auto& msgs = cell_messages[c];
    auto it = fl.find(metrics.cells[c].scheme);
    if (it != fl.end()) {
      std::vector<fd::Message> merged;
      merged.reserve(msgs.size() + it->second.messages.size());
      std::merge(it->second.messages.begin(), it->second.messages.end(), msgs.begin(), msgs.end(),
                 std::back_inserter(merged), [](const fd::Message& a, const fd::Message& b) { return a.time < b.time; });
      msgs = std::move(merged);
    }
    metrics.cells[c].ledger.append(msgs);
  }

  SimulationResult result;
  result.report = make_report(cfg, metrics);
  result.metrics = std::move(metrics);
  return result;
}

Report make_report(const SimConfig& cfg, const Metrics& metrics) {
  Report report;
  for (const auto& cell : metrics.cells) {
    ReportRow row;
    row.scheme = to_string(cell.scheme);
    row.capacity = cell.capacity;
    row.speed = cfg.speed_mu;
    row.hit_pct = round_to(cell.counters.hit_pct(), 4);
    row.mean_latency_ms = round_to(cell.counters.mean_latency() * 1000.0, 4);
    row.uplink_mb = to_mb(cell.ledger.uplink_bytes());
    row.downlink_mb = to_mb(cell.ledger.downlink_bytes());
    row.seed = cfg.seed;
    report.rows.push_back(row);
  }
  return report;
}

std::string metrics_json(const Metrics& m) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : m.cells) {
    cells.push_back({{"scheme", to_string(c.scheme)},
                     {"capacity", c.capacity},
                     {"hits", c.counters.hits},
                     {"misses", c.counters.misses},
                     {"latency_sum_s", c.counters.latency_sum},
                     {"uplink_bytes", c.ledger.uplink_bytes()},
                     {"downlink_bytes", c.ledger.downlink_bytes()},
                     {"messages", c.ledger.messages().size()}});
  }
  nlohmann::json fl = nlohmann::json::object();
  for (const auto& [s, n] : m.fl_rounds_completed) fl[to_string(s)] = n;
  nlohmann::json j = {{"cells", cells},
                      {"requests", m.requests},
                      {"dropped_requests", m.dropped_requests},
                      {"visits", m.visits},
                      {"visits_completed", m.visits_completed},
                      {"visits_distilled", m.visits_distilled},
                      {"fl_rounds_completed", fl},
                      {"fl_rounds_required", m.fl_rounds_required},
                      {"kc_merges", m.kc_merges},
                      {"backhaul_bytes", m.backhaul_bytes},
                      {"loss_trajectory", m.loss_trajectory}};
  return j.dump(2);
}

}  // namespace vecache::harness
