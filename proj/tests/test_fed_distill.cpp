#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vecache/error.hpp"
#include "vecache/fed_distill.hpp"

using namespace vecache;
using namespace vecache::fd;

namespace {

Latent vec(std::initializer_list<double> v) {
  Latent out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Exhaustive reference: score every other vehicle, sort, filter, cut.
std::vector<int> brute_neighbors(const std::vector<std::pair<int, Latent>>& hashes, int self, int count,
                                 double gamma) {
  Latent mine;
  for (const auto& [id, h] : hashes)
    if (id == self) mine = h;
  std::vector<std::pair<double, int>> all;
  for (const auto& [id, h] : hashes) {
    if (id == self) continue;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index k = 0; k < h.size(); ++k) {
      dot += mine(k) * h(k);
      na += mine(k) * mine(k);
      nb += h(k) * h(k);
    }
    if (na == 0.0 || nb == 0.0) continue;
    all.emplace_back(dot / (std::sqrt(na) * std::sqrt(nb)), id);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  for (const auto& [s, id] : all)
    if (s >= gamma && static_cast<int>(out.size()) < count) out.push_back(id);
  return out;
}

struct SmallWorld {
  codec::CodecHyper hyper;
  codec::CodecParams base;
  ProtocolConfig config;
  ldpm::NoiseSchedule sched = ldpm::build_schedule(20);
  std::vector<Eigen::MatrixXd> locals;

  SmallWorld() {
    hyper.hidden = 16;
    hyper.latent_dim = 4;
    hyper.finetune_epochs = 3;
    auto rng = make_stream(1, {});
    base = codec::init_codec(40, hyper, rng);
    config.samples = 30;
    config.denoiser_hidden = 16;
    config.embed_dim = 8;
    config.train.episodes = 5;
    config.neighbors = 3;
    config.gamma = -1.0;  // every other vehicle qualifies
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int v = 0; v < 4; ++v) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(40, 6);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          if (u(rng) < 0.3) m(i, j) = (1 + static_cast<int>(u(rng) * 5)) / 5.0;
      locals.push_back(m);
    }
  }

  VehicleModel vehicle(int id) const {
    return bootstrap_vehicle(id, base, locals[static_cast<std::size_t>(id)], hyper, config, sched, 7);
  }
};

std::string ndjson(const ByteLedger& l) {
  std::ostringstream out;
  l.write_ndjson(out);
  return out.str();
}

}  // namespace

TEST_CASE("upsert semantics") {
  KnowledgeCache kc(3);
  kc.upsert_hi({vec({1, 0}), 1, 2.0});
  kc.upsert_ki({vec({0, 1}), 1, 2.5});
  CHECK(kc.hi().size() == 1);
  CHECK(kc.ki().size() == 1);
  kc.upsert_hi({vec({2, 0}), 1, 9.0});
  kc.upsert_ki({vec({0, 2}), 1, 9.5});
  REQUIRE(kc.hi().size() == 1);
  REQUIRE(kc.ki().size() == 1);
  CHECK(kc.find_hi(1)->upload_time == 9.0);
  CHECK(kc.find_ki(1)->upload_time == 9.5);
  CHECK(kc.find_hi(2) == nullptr);
  for (int i = 1; i <= 100; ++i) {
    kc.upsert_hi({vec({1.0 * i, 1}), i, 1.0});
    kc.upsert_ki({vec({1.0 * i, 1}), i, 1.0});
  }
  CHECK(kc.hi().size() == 100);
  CHECK(kc.ki().size() == 100);
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 5})) == 0.0);
  CHECK(cosine_similarity(vec({1, 2, 3}), vec({4, 5, 6})) == doctest::Approx(0.9746).epsilon(1e-4));
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 1})), UndefinedSimilarity);
  CHECK_THROWS_AS(cosine_similarity(vec({1}), vec({1, 1})), ContractViolation);
}

TEST_CASE("find_neighbors: closed cases") {
  KnowledgeCache kc;
  kc.upsert_hi({vec({1, 1}), 4, 0.0});
  CHECK(find_neighbors(kc, 4, 10, -1.0).empty());
  kc.upsert_hi({vec({1, 1}), 5, 0.0});
  kc.upsert_hi({vec({0, 0}), 6, 0.0});
  CHECK(find_neighbors(kc, 4, 10, 1.0 + 1e-9).empty());
  CHECK(find_neighbors(kc, 4, 10, 0.5) == std::vector<int>{5});
  CHECK(find_neighbors(kc, 6, 10, -1.0).empty());
  CHECK_THROWS_AS(find_neighbors(kc, 99, 10, 0.5), ProtocolError);
}

TEST_CASE("find_neighbors matches exhaustive sort on randomized fixtures") {
  auto rng = make_stream(2024, {});
  std::uniform_int_distribution<int> size(1, 14), small(-3, 3), dims(2, 6);
  std::uniform_real_distribution<double> g(-1.0, 1.0), real(-2.0, 2.0);
  int fixtures = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = size(rng), d = dims(rng);
    const bool integer = trial % 2 == 0;  // integer coordinates produce exact ties
    std::vector<std::pair<int, Latent>> hashes;
    KnowledgeCache kc;
    for (int k = 0; k < n; ++k) {
      Latent h(d);
      for (int j = 0; j < d; ++j) h(j) = integer ? small(rng) : real(rng);
      const int id = 3 * k + (trial % 3);
      hashes.emplace_back(id, h);
      kc.upsert_hi({h, id, 0.0});
    }
    const int self = hashes[static_cast<std::size_t>(trial % n)].first;
    const int count = trial % 7;
    const double gamma = g(rng);
    CHECK(find_neighbors(kc, self, count, gamma) == brute_neighbors(hashes, self, count, gamma));
    ++fixtures;
  }
  CHECK(fixtures >= 100);
}

TEST_CASE("find_neighbors is invariant under positive scaling") {
  auto rng = make_stream(5, {});
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    KnowledgeCache a, b;
    for (int id = 0; id < 10; ++id) {
      Latent h(4);
      for (int j = 0; j < 4; ++j) h(j) = n(rng);
      a.upsert_hi({h, id, 0.0});
      b.upsert_hi({c(rng) * h, id, 0.0});
    }
    auto x = find_neighbors(a, 0, 4, 0.0), y = find_neighbors(b, 0, 4, 0.0);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
  }
}

TEST_CASE("integrate_knowledge") {
  KnowledgeCache kc;
  kc.upsert_ki({vec({0, 0}), 1, 0.0});
  kc.upsert_ki({vec({2, 4}), 2, 0.0});
  kc.upsert_ki({vec({4, 2}), 3, 0.0});
  const std::vector<int> three{1, 2, 3}, one{2}, missing{7, 8}, partial{2, 9};
  CHECK(integrate_knowledge(kc, three)->isApprox(vec({2, 2})));
  CHECK(*integrate_knowledge(kc, one) == vec({2, 4}));
  CHECK_FALSE(integrate_knowledge(kc, missing).has_value());
  CHECK(*integrate_knowledge(kc, partial) == vec({2, 4}));

  KnowledgeCache same;
  for (int i = 0; i < 5; ++i) same.upsert_ki({vec({0.3, -1.7, 2.2}), i, 0.0});
  const std::vector<int> all{0, 1, 2, 3, 4};
  CHECK(integrate_knowledge(same, all)->isApprox(vec({0.3, -1.7, 2.2})));
}

TEST_CASE("merge_kc: latest upload wins, idempotent, identity") {
  KnowledgeCache r1(1), r2(2);
  r1.upsert_hi({vec({1, 0}), 7, 5.0});
  r1.upsert_ki({vec({1, 1}), 7, 5.0});
  r2.upsert_hi({vec({0, 1}), 7, 9.0});
  r2.upsert_ki({vec({2, 2}), 7, 9.0});
  r1.upsert_hi({vec({3, 3}), 8, 1.0});
  const std::vector<KnowledgeCache> both{r1, r2};
  const auto lat = merge_kc(both);
  CHECK(lat.rsu_id() == kMbsId);
  CHECK(lat.find_hi(7)->upload_time == 9.0);
  CHECK(*lat.find_ki(7)->knowledge.data() == 2.0);
  CHECK(lat.find_hi(8) != nullptr);
  CHECK(lat.hi().size() == 2);

  const std::vector<KnowledgeCache> again{lat};
  CHECK(merge_kc(again).same_entries(lat));
  const std::vector<KnowledgeCache> single{r1};
  CHECK(merge_kc(single).same_entries(r1));

  // pushing the merged view back makes every RSU identical
  std::vector<KnowledgeCache> rsus = both;
  for (auto& kc : rsus) kc.replace_entries(lat);
  CHECK(rsus[0].same_entries(rsus[1]));
  CHECK(rsus[0].rsu_id() == 1);
}

TEST_CASE("wire sizes and ledger closure") {
  CHECK(wire::hi_bytes(16) == 76);
  CHECK(wire::ki_bytes(16) == 76);
  CHECK(wire::knowledge_down_bytes(16) == 64);
  CHECK(wire::rec_list_bytes(500) == 2000);
  CHECK(wire::model_bytes(770000) == 3080000);

  ByteLedger l;
  l.record({0.0, vehicle_endpoint(1), rsu_endpoint(0), MessageType::HI, 76});
  l.record({1.0, rsu_endpoint(0), vehicle_endpoint(1), MessageType::KnowledgeDown, 64});
  l.record({2.0, vehicle_endpoint(1), rsu_endpoint(0), MessageType::RecList, 40});
  CHECK(l.uplink_bytes() == 116);
  CHECK(l.downlink_bytes() == 64);
  CHECK(l.total_bytes() == 180);
  const std::string text = ndjson(l);
  CHECK(text.find("\"msg_type\":\"KNOWLEDGE_DOWN\"") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("cold start visit: no neighbours, plain training, list produced") {
  SmallWorld w;
  auto v = w.vehicle(0);
  KnowledgeCache kc(0);
  const auto r = vehicle_visit(v, kc, 10.0, 30.0, 12, w.config, w.sched, 7);
  CHECK(r.outcome.completed);
  CHECK(r.outcome.neighbors.empty());
  CHECK_FALSE(r.outcome.integrated.has_value());
  CHECK(r.list.contents.size() == 12);
  CHECK(kc.find_hi(0) != nullptr);
  CHECK(kc.find_ki(0)->upload_time == 10.0 + w.config.visit_seconds);
  CHECK(r.ledger.total_bytes() == wire::hi_bytes(4) + wire::ki_bytes(4) + wire::rec_list_bytes(12));
  CHECK(v.visits == 1);
}

TEST_CASE("visit ledger conservation with knowledge download") {
  SmallWorld w;
  KnowledgeCache kc(1);
  std::vector<VehicleModel> fleet;
  for (int i = 0; i < 4; ++i) fleet.push_back(w.vehicle(i));
  for (int i = 0; i < 3; ++i) vehicle_visit(fleet[static_cast<std::size_t>(i)], kc, i, 30.0, 10, w.config, w.sched, 7);

  const auto r = vehicle_visit(fleet[3], kc, 20.0, 30.0, 10, w.config, w.sched, 7);
  REQUIRE(r.outcome.completed);
  CHECK(r.outcome.neighbors.size() == 3);
  REQUIRE(r.outcome.integrated.has_value());
  CHECK(r.ledger.total_bytes() ==
        wire::hi_bytes(4) + wire::ki_bytes(4) + wire::knowledge_down_bytes(4) + wire::rec_list_bytes(10));

  std::uint64_t replay = 0;
  double last = -1.0;
  for (const auto& m : r.ledger.messages()) {
    replay += m.bytes;
    CHECK(m.time >= last);
    last = m.time;
  }
  CHECK(replay == r.ledger.total_bytes());
}

TEST_CASE("short residence aborts after the HI upload") {
  SmallWorld w;
  auto v = w.vehicle(2);
  const auto before = nn::flatten(v.denoiser.layers);
  KnowledgeCache kc(0);
  const auto r = vehicle_visit(v, kc, 0.0, w.config.visit_seconds - 0.1, 10, w.config, w.sched, 7);
  CHECK_FALSE(r.outcome.completed);
  CHECK(r.list.contents.empty());
  CHECK(r.ledger.total_bytes() == wire::hi_bytes(4));
  CHECK(kc.find_ki(2) == nullptr);
  CHECK(nn::flatten(v.denoiser.layers) == before);
}

TEST_CASE("visit replay is deterministic") {
  SmallWorld w;
  const auto run = [&] {
    KnowledgeCache kc(0);
    auto a = w.vehicle(0);
    auto b = w.vehicle(1);
    vehicle_visit(a, kc, 0.0, 30.0, 10, w.config, w.sched, 7);
    return vehicle_visit(b, kc, 3.0, 30.0, 10, w.config, w.sched, 7);
  };
  const auto x = run(), y = run();
  CHECK(x.list.contents == y.list.contents);
  CHECK(x.ledger == y.ledger);
  CHECK(ndjson(x.ledger) == ndjson(y.ledger));
}

TEST_CASE("bootstrap leaves a hash, ranking and scores in range") {
  SmallWorld w;
  const auto v = w.vehicle(1);
  CHECK(v.hash.size() == 4);
  CHECK(v.hash.isApprox(v.latents.rowwise().mean()));
  CHECK(v.ranking.size() == 40);
  CHECK(v.scores.minCoeff() >= 0.0);
  CHECK(v.scores.maxCoeff() <= 1.0);
  auto sorted = v.ranking;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i + 1);
}
