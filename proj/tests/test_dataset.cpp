#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "vecache/dataset.hpp"
#include "vecache/error.hpp"

using namespace vecache;
using namespace vecache::dataset;

namespace {

RatingMatrix small_synthetic(int users, std::uint64_t seed) {
  SyntheticOptions o;
  o.num_users = users;
  o.num_contents = 400;
  o.median_ratings = 30;
  o.min_ratings = 1;
  o.max_ratings = 120;
  return synthesize_ratings(o, seed);
}

std::vector<std::vector<mobility::CoverageInterval>> trips_for(std::size_t n, double horizon) {
  const auto topo = mobility::HighwayTopology::contiguous(2, 500.0);
  const mobility::SpeedDistribution dist;
  auto rng = make_stream(3, {stream::kSpeeds});
  std::vector<std::vector<mobility::CoverageInterval>> trips;
  for (std::size_t v = 0; v < n; ++v)
    trips.push_back(mobility::build_trip(static_cast<int>(v), v * 2.0, horizon, 0.1, topo, dist, rng));
  return trips;
}

}  // namespace

TEST_CASE("three-line fixture round trips") {
  const std::string text = "1::1193::5::978300760\n1::661::3::978302109\n2::914::3::978301968\n";
  std::istringstream in(text);
  const auto m = load_ratings(in);
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0] == Rating{1, 1193, 5, 978300760});
  CHECK(m.entries[1] == Rating{1, 661, 3, 978302109});
  CHECK(m.entries[2] == Rating{2, 914, 3, 978301968});
  CHECK(m.num_users() == 2);

  std::ostringstream out;
  write_ratings(out, m);
  CHECK(out.str() == text);
}

TEST_CASE("csv fallback") {
  std::istringstream in("user_id,content_id,rating,timestamp\n4,10,2,100\n4,11,4,101\n");
  const auto m = load_ratings(in);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[1] == Rating{4, 11, 4, 101});
}

TEST_CASE("empty stream gives an empty matrix") {
  std::istringstream in("");
  const auto m = load_ratings(in);
  CHECK(m.entries.empty());
  CHECK(m.num_users() == 0);
}

TEST_CASE("malformed input reports its line number") {
  std::istringstream bad_field("1::2::3::4\n1::x::3::4\n");
  try {
    load_ratings(bad_field);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream short_line("1::2::3::4\n\n1::2::3\n");
  try {
    load_ratings(short_line);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream bad_rating("1::2::6::4\n");
  CHECK_THROWS_AS(load_ratings(bad_rating), DataError);
  std::istringstream bad_content("1::5000::3::4\n");
  CHECK_THROWS_AS(load_ratings(bad_content), DataError);
}

TEST_CASE("normalization") {
  CHECK(normalize(5) == 1.0);
  CHECK(normalize(3) == doctest::Approx(0.6));
  for (int x = 1; x <= 5; ++x) CHECK(denormalize(normalize(x)) == x);

  RatingMatrix m;
  m.num_contents = 5;
  m.entries = {{7, 2, 3, 0}, {9, 5, 5, 0}};
  const std::vector<UserId> users{7, 9};
  const auto cols = normalized_columns(m, users);
  REQUIRE(cols.rows() == 5);
  REQUIRE(cols.cols() == 2);
  CHECK(cols(1, 0) == doctest::Approx(0.6));
  CHECK(cols(4, 1) == 1.0);
  CHECK(cols(0, 0) == 0.0);
  CHECK(cols.sum() == doctest::Approx(1.6));
}

TEST_CASE("chronological split") {
  std::vector<Rating> r;
  for (int i = 0; i < 10; ++i) r.push_back({1, static_cast<ContentId>(100 + i), 3, 1000 - i});
  const auto s = split_user(1, r, 0.8);
  CHECK(s.train.size() == 8);
  REQUIRE(s.held_out.size() == 2);
  // earliest timestamps train; the two latest are contents 101 and 100
  CHECK(s.held_out == std::vector<ContentId>{101, 100});
  for (const auto& t : s.train) CHECK(t.timestamp < 999);

  const auto one = split_user(2, {{2, 5, 4, 1}}, 0.8);
  CHECK(one.train.size() == 1);
  CHECK(one.held_out.empty());
}

TEST_CASE("partition is a bijection and conserves ratings") {
  const auto m = small_synthetic(80, 11);
  for (int vehicles : {1, 7, 80}) {
    auto rng = make_stream(1, {stream::kPartition});
    const auto locals = partition_users(m, vehicles, 0.8, rng);
    REQUIRE(locals.size() == static_cast<std::size_t>(vehicles));
    std::set<UserId> seen;
    std::size_t total_users = 0, rated_cells = 0, held = 0;
    for (const auto& l : locals) {
      total_users += l.users.size();
      seen.insert(l.users.begin(), l.users.end());
      rated_cells += static_cast<std::size_t>((l.train.array() > 0.0).count());
      held += l.held_out_requests.size();
      if (vehicles == 80) CHECK(l.users.size() == 1);
    }
    const auto all = m.users();
    CHECK(total_users == all.size());
    CHECK(std::set<UserId>(all.begin(), all.end()) == seen);
    // synthetic users never rate the same item twice, so train cells + held out = entries
    CHECK(rated_cells + held == m.entries.size());
  }
}

TEST_CASE("partition rejects impossible fleet sizes") {
  const auto m = small_synthetic(10, 2);
  auto rng = make_stream(1, {});
  CHECK_THROWS_AS(partition_users(m, 0, 0.8, rng), ConfigError);
  CHECK_THROWS_AS(partition_users(m, 11, 0.8, rng), ConfigError);
  CHECK_THROWS_AS(partition_users(m, 2, 1.0, rng), ConfigError);
}

TEST_CASE("public split is disjoint and covers every user") {
  const auto m = small_synthetic(60, 4);
  auto rng = make_stream(1, {});
  const auto [pub, rest] = split_public(m, 0.1, rng);
  CHECK(pub.size() == 6);
  CHECK(pub.size() + rest.size() == 60);
  std::vector<UserId> both;
  std::set_intersection(pub.begin(), pub.end(), rest.begin(), rest.end(), std::back_inserter(both));
  CHECK(both.empty());
}

TEST_CASE("requests: conservation, interval membership, determinism") {
  const auto m = small_synthetic(40, 5);
  auto rng = make_stream(1, {stream::kPartition});
  auto locals = partition_users(m, 10, 0.8, rng);
  locals[3].held_out_requests.clear();
  const auto trips = trips_for(locals.size(), 300.0);

  const auto trace = generate_requests(locals, trips, 77);
  std::size_t expected = 0;
  for (const auto& l : locals) expected += l.held_out_requests.size();
  CHECK(trace.dropped == 0);
  CHECK(trace.events.size() == expected);

  std::map<int, std::multiset<ContentId>> per_vehicle;
  for (const auto& r : trace.events) {
    per_vehicle[r.vehicle_id].insert(r.content);
    const auto& trip = trips[static_cast<std::size_t>(r.vehicle_id)];
    bool inside = false;
    for (const auto& iv : trip)
      if (iv.rsu == r.rsu && r.time >= iv.entry && r.time <= iv.exit) inside = true;
    CHECK(inside);
  }
  CHECK(per_vehicle.count(3) == 0);
  for (const auto& l : locals) {
    if (l.held_out_requests.empty()) continue;
    CHECK(per_vehicle[l.vehicle_id] ==
          std::multiset<ContentId>(l.held_out_requests.begin(), l.held_out_requests.end()));
  }
  CHECK(std::is_sorted(trace.events.begin(), trace.events.end(),
                       [](const Request& a, const Request& b) { return a.time < b.time; }));

  const auto again = generate_requests(locals, trips, 77);
  CHECK(again.events == trace.events);
}

TEST_CASE("vehicles that never enter coverage drop their requests") {
  const auto m = small_synthetic(20, 6);
  auto rng = make_stream(1, {});
  const auto locals = partition_users(m, 4, 0.8, rng);
  auto trips = trips_for(4, 300.0);
  trips[2].clear();
  const auto trace = generate_requests(locals, trips, 1);
  CHECK(trace.dropped == locals[2].held_out_requests.size());
  for (const auto& r : trace.events) CHECK(r.vehicle_id != 2);
}

TEST_CASE("synthetic generator is seed-deterministic and in range") {
  const auto a = small_synthetic(30, 9);
  const auto b = small_synthetic(30, 9);
  CHECK(a.entries == b.entries);
  for (const auto& r : a.entries) {
    CHECK(r.value >= 1);
    CHECK(r.value <= 5);
    CHECK(r.content >= 1);
    CHECK(r.content <= 400u);
  }
  CHECK(a.num_users() == 30);
}
