#include "vecache/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <string_view>

#include "vecache/error.hpp"

namespace vecache::dataset {

namespace {

constexpr std::string_view kCsvHeader = "user_id,content_id,rating,timestamp";

template <typename T>
T parse_field(std::string_view field, std::size_t line) {
  T value{};
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(line, "bad numeric field '" + std::string(field) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  for (;;) {
    auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + sep.size());
  }
  return out;
}

std::map<UserId, std::vector<Rating>> group_by_user(const RatingMatrix& m) {
  std::map<UserId, std::vector<Rating>> by_user;
  for (const auto& r : m.entries) by_user[r.user].push_back(r);
  return by_user;
}

}  // namespace

std::vector<UserId> RatingMatrix::users() const {
  std::vector<UserId> ids;
  ids.reserve(entries.size());
  for (const auto& r : entries) ids.push_back(r.user);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

RatingMatrix RatingMatrix::restrict_to(std::span<const UserId> keep) const {
  RatingMatrix out;
  out.num_contents = num_contents;
  for (const auto& r : entries)
    if (std::binary_search(keep.begin(), keep.end(), r.user)) out.entries.push_back(r);
  return out;
}

RatingMatrix load_ratings(std::istream& in, Format format, int num_contents) {
  RatingMatrix m;
  m.num_contents = num_contents;
  std::string raw;
  std::size_t line_no = 0;
  bool csv_header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (format == Format::Auto)
      format = line.find("::") != std::string_view::npos ? Format::MovieLensDat : Format::Csv;
    if (format == Format::Csv && !csv_header_seen) {
      if (line != kCsvHeader) throw ParseError(line_no, "expected CSV header '" + std::string(kCsvHeader) + "'");
      csv_header_seen = true;
      continue;
    }

    auto fields = split(line, format == Format::Csv ? std::string_view(",") : std::string_view("::"));
    if (fields.size() != 4) throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    Rating r;
    r.user = parse_field<UserId>(fields[0], line_no);
    r.content = parse_field<ContentId>(fields[1], line_no);
    r.value = parse_field<int>(fields[2], line_no);
    r.timestamp = parse_field<std::int64_t>(fields[3], line_no);
    if (r.value < 1 || r.value > 5)
      throw DataError("line " + std::to_string(line_no) + ": rating " + std::to_string(r.value) + " outside 1..5");
    if (r.content < 1 || r.content > static_cast<ContentId>(num_contents))
      throw DataError("line " + std::to_string(line_no) + ": content id " + std::to_string(r.content) +
                      " outside [1, " + std::to_string(num_contents) + "]");
    m.entries.push_back(r);
  }
  return m;
}

void write_ratings(std::ostream& out, const RatingMatrix& matrix) {
  for (const auto& r : matrix.entries)
    out << r.user << "::" << r.content << "::" << r.value << "::" << r.timestamp << '\n';
}

Eigen::MatrixXd normalized_columns(const RatingMatrix& matrix, std::span<const UserId> users) {
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(matrix.num_contents, static_cast<Eigen::Index>(users.size()));
  std::map<UserId, Eigen::Index> column;
  for (std::size_t i = 0; i < users.size(); ++i) column[users[i]] = static_cast<Eigen::Index>(i);
  for (const auto& r : matrix.entries) {
    auto it = column.find(r.user);
    if (it != column.end()) cols(r.content - 1, it->second) = normalize(r.value);
  }
  return cols;
}

UserSplit split_user(UserId user, std::vector<Rating> ratings, double split_ratio) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("data.split_ratio must be in (0, 1)");
  std::sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.content < b.content;
  });
  UserSplit s;
  s.user = user;
  const std::size_t n = ratings.size();
  if (n < 2) {
    s.train = std::move(ratings);
    return s;
  }
  auto n_train = static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  s.train.assign(ratings.begin(), ratings.begin() + static_cast<std::ptrdiff_t>(n_train));
  for (std::size_t i = n_train; i < n; ++i) s.held_out.push_back(ratings[i].content);
  return s;
}

std::vector<LocalDataset> partition_users(const RatingMatrix& matrix, int num_vehicles,
                                          double split_ratio, Rng& rng) {
  auto users = matrix.users();
  if (num_vehicles < 1) throw ConfigError("data.num_vehicles must be >= 1");
  if (static_cast<std::size_t>(num_vehicles) > users.size())
    throw ConfigError("data.num_vehicles (" + std::to_string(num_vehicles) + ") exceeds user count (" +
                      std::to_string(users.size()) + ")");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("data.split_ratio must be in (0, 1)");

  std::shuffle(users.begin(), users.end(), rng);
  std::vector<LocalDataset> locals(static_cast<std::size_t>(num_vehicles));
  for (std::size_t i = 0; i < users.size(); ++i) locals[i % locals.size()].users.push_back(users[i]);

  auto by_user = group_by_user(matrix);
  for (std::size_t v = 0; v < locals.size(); ++v) {
    auto& local = locals[v];
    local.vehicle_id = static_cast<int>(v);
    std::sort(local.users.begin(), local.users.end());
    RatingMatrix train_part;
    train_part.num_contents = matrix.num_contents;
    for (UserId u : local.users) {
      auto split_result = split_user(u, by_user[u], split_ratio);
      train_part.entries.insert(train_part.entries.end(), split_result.train.begin(), split_result.train.end());
      local.held_out_requests.insert(local.held_out_requests.end(), split_result.held_out.begin(),
                                     split_result.held_out.end());
    }
    local.train = normalized_columns(train_part, local.users);
  }
  return locals;
}

std::pair<std::vector<UserId>, std::vector<UserId>> split_public(const RatingMatrix& matrix,
                                                                 double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("data.public_fraction must be in (0, 1)");
  auto users = matrix.users();
  if (users.size() < 2) throw ConfigError("need at least two users to carve out a public pool");
  std::shuffle(users.begin(), users.end(), rng);
  auto n_public = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(users.size())));
  n_public = std::clamp<std::size_t>(n_public, 1, users.size() - 1);
  std::vector<UserId> pub(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_public));
  std::vector<UserId> rest(users.begin() + static_cast<std::ptrdiff_t>(n_public), users.end());
  std::sort(pub.begin(), pub.end());
  std::sort(rest.begin(), rest.end());
  return {std::move(pub), std::move(rest)};
}

RatingMatrix subsample_users(const RatingMatrix& matrix, std::size_t count, Rng& rng) {
  auto users = matrix.users();
  if (count == 0 || count >= users.size()) return matrix;
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(count);
  std::sort(users.begin(), users.end());
  return matrix.restrict_to(users);
}

RequestTrace generate_requests(std::span<const LocalDataset> locals,
                               std::span<const std::vector<mobility::CoverageInterval>> trips,
                               std::uint64_t seed) {
  if (locals.size() != trips.size()) throw ContractViolation("generate_requests: one trip per vehicle required");
  RequestTrace trace;
  for (std::size_t v = 0; v < locals.size(); ++v) {
    const auto& local = locals[v];
    const auto& trip = trips[v];
    double covered = 0.0;
    for (const auto& iv : trip) covered += iv.duration();
    if (!(covered > 0.0)) {
      trace.dropped += local.held_out_requests.size();
      continue;
    }
    auto rng = make_stream(seed, {stream::kRequests, static_cast<std::uint64_t>(local.vehicle_id)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (ContentId c : local.held_out_requests) {
      double offset = unit(rng) * covered;
      std::size_t k = 0;
      while (k + 1 < trip.size() && offset >= trip[k].duration()) {
        offset -= trip[k].duration();
        ++k;
      }
      const double t = std::min(trip[k].entry + offset, trip[k].exit);
      trace.events.push_back({t, local.vehicle_id, c, trip[k].rsu});
    }
  }
  std::sort(trace.events.begin(), trace.events.end(), [](const Request& a, const Request& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
    return a.content < b.content;
  });
  return trace;
}

RatingMatrix synthesize_ratings(const SyntheticOptions& o, std::uint64_t seed) {
  if (o.num_users < 1 || o.num_contents < 1 || o.num_genres < 1) throw ConfigError("synthetic: sizes must be positive");
  auto rng = make_stream(seed, {stream::kSynthetic});
  const auto K = static_cast<std::size_t>(o.num_contents);

  // Popularity follows a Zipf law over a random ordering of content ids.
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> popularity(K);
  for (std::size_t rank = 0; rank < K; ++rank)
    popularity[order[rank]] = 1.0 / std::pow(static_cast<double>(rank + 1), o.popularity_exponent);

  std::uniform_int_distribution<int> genre_of(0, o.num_genres - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> genre(K);
  std::vector<double> quality(K);
  for (std::size_t k = 0; k < K; ++k) {
    genre[k] = genre_of(rng);
    quality[k] = 0.5 * normal(rng);
  }

  RatingMatrix m;
  m.num_contents = o.num_contents;
  constexpr std::int64_t kEpoch = 956703932;  // first timestamp of the reference dataset
  std::vector<std::pair<double, std::size_t>> keys(K);
  for (int u = 1; u <= o.num_users; ++u) {
    std::vector<bool> favourite(static_cast<std::size_t>(o.num_genres), false);
    const int n_fav = 1 + static_cast<int>(unit(rng) * 3.0);
    for (int f = 0; f < n_fav; ++f) favourite[static_cast<std::size_t>(genre_of(rng))] = true;
    const double bias = 0.5 * normal(rng);
    const double log_n = std::log(o.median_ratings) + 0.9 * normal(rng);
    const int n = std::clamp(static_cast<int>(std::exp(log_n)), o.min_ratings, std::min(o.max_ratings, o.num_contents));

    // Weighted sampling without replacement (exponential-key method).
    for (std::size_t k = 0; k < K; ++k) {
      const double w = popularity[k] * (favourite[static_cast<std::size_t>(genre[k])] ? o.genre_affinity : 1.0);
      keys[k] = {std::log(std::max(unit(rng), 1e-300)) / w, k};
    }
    std::partial_sort(keys.begin(), keys.begin() + n, keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    std::shuffle(keys.begin(), keys.begin() + n, rng);  // rating order is unrelated to sampling order

    std::int64_t t = kEpoch + static_cast<std::int64_t>(unit(rng) * 3.0e7);
    for (int j = 0; j < n; ++j) {
      const std::size_t k = keys[static_cast<std::size_t>(j)].second;
      const double affinity = favourite[static_cast<std::size_t>(genre[k])] ? 0.7 : -0.2;
      const double score = 3.4 + bias + affinity + quality[k] + 0.8 * normal(rng);
      const int value = std::clamp(static_cast<int>(std::lround(score)), 1, 5);
      t += 1 + static_cast<std::int64_t>(-std::log(std::max(unit(rng), 1e-300)) * 3600.0);
      m.entries.push_back({static_cast<UserId>(u), static_cast<ContentId>(k + 1), value, t});
    }
  }
  return m;
}

}  // namespace vecache::dataset
