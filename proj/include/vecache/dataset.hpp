#pragma once

// MovieLens-shaped rating ingestion, user partitioning and request traces.

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "vecache/mobility.hpp"
#include "vecache/rng.hpp"

namespace vecache::dataset {

using UserId = std::uint32_t;
using ContentId = std::uint32_t;  // 1-based, in [1, K]

inline constexpr int kMovieLensContents = 3952;

struct Rating {
  UserId user = 0;
  ContentId content = 0;
  int value = 0;  // 1..5
  std::int64_t timestamp = 0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

struct RatingMatrix {
  int num_contents = kMovieLensContents;
  std::vector<Rating> entries;

  /// Distinct user ids in ascending order.
  std::vector<UserId> users() const;
  std::size_t num_users() const { return users().size(); }
  /// Keeps only entries whose user is in `keep` (sorted ascending).
  RatingMatrix restrict_to(std::span<const UserId> keep) const;
};

enum class Format { Auto, MovieLensDat, Csv };

/// Parses `UserID::MovieID::Rating::Timestamp` lines or the CSV fallback
/// with header `user_id,content_id,rating,timestamp`. Throws ParseError with
/// the line number on malformed input and DataError on out-of-range values.
RatingMatrix load_ratings(std::istream& in, Format format = Format::Auto,
                          int num_contents = kMovieLensContents);

/// Writes the `::`-separated layout read by load_ratings.
void write_ratings(std::ostream& out, const RatingMatrix& matrix);

inline double normalize(int rating) { return static_cast<double>(rating) / 5.0; }
inline int denormalize(double value) { return static_cast<int>(value * 5.0 + 0.5); }

/// Dense K x users matrix of normalized ratings (0 = unrated), one column per
/// user in the order given.
Eigen::MatrixXd normalized_columns(const RatingMatrix& matrix, std::span<const UserId> users);

struct UserSplit {
  UserId user = 0;
  std::vector<Rating> train;           // chronologically earliest ratings
  std::vector<ContentId> held_out;     // later ratings, in time order
};

/// Chronological split: the first floor(split_ratio * n) ratings train, the
/// rest are held out. Users with fewer than two ratings keep everything in train.
UserSplit split_user(UserId user, std::vector<Rating> ratings, double split_ratio);

struct LocalDataset {
  int vehicle_id = 0;
  std::vector<UserId> users;
  Eigen::MatrixXd train;                     // K x users, normalized
  std::vector<ContentId> held_out_requests;  // concatenated per-user held-out items
};

/// Assigns users to `num_vehicles` disjoint groups (shuffled round robin) and
/// splits every user chronologically.
std::vector<LocalDataset> partition_users(const RatingMatrix& matrix, int num_vehicles,
                                          double split_ratio, Rng& rng);

/// Separates a `fraction` of users (at least one) as the public pool; returns
/// (public users, remaining users), both ascending.
std::pair<std::vector<UserId>, std::vector<UserId>> split_public(const RatingMatrix& matrix,
                                                                 double fraction, Rng& rng);

/// Random subset of `count` users; the whole matrix when count is 0 or too large.
RatingMatrix subsample_users(const RatingMatrix& matrix, std::size_t count, Rng& rng);

struct Request {
  double time = 0.0;
  int vehicle_id = 0;
  ContentId content = 0;
  int rsu = 0;  // zone the vehicle occupies at `time`

  friend bool operator==(const Request&, const Request&) = default;
};

struct RequestTrace {
  std::vector<Request> events;  // sorted by (time, vehicle_id, content)
  std::size_t dropped = 0;      // requests of vehicles that never entered coverage
};

/// Emits each held-out content once, at a uniform time inside the vehicle's
/// coverage intervals. `trips[v]` is the timeline of `locals[v]`.
RequestTrace generate_requests(std::span<const LocalDataset> locals,
                               std::span<const std::vector<mobility::CoverageInterval>> trips,
                               std::uint64_t seed);

/// Parameters of the synthetic MovieLens-shaped generator used when no
/// ratings file is configured.
struct SyntheticOptions {
  int num_users = 600;
  int num_contents = kMovieLensContents;
  int num_genres = 18;
  double popularity_exponent = 0.9;  // Zipf exponent of the content popularity law
  double genre_affinity = 6.0;       // boost of a favourite-genre item
  double median_ratings = 95.0;      // per-user count ~ lognormal around this
  int min_ratings = 20;
  int max_ratings = 1200;
};

RatingMatrix synthesize_ratings(const SyntheticOptions& options, std::uint64_t seed);

}  // namespace vecache::dataset
