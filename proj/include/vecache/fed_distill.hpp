#pragma once

// Knowledge-cache protocol between vehicles, RSUs and the MBS.
//
// A vehicle visit runs, in order: encode -> upsert HI -> neighbour search ->
// knowledge integration -> local distillation training -> sampling -> content
// scoring -> upsert KI (+ recommendation list upload).

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vecache/caching.hpp"
#include "vecache/latent_codec.hpp"
#include "vecache/ldpm.hpp"

namespace vecache::fd {

using Latent = Eigen::VectorXd;

struct HIPair {
  Latent hash;
  int vehicle_id = 0;
  double upload_time = 0.0;
};

struct KIPair {
  Latent knowledge;
  int vehicle_id = 0;
  double upload_time = 0.0;
};

inline constexpr int kMbsId = -1;

class KnowledgeCache {
 public:
  explicit KnowledgeCache(int rsu_id = 0) : rsu_id_(rsu_id) {}

  int rsu_id() const { return rsu_id_; }
  /// Replaces any earlier entry of the same vehicle.
  void upsert_hi(HIPair pair);
  void upsert_ki(KIPair pair);

  const std::map<int, HIPair>& hi() const { return hi_; }
  const std::map<int, KIPair>& ki() const { return ki_; }
  const HIPair* find_hi(int vehicle_id) const;
  const KIPair* find_ki(int vehicle_id) const;

  /// Overwrites the entries with those of `other`, keeping this RSU's id.
  void replace_entries(const KnowledgeCache& other);

  /// Entry-wise equality (ids, vectors and timestamps); ignores rsu_id.
  bool same_entries(const KnowledgeCache& other) const;

 private:
  int rsu_id_;
  std::map<int, HIPair> hi_;
  std::map<int, KIPair> ki_;
};

/// a.b / (|a||b|). Throws UndefinedSimilarity when either vector has zero norm.
double cosine_similarity(const Latent& a, const Latent& b);

/// Up to `count` vehicles other than `vehicle_id` with the highest cosine
/// similarity to its hash, each at least `gamma`; ties by ascending id.
/// Zero-norm hashes never qualify. Throws ProtocolError when the vehicle has no HI entry.
std::vector<int> find_neighbors(const KnowledgeCache& kc, int vehicle_id, int count, double gamma);

/// Mean knowledge of the neighbours that have a KI entry; nullopt when none do.
std::optional<Latent> integrate_knowledge(const KnowledgeCache& kc, std::span<const int> neighbor_ids);

/// Keeps, per vehicle, the HI/KI of the RSU with the latest HI upload
/// (ties -> larger rsu id). The result carries kMbsId.
KnowledgeCache merge_kc(std::span<const KnowledgeCache> caches);

// ---------------------------------------------------------------------------
// Wire accounting

enum class MessageType { HI, KI, KnowledgeDown, RecList, ModelDown, ModelUp };

const char* to_string(MessageType type);
bool is_uplink(MessageType type);

namespace wire {
inline constexpr std::uint64_t kValueBytes = 4;      // f32 / u32
inline constexpr std::uint64_t kIdBytes = 4;         // u32 vehicle id
inline constexpr std::uint64_t kTimestampBytes = 8;  // u64 time
inline std::uint64_t hi_bytes(int latent_dim) { return kIdBytes + kValueBytes * latent_dim + kTimestampBytes; }
inline std::uint64_t ki_bytes(int latent_dim) { return hi_bytes(latent_dim); }
inline std::uint64_t knowledge_down_bytes(int latent_dim) { return kValueBytes * latent_dim; }
inline std::uint64_t rec_list_bytes(std::size_t m) { return kValueBytes * m; }
inline std::uint64_t model_bytes(std::uint64_t parameter_count) { return kValueBytes * parameter_count; }
}  // namespace wire

struct Message {
  double time = 0.0;
  std::string src;
  std::string dst;
  MessageType type = MessageType::HI;
  std::uint64_t bytes = 0;

  friend bool operator==(const Message&, const Message&) = default;
};

std::string vehicle_endpoint(int vehicle_id);
std::string rsu_endpoint(int rsu_id);

class ByteLedger {
 public:
  void record(Message m);
  void append(std::span<const Message> messages);

  std::uint64_t uplink_bytes() const { return uplink_; }
  std::uint64_t downlink_bytes() const { return downlink_; }
  std::uint64_t total_bytes() const { return uplink_ + downlink_; }
  const std::vector<Message>& messages() const { return messages_; }

  /// One JSON object per line: time, src, dst, msg_type, bytes.
  void write_ndjson(std::ostream& out) const;

  friend bool operator==(const ByteLedger&, const ByteLedger&) = default;

 private:
  std::vector<Message> messages_;
  std::uint64_t uplink_ = 0;
  std::uint64_t downlink_ = 0;
};

// ---------------------------------------------------------------------------
// Vehicle side

struct ProtocolConfig {
  int neighbors = 10;          // C
  double gamma = 0.5;          // similarity threshold
  double visit_seconds = 5.0;  // local compute budget per visit
  int samples = 500;           // F
  ldpm::DistillationContext distill{std::nullopt, 1.0, 2.0};  // lambda, delta; knowledge filled per visit
  ldpm::TrainOptions train{};
  int denoiser_hidden = 128;
  int embed_dim = 16;
};

/// Everything a vehicle keeps locally.
struct VehicleModel {
  int vehicle_id = 0;
  codec::CodecParams codec;  // fine-tuned copy
  Eigen::MatrixXd latents;   // encoded local data, d x users
  Latent hash;               // mean latent of the local data
  ldpm::DenoiserParams denoiser;
  Eigen::VectorXd scores;                    // latest content scores, length K
  std::vector<caching::ContentId> ranking;   // scores ranked; a top-M list is a prefix
  int visits = 0;
  std::vector<double> loss_trajectory;       // concatenated per-episode losses
};

/// Fine-tunes the codec on the local data, encodes it, trains the denoiser
/// without distillation and derives the initial content ranking.
VehicleModel bootstrap_vehicle(int vehicle_id, const codec::CodecParams& base, const Eigen::MatrixXd& local_train,
                               const codec::CodecHyper& codec_hyper, const ProtocolConfig& config,
                               const ldpm::NoiseSchedule& sched, std::uint64_t seed);

struct Prediction {
  Eigen::MatrixXd samples;  // d x F latent samples
  Eigen::VectorXd scores;   // mean decoded reconstruction, length K
  Latent knowledge;         // mean of the samples (the uploaded KI payload)
};

Prediction predict(const VehicleModel& vehicle, const ldpm::NoiseSchedule& sched, int samples, Rng& rng);

/// First half of a visit: HI upload, and when the residence covers the compute
/// budget, neighbour search, knowledge download, training and prediction. The
/// vehicle model is updated in place; the KI pair is returned for the caller
/// to upsert at `ki.upload_time`.
struct VisitOutcome {
  bool completed = false;
  std::vector<int> neighbors;
  std::optional<Latent> integrated;
  std::optional<KIPair> ki;
  std::vector<Message> messages;  // HI, optional KNOWLEDGE_DOWN, KI
};

VisitOutcome begin_visit(VehicleModel& vehicle, KnowledgeCache& kc, double now, double residence,
                         const ProtocolConfig& config, const ldpm::NoiseSchedule& sched, std::uint64_t seed);

struct VisitResult {
  VisitOutcome outcome;
  caching::RecommendationList list;  // empty contents when the visit aborted
  ByteLedger ledger;
};

/// Whole visit in one call: begin_visit, KI upsert and list upload of length M.
VisitResult vehicle_visit(VehicleModel& vehicle, KnowledgeCache& kc, double now, double residence, int list_length,
                          const ProtocolConfig& config, const ldpm::NoiseSchedule& sched, std::uint64_t seed);

}  // namespace vecache::fd
