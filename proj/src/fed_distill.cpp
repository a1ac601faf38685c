#include "vecache/fed_distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "vecache/error.hpp"

namespace vecache::fd {

void KnowledgeCache::upsert_hi(HIPair pair) {
  const int id = pair.vehicle_id;
  hi_.insert_or_assign(id, std::move(pair));
}

void KnowledgeCache::upsert_ki(KIPair pair) {
  const int id = pair.vehicle_id;
  ki_.insert_or_assign(id, std::move(pair));
}

const HIPair* KnowledgeCache::find_hi(int vehicle_id) const {
  auto it = hi_.find(vehicle_id);
  return it == hi_.end() ? nullptr : &it->second;
}

const KIPair* KnowledgeCache::find_ki(int vehicle_id) const {
  auto it = ki_.find(vehicle_id);
  return it == ki_.end() ? nullptr : &it->second;
}

void KnowledgeCache::replace_entries(const KnowledgeCache& other) {
  hi_ = other.hi_;
  ki_ = other.ki_;
}

bool KnowledgeCache::same_entries(const KnowledgeCache& other) const {
  auto same_hi = [](const HIPair& a, const HIPair& b) {
    return a.vehicle_id == b.vehicle_id && a.upload_time == b.upload_time && a.hash == b.hash;
  };
  auto same_ki = [](const KIPair& a, const KIPair& b) {
    return a.vehicle_id == b.vehicle_id && a.upload_time == b.upload_time && a.knowledge == b.knowledge;
  };
  if (hi_.size() != other.hi_.size() || ki_.size() != other.ki_.size()) return false;
  for (const auto& [id, e] : hi_) {
    const HIPair* o = other.find_hi(id);
    if (!o || !same_hi(e, *o)) return false;
  }
  for (const auto& [id, e] : ki_) {
    const KIPair* o = other.find_ki(id);
    if (!o || !same_ki(e, *o)) return false;
  }
  return true;
}

double cosine_similarity(const Latent& a, const Latent& b) {
  if (a.size() != b.size()) throw ContractViolation("cosine_similarity: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedSimilarity("cosine similarity with a zero-norm vector");
  return a.dot(b) / (na * nb);
}

std::vector<int> find_neighbors(const KnowledgeCache& kc, int vehicle_id, int count, double gamma) {
  const HIPair* self = kc.find_hi(vehicle_id);
  if (!self) throw ProtocolError("find_neighbors: vehicle " + std::to_string(vehicle_id) + " has no HI entry");
  if (count < 1) return {};
  if (self->hash.norm() == 0.0) return {};

  std::vector<std::pair<double, int>> candidates;
  for (const auto& [id, pair] : kc.hi()) {
    if (id == vehicle_id || pair.hash.norm() == 0.0) continue;
    const double s = cosine_similarity(self->hash, pair.hash);
    if (s >= gamma) candidates.emplace_back(s, id);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (candidates.size() > static_cast<std::size_t>(count)) candidates.resize(static_cast<std::size_t>(count));
  std::vector<int> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(c.second);
  return ids;
}

std::optional<Latent> integrate_knowledge(const KnowledgeCache& kc, std::span<const int> neighbor_ids) {
  Latent sum;
  int n = 0;
  for (int id : neighbor_ids) {
    const KIPair* ki = kc.find_ki(id);
    if (!ki) continue;
    if (n == 0)
      sum = ki->knowledge;
    else
      sum += ki->knowledge;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return Latent(sum / n);
}

KnowledgeCache merge_kc(std::span<const KnowledgeCache> caches) {
  // Winner per vehicle: latest HI upload, ties to the larger rsu id.
  struct Winner {
    double time;
    int rsu;
    const KnowledgeCache* kc;
  };
  auto beats = [](double t, int rsu, const Winner& w) { return t > w.time || (t == w.time && rsu > w.rsu); };

  std::map<int, Winner> hi_winner;
  for (const auto& kc : caches) {
    for (const auto& [id, pair] : kc.hi()) {
      auto it = hi_winner.find(id);
      if (it == hi_winner.end() || beats(pair.upload_time, kc.rsu_id(), it->second))
        hi_winner[id] = Winner{pair.upload_time, kc.rsu_id(), &kc};
    }
  }
  // Vehicles with KI but no HI anywhere fall back to the latest KI.
  std::map<int, Winner> ki_only;
  for (const auto& kc : caches) {
    for (const auto& [id, pair] : kc.ki()) {
      if (hi_winner.count(id)) continue;
      auto it = ki_only.find(id);
      if (it == ki_only.end() || beats(pair.upload_time, kc.rsu_id(), it->second))
        ki_only[id] = Winner{pair.upload_time, kc.rsu_id(), &kc};
    }
  }

  KnowledgeCache merged(kMbsId);
  for (const auto& [id, w] : hi_winner) {
    merged.upsert_hi(*w.kc->find_hi(id));
    if (const KIPair* ki = w.kc->find_ki(id)) merged.upsert_ki(*ki);
  }
  for (const auto& [id, w] : ki_only) merged.upsert_ki(*w.kc->find_ki(id));
  return merged;
}

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::HI: return "HI";
    case MessageType::KI: return "KI";
    case MessageType::KnowledgeDown: return "KNOWLEDGE_DOWN";
    case MessageType::RecList: return "REC_LIST";
    case MessageType::ModelDown: return "MODEL_DOWN";
    case MessageType::ModelUp: return "MODEL_UP";
  }
  return "UNKNOWN";
}

bool is_uplink(MessageType type) {
  return type == MessageType::HI || type == MessageType::KI || type == MessageType::RecList ||
         type == MessageType::ModelUp;
}

std::string vehicle_endpoint(int vehicle_id) { return "vehicle/" + std::to_string(vehicle_id); }
std::string rsu_endpoint(int rsu_id) { return "rsu/" + std::to_string(rsu_id); }

void ByteLedger::record(Message m) {
  (is_uplink(m.type) ? uplink_ : downlink_) += m.bytes;
  messages_.push_back(std::move(m));
}

void ByteLedger::append(std::span<const Message> messages) {
  for (const auto& m : messages) record(m);
}

void ByteLedger::write_ndjson(std::ostream& out) const {
  for (const auto& m : messages_) {
    nlohmann::json j = {{"time", m.time}, {"src", m.src}, {"dst", m.dst}, {"msg_type", to_string(m.type)},
                        {"bytes", m.bytes}};
    out << j.dump() << '\n';
  }
}

namespace {

void refresh_ranking(VehicleModel& v, const Eigen::VectorXd& scores) {
  v.scores = scores;
  v.ranking = caching::rank_contents(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
}

}  // namespace

VehicleModel bootstrap_vehicle(int vehicle_id, const codec::CodecParams& base, const Eigen::MatrixXd& local_train,
                               const codec::CodecHyper& codec_hyper, const ProtocolConfig& config,
                               const ldpm::NoiseSchedule& sched, std::uint64_t seed) {
  if (local_train.cols() == 0) throw ContractViolation("bootstrap_vehicle: vehicle has no local data");
  Rng rng = make_stream(seed, {stream::kVehicleModel, static_cast<std::uint64_t>(vehicle_id)});
  VehicleModel v;
  v.vehicle_id = vehicle_id;
  v.codec = codec::fine_tune(base, local_train, codec_hyper.finetune_epochs, codec_hyper, rng);
  v.latents = codec::encode_batch(v.codec, local_train);
  v.hash = v.latents.rowwise().mean();
  v.denoiser = ldpm::init_denoiser(v.codec.latent_dim(), config.denoiser_hidden, config.embed_dim, rng);

  ldpm::DistillationContext plain = config.distill;
  plain.integrated_knowledge.reset();
  auto trained = ldpm::local_train(v.denoiser, v.latents, plain, sched, config.train, rng);
  v.denoiser = std::move(trained.params);
  v.loss_trajectory = std::move(trained.losses);

  refresh_ranking(v, predict(v, sched, config.samples, rng).scores);
  return v;
}

Prediction predict(const VehicleModel& vehicle, const ldpm::NoiseSchedule& sched, int samples, Rng& rng) {
  if (samples < 1) throw ContractViolation("predict: sample count must be >= 1");
  Prediction p;
  p.samples = ldpm::sample(vehicle.denoiser, sched, samples, rng);
  p.scores = caching::score_contents(codec::decode_batch(vehicle.codec, p.samples));
  p.knowledge = p.samples.rowwise().mean();
  return p;
}

VisitOutcome begin_visit(VehicleModel& vehicle, KnowledgeCache& kc, double now, double residence,
                         const ProtocolConfig& config, const ldpm::NoiseSchedule& sched, std::uint64_t seed) {
  const int d = static_cast<int>(vehicle.hash.size());
  const std::string me = vehicle_endpoint(vehicle.vehicle_id);
  const std::string rsu = rsu_endpoint(kc.rsu_id());

  VisitOutcome out;
  kc.upsert_hi(HIPair{vehicle.hash, vehicle.vehicle_id, now});
  out.messages.push_back(Message{now, me, rsu, MessageType::HI, wire::hi_bytes(d)});
  if (residence < config.visit_seconds) return out;

  out.neighbors = find_neighbors(kc, vehicle.vehicle_id, config.neighbors, config.gamma);
  out.integrated = integrate_knowledge(kc, out.neighbors);
  if (out.integrated)
    out.messages.push_back(Message{now, rsu, me, MessageType::KnowledgeDown, wire::knowledge_down_bytes(d)});

  Rng rng = make_stream(seed, {stream::kVehicleModel, static_cast<std::uint64_t>(vehicle.vehicle_id),
                               static_cast<std::uint64_t>(vehicle.visits) + 1});
  ldpm::DistillationContext ctx = config.distill;
  ctx.integrated_knowledge = out.integrated;
  auto trained = ldpm::local_train(vehicle.denoiser, vehicle.latents, ctx, sched, config.train, rng);
  vehicle.denoiser = std::move(trained.params);
  vehicle.loss_trajectory.insert(vehicle.loss_trajectory.end(), trained.losses.begin(), trained.losses.end());
  ++vehicle.visits;

  Prediction pred = predict(vehicle, sched, config.samples, rng);
  refresh_ranking(vehicle, pred.scores);

  const double done = now + config.visit_seconds;
  out.completed = true;
  out.ki = KIPair{std::move(pred.knowledge), vehicle.vehicle_id, done};
  out.messages.push_back(Message{done, me, rsu, MessageType::KI, wire::ki_bytes(d)});
  return out;
}

VisitResult vehicle_visit(VehicleModel& vehicle, KnowledgeCache& kc, double now, double residence, int list_length,
                          const ProtocolConfig& config, const ldpm::NoiseSchedule& sched, std::uint64_t seed) {
  if (list_length < 1) throw ContractViolation("vehicle_visit: list length must be >= 1");
  VisitResult r;
  r.outcome = begin_visit(vehicle, kc, now, residence, config, sched, seed);
  r.ledger.append(r.outcome.messages);
  r.list.vehicle_id = vehicle.vehicle_id;
  r.list.rsu_id = kc.rsu_id();
  if (!r.outcome.completed) return r;

  kc.upsert_ki(*r.outcome.ki);
  const auto m = std::min<std::size_t>(static_cast<std::size_t>(list_length), vehicle.ranking.size());
  r.list.contents.assign(vehicle.ranking.begin(), vehicle.ranking.begin() + static_cast<std::ptrdiff_t>(m));
  r.ledger.record(Message{r.outcome.ki->upload_time, vehicle_endpoint(vehicle.vehicle_id), rsu_endpoint(kc.rsu_id()),
                          MessageType::RecList, wire::rec_list_bytes(m)});
  return r;
}

}  // namespace vecache::fd
