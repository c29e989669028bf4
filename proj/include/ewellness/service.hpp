#pragma once

// Ingestion service logic, independent of transport. Every operation except
// register_participant takes a bearer token; the store only ever sees the
// token's SHA-256.

#include <chrono>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ewellness/crypto.hpp"
#include "ewellness/dataset.hpp"
#include "ewellness/featurizer.hpp"
#include "ewellness/store.hpp"
#include "ewellness/wire.hpp"

namespace ewellness {

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

struct Registration {
  ParticipantRecord record;
  std::string token;  // 64 hex chars; returned once, never stored
};

struct ItemError {
  std::size_t index = 0;
  std::string message;
};

struct BatchResult {
  std::size_t accepted = 0;
  std::vector<ItemError> errors;
};

struct EmaResult {
  int score = 0;
  DistressLevel level = DistressLevel::Low;
};

inline constexpr LocalDay kFirstDay{std::numeric_limits<std::int64_t>::min() / 2};
inline constexpr LocalDay kLastDay{std::numeric_limits<std::int64_t>::max() / 2};

class IngestService {
 public:
  // An empty admin token disables admin access.
  explicit IngestService(EventStore& store, std::string admin_token = {}, Clock clock = system_now_ms)
      : store_(store), clock_(std::move(clock)) {
    if (!admin_token.empty()) admin_hash_ = hash(admin_token);
  }

  // Makes participant ids a function of (seed, registration order) so a
  // replayed ingest yields the same ids. Tokens stay random.
  void set_id_seed(std::uint64_t seed) { id_seed_ = seed; }

  Registration register_participant(int tz_offset_minutes) {
    if (tz_offset_minutes < kMinTzOffsetMinutes || tz_offset_minutes > kMaxTzOffsetMinutes) {
      throw ValidationError("tz_offset_minutes", "must be in [-720, 840]");
    }
    std::lock_guard lock(register_mu_);
    for (;;) {
      Registration r;
      r.record.id = ParticipantId("p-" + next_id_hex());
      r.token = to_hex(random_bytes(32));
      r.record.token_sha256 = hash(r.token);
      r.record.tz_offset_minutes = tz_offset_minutes;
      r.record.created_at_ms = clock_();
      if (store_.participant(r.record.id) || store_.participant_by_token_hash(r.record.token_sha256)) continue;
      store_.add_participant(r.record);
      return r;
    }
  }

  ParticipantRecord authenticate(std::string_view token) const {
    if (auto rec = store_.participant_by_token_hash(hash(token))) return *rec;
    throw AuthError("unknown token");
  }

  // Valid events are appended as one batch; invalid ones are reported by
  // index. An event naming another participant rejects the whole batch.
  BatchResult submit_event_batch(std::string_view token, const nlohmann::json& events) {
    const ParticipantRecord me = authenticate(token);
    if (!events.is_array()) throw ValidationError("events", "expected an array");
    for (const auto& e : events) {
      if (e.is_object() && e.contains("participant") && e["participant"].is_string() &&
          e["participant"].get<std::string>() != me.id.str()) {
        throw ForbiddenError("batch contains events for another participant");
      }
    }
    BatchResult result;
    std::vector<SensorEvent> valid;
    for (std::size_t i = 0; i < events.size(); ++i) {
      try {
        SensorEvent e = wire::event_from_json(events[i]);
        check_tz(me, e.at);
        valid.push_back(std::move(e));
      } catch (const ValidationError& err) {
        result.errors.push_back({i, err.what()});
      } catch (const nlohmann::json::exception& err) {
        result.errors.push_back({i, err.what()});
      }
    }
    if (!valid.empty()) store_.append_events(me.id, valid, clock_());
    result.accepted = valid.size();
    return result;
  }

  BatchResult submit_event_batch(std::string_view token, std::span<const SensorEvent> events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) arr.push_back(wire::to_json(e));
    return submit_event_batch(token, arr);
  }

  // `at_ms` is device time; the local day comes from the registered offset.
  EmaResult submit_ema(std::string_view token, std::int64_t at_ms, std::vector<int> items) {
    const ParticipantRecord me = authenticate(token);
    K10Response r{me.id, {at_ms, me.tz_offset_minutes}, std::move(items)};
    validate_k10(r);
    store_.append_ema(me.id, r, clock_());
    const int score = score_k10(r.items);
    return {score, categorize_k10(score)};
  }

  std::vector<SensorEvent> query_events(std::string_view token, const ParticipantId& who, LocalDay from,
                                        LocalDay to, const KindFilter& kinds = {}) const {
    authorize_read(token, who);
    check_range(from, to);
    return store_.events(who, from, to, kinds);
  }

  std::vector<K10Response> query_emas(std::string_view token, const ParticipantId& who, LocalDay from,
                                      LocalDay to) const {
    authorize_read(token, who);
    check_range(from, to);
    return store_.emas(who, from, to);
  }

  LabeledDataset export_dataset(std::string_view token, std::span<const ParticipantId> cohort) const {
    if (cohort.empty()) throw ValidationError("participants", "cohort is empty");
    for (const auto& id : cohort) authorize_read(token, id);
    std::vector<ParticipantHistory> histories;
    for (const auto& id : cohort) histories.push_back(store_.history(id));
    return build_dataset(histories);
  }

  const EventStore& store() const { return store_; }

 private:
  std::string next_id_hex() {
    if (!id_seed_) return to_hex(random_bytes(6));
    const auto d = sha256("participant:" + std::to_string(*id_seed_) + ":" + std::to_string(id_counter_++));
    return to_hex(std::span<const std::uint8_t>(d.data(), 6));
  }

  static std::string hash(std::string_view token) { return to_hex(sha256(token)); }

  bool is_admin(std::string_view token) const { return admin_hash_ && *admin_hash_ == hash(token); }

  void authorize_read(std::string_view token, const ParticipantId& who) const {
    if (is_admin(token)) {
      if (!store_.participant(who)) throw NotFoundError("unknown participant " + who.str());
      return;
    }
    const ParticipantRecord me = authenticate(token);
    if (me.id != who) throw ForbiddenError("token does not grant access to " + who.str());
  }

  static void check_tz(const ParticipantRecord& me, const Timestamp& at) {
    if (at.tz_offset_minutes != me.tz_offset_minutes) {
      throw ValidationError("tz_offset_min", "differs from the participant's registered offset");
    }
  }

  static void check_range(LocalDay from, LocalDay to) {
    if (to < from) throw ValidationError("to_day", "range is empty");
  }

  EventStore& store_;
  Clock clock_;
  std::optional<std::string> admin_hash_;
  std::optional<std::uint64_t> id_seed_;
  std::uint64_t id_counter_ = 0;
  std::mutex register_mu_;
};

}  // namespace ewellness
