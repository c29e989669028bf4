#pragma once

// Append-only event storage. MemoryEventStore keeps a per-participant log
// with a (local day, kind) index; SegmentFileStore adds one newline-delimited
// segment file per participant and rebuilds the index on open.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "ewellness/event_model.hpp"
#include "ewellness/featurizer.hpp"
#include "ewellness/wire.hpp"

namespace ewellness {

struct ParticipantRecord {
  ParticipantId id;
  std::string token_sha256;  // hex digest of the bearer token
  int tz_offset_minutes = 0;
  std::int64_t created_at_ms = 0;

  bool operator==(const ParticipantRecord&) const = default;
};

inline nlohmann::json to_json(const ParticipantRecord& r) {
  return {{"id", r.id.str()},
          {"token_sha256", r.token_sha256},
          {"tz_offset_min", r.tz_offset_minutes},
          {"created_at_ms", r.created_at_ms}};
}

inline ParticipantRecord participant_record_from_json(const nlohmann::json& j) {
  ParticipantRecord r;
  r.id = ParticipantId(j.at("id").get<std::string>());
  r.token_sha256 = j.at("token_sha256").get<std::string>();
  r.tz_offset_minutes = j.at("tz_offset_min").get<int>();
  r.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
  return r;
}

// Empty means every kind.
using KindFilter = std::set<EventKind>;

class EventStore {
 public:
  virtual ~EventStore() = default;

  virtual void add_participant(const ParticipantRecord& record) = 0;
  virtual std::optional<ParticipantRecord> participant(const ParticipantId& id) const = 0;
  virtual std::optional<ParticipantRecord> participant_by_token_hash(const std::string& token_sha256) const = 0;
  virtual std::vector<ParticipantRecord> participants() const = 0;

  // The whole batch becomes visible at once.
  virtual void append_events(const ParticipantId& id, std::span<const SensorEvent> events,
                             std::int64_t received_ms) = 0;
  virtual void append_ema(const ParticipantId& id, const K10Response& response, std::int64_t received_ms) = 0;

  // Timestamp-ascending; ties keep arrival order.
  virtual std::vector<SensorEvent> events(const ParticipantId& id, LocalDay from, LocalDay to,
                                          const KindFilter& kinds = {}) const = 0;
  // One response per local day (the latest to arrive), day-ascending.
  virtual std::vector<K10Response> emas(const ParticipantId& id, LocalDay from, LocalDay to) const = 0;
  // Full log in arrival order.
  virtual ParticipantHistory history(const ParticipantId& id) const = 0;

  virtual std::size_t event_count() const = 0;
};

class MemoryEventStore : public EventStore {
 public:
  void add_participant(const ParticipantRecord& record) override {
    std::unique_lock lock(mu_);
    add_locked(record);
  }

  std::optional<ParticipantRecord> participant(const ParticipantId& id) const override {
    std::shared_lock lock(mu_);
    auto it = shards_.find(id);
    if (it == shards_.end()) return std::nullopt;
    return it->second->record;
  }

  std::optional<ParticipantRecord> participant_by_token_hash(const std::string& token_sha256) const override {
    std::shared_lock lock(mu_);
    auto it = by_token_.find(token_sha256);
    if (it == by_token_.end()) return std::nullopt;
    return shards_.at(it->second)->record;
  }

  std::vector<ParticipantRecord> participants() const override {
    std::shared_lock lock(mu_);
    std::vector<ParticipantRecord> out;
    for (const auto& [id, shard] : shards_) out.push_back(shard->record);
    return out;
  }

  void append_events(const ParticipantId& id, std::span<const SensorEvent> events,
                     std::int64_t received_ms) override {
    Shard& s = shard(id);
    std::unique_lock lock(s.mu);
    persist_events(s, events, received_ms);
    for (const auto& e : events) index_event(s, e);
    total_events_.fetch_add(events.size());
  }

  void append_ema(const ParticipantId& id, const K10Response& response, std::int64_t received_ms) override {
    Shard& s = shard(id);
    std::unique_lock lock(s.mu);
    persist_ema(s, response, received_ms);
    index_ema(s, response);
  }

  std::vector<SensorEvent> events(const ParticipantId& id, LocalDay from, LocalDay to,
                                  const KindFilter& kinds = {}) const override {
    const Shard& s = shard(id);
    std::shared_lock lock(s.mu);
    std::vector<std::size_t> hits;
    for (auto it = s.days.lower_bound(from); it != s.days.end() && it->first <= to; ++it) {
      for (std::size_t k = 0; k < kEventKindCount; ++k) {
        if (!kinds.empty() && !kinds.contains(static_cast<EventKind>(k))) continue;
        const auto& idx = it->second.by_kind[k];
        hits.insert(hits.end(), idx.begin(), idx.end());
      }
    }
    std::sort(hits.begin(), hits.end());  // arrival order
    std::stable_sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
      return s.log[a].at.epoch_ms < s.log[b].at.epoch_ms;
    });
    std::vector<SensorEvent> out;
    out.reserve(hits.size());
    for (std::size_t i : hits) out.push_back(s.log[i]);
    return out;
  }

  std::vector<K10Response> emas(const ParticipantId& id, LocalDay from, LocalDay to) const override {
    const Shard& s = shard(id);
    std::shared_lock lock(s.mu);
    std::vector<K10Response> out;
    for (auto it = s.days.lower_bound(from); it != s.days.end() && it->first <= to; ++it) {
      if (it->second.latest_ema) out.push_back(s.emas[*it->second.latest_ema]);
    }
    return out;
  }

  ParticipantHistory history(const ParticipantId& id) const override {
    const Shard& s = shard(id);
    std::shared_lock lock(s.mu);
    return {s.record.id, s.record.tz_offset_minutes, s.log, s.emas};
  }

  std::size_t event_count() const override { return total_events_.load(); }

 protected:
  struct DayBucket {
    std::array<std::vector<std::size_t>, kEventKindCount> by_kind;
    std::optional<std::size_t> latest_ema;
  };

  struct Shard {
    ParticipantRecord record;
    mutable std::shared_mutex mu;  // one writer, many readers
    std::vector<SensorEvent> log;
    std::vector<K10Response> emas;
    std::map<LocalDay, DayBucket> days;
    std::ofstream segment;  // open only in file-backed stores
  };

  // Hooks for durable stores; called under the shard's writer lock, before
  // the data becomes visible.
  virtual void persist_events(Shard&, std::span<const SensorEvent>, std::int64_t) {}
  virtual void persist_ema(Shard&, const K10Response&, std::int64_t) {}
  virtual void on_new_participant(const ParticipantRecord&, Shard&) {}

  Shard& add_locked(const ParticipantRecord& record) {
    if (shards_.contains(record.id)) throw ValidationError("id", "participant already exists");
    if (by_token_.contains(record.token_sha256)) throw ValidationError("token", "token already in use");
    auto s = std::make_unique<Shard>();
    s->record = record;
    on_new_participant(record, *s);
    Shard& ref = *s;
    by_token_[record.token_sha256] = record.id;
    shards_[record.id] = std::move(s);
    return ref;
  }

  static void index_event(Shard& s, const SensorEvent& e) {
    s.log.push_back(e);
    s.days[e.at.local_day()].by_kind[static_cast<std::size_t>(kind_of(e))].push_back(s.log.size() - 1);
  }

  static void index_ema(Shard& s, const K10Response& r) {
    s.emas.push_back(r);
    s.days[r.at.local_day()].latest_ema = s.emas.size() - 1;
  }

  Shard& shard(const ParticipantId& id) const {
    std::shared_lock lock(mu_);
    auto it = shards_.find(id);
    if (it == shards_.end()) throw NotFoundError("unknown participant " + id.str());
    return *it->second;
  }

 private:
  mutable std::shared_mutex mu_;  // guards the two maps, not shard contents
  std::map<ParticipantId, std::unique_ptr<Shard>> shards_;
  std::map<std::string, ParticipantId> by_token_;
  std::atomic<std::size_t> total_events_{0};
};

// Layout under `dir`:
//   participants.ndjson   one ParticipantRecord per line
//   <id>.ndjson           {"type":"event"|"ema","received_ms":..,"record":{..}}
// A torn final line (crash mid-write) is dropped on open.
class SegmentFileStore : public MemoryEventStore {
 public:
  explicit SegmentFileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    replaying_ = true;
    trim_torn_tail(dir_ / "participants.ndjson");
    for (const auto& line : read_lines(dir_ / "participants.ndjson")) {
      Shard& s = add_locked(participant_record_from_json(line));
      trim_torn_tail(segment_path(s.record.id));
      for (const auto& rec : read_lines(segment_path(s.record.id))) {
        const auto& type = rec.at("type");
        if (type == "event") {
          index_event(s, wire::event_from_json(rec.at("record")));
          ++replayed_events_;
        } else if (type == "ema") {
          index_ema(s, wire::k10_from_json(rec.at("record")));
        }
      }
      s.segment.open(segment_path(s.record.id), std::ios::app | std::ios::binary);
    }
    replaying_ = false;
    index_.open(dir_ / "participants.ndjson", std::ios::app | std::ios::binary);
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::size_t event_count() const override { return MemoryEventStore::event_count() + replayed_events_; }

 protected:
  void on_new_participant(const ParticipantRecord& record, Shard& s) override {
    if (replaying_) return;
    index_ << to_json(record).dump() << '\n' << std::flush;
    if (!index_) throw Error("cannot write participants index");
    s.segment.open(segment_path(record.id), std::ios::app | std::ios::binary);
  }

  void persist_events(Shard& s, std::span<const SensorEvent> events, std::int64_t received_ms) override {
    std::string buf;
    for (const auto& e : events) {
      buf += nlohmann::json{{"type", "event"}, {"received_ms", received_ms}, {"record", wire::to_json(e)}}.dump();
      buf += '\n';
    }
    write(s, buf);
  }

  void persist_ema(Shard& s, const K10Response& r, std::int64_t received_ms) override {
    write(s, nlohmann::json{{"type", "ema"}, {"received_ms", received_ms}, {"record", wire::to_json(r)}}.dump() + "\n");
  }

 private:
  std::filesystem::path segment_path(const ParticipantId& id) const { return dir_ / (id.str() + ".ndjson"); }

  static void write(Shard& s, const std::string& buf) {
    s.segment << buf << std::flush;
    if (!s.segment) throw Error("cannot append to segment for " + s.record.id.str());
  }

  static std::vector<nlohmann::json> read_lines(const std::filesystem::path& path) {
    std::vector<nlohmann::json> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error("corrupt record in " + path.string());
      out.push_back(std::move(j));
    }
    return out;
  }

  // Drops bytes after the last newline so later appends start on a fresh line.
  static void trim_torn_tail(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto nl = bytes.rfind('\n');
    const std::size_t keep = nl == std::string::npos ? 0 : nl + 1;
    if (keep != bytes.size()) std::filesystem::resize_file(path, keep);
  }

  std::filesystem::path dir_;
  std::ofstream index_;
  bool replaying_ = false;
  std::size_t replayed_events_ = 0;
};

}  // namespace ewellness
