#pragma once

// Canonical data model shared by every module: sensor events, K10
// responses, distress levels, and the K10 scoring rules.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ewellness/crypto.hpp"
#include "ewellness/error.hpp"

namespace ewellness {

inline constexpr std::int64_t kMillisPerDay = 86'400'000;
inline constexpr int kMinTzOffsetMinutes = -720;
inline constexpr int kMaxTzOffsetMinutes = 840;

// Server-assigned opaque identifier. Never derived from anything personal.
class ParticipantId {
 public:
  ParticipantId() = default;
  explicit ParticipantId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }

  // 8-64 characters from the URL-safe alphabet [A-Za-z0-9_-].
  bool valid() const noexcept {
    if (value_.size() < 8 || value_.size() > 64) return false;
    return std::all_of(value_.begin(), value_.end(), [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
             c == '_';
    });
  }

  auto operator<=>(const ParticipantId&) const = default;

 private:
  std::string value_;
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Participant-local calendar day, counted in days since 1970-01-01.
struct LocalDay {
  std::int64_t index = 0;

  auto operator<=>(const LocalDay&) const = default;

  std::string iso() const {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{index}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  static LocalDay parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    const std::string s(text);
    char tail = 0;
    if (std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
      throw ValidationError("day", "expected YYYY-MM-DD, got '" + s + "'");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw ValidationError("day", "not a calendar date: '" + s + "'");
    return LocalDay{sys_days{ymd}.time_since_epoch().count()};
  }
};

// UTC [start, end) of a local day in epoch milliseconds.
struct DayBounds {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

inline DayBounds day_bounds(LocalDay day, int tz_offset_minutes) {
  const std::int64_t start = day.index * kMillisPerDay - std::int64_t{tz_offset_minutes} * 60'000;
  return {start, start + kMillisPerDay};
}

struct Timestamp {
  std::int64_t epoch_ms = 0;
  int tz_offset_minutes = 0;

  LocalDay local_day() const {
    return LocalDay{floor_div(epoch_ms + std::int64_t{tz_offset_minutes} * 60'000, kMillisPerDay)};
  }

  bool operator==(const Timestamp&) const = default;
};

using ContactToken = std::array<std::uint8_t, 16>;
using ContactSalt = std::array<std::uint8_t, 16>;

enum class CommKind { call_in, call_out, text_in, text_out };

struct CommunicationEvent {
  CommKind kind = CommKind::call_in;
  double duration_s = 0.0;  // 0 for texts
  ContactToken contact{};

  bool is_call() const noexcept { return kind == CommKind::call_in || kind == CommKind::call_out; }
  bool operator==(const CommunicationEvent&) const = default;
};

struct LocationFix {
  double lat = 0.0;
  double lon = 0.0;
  double accuracy_m = 0.0;
  bool operator==(const LocationFix&) const = default;
};

struct AmbientSoundSample {
  double decibels = 0.0;
  double dominant_frequency_hz = 0.0;
  bool operator==(const AmbientSoundSample&) const = default;
};

enum class Activity { still, walking, running, in_vehicle, on_bicycle, unknown };
inline constexpr std::size_t kActivityCount = 6;

struct ActivitySample {
  Activity activity = Activity::unknown;
  double confidence = 0.0;
  bool operator==(const ActivitySample&) const = default;
};

struct LightSample {
  double lux = 0.0;
  bool operator==(const LightSample&) const = default;
};

enum class ScreenState { on, off };

struct ScreenEvent {
  ScreenState state = ScreenState::off;
  bool operator==(const ScreenEvent&) const = default;
};

using Payload =
    std::variant<CommunicationEvent, LocationFix, AmbientSoundSample, ActivitySample, LightSample, ScreenEvent>;

struct SensorEvent {
  ParticipantId participant;
  Timestamp at;
  Payload payload;

  bool operator==(const SensorEvent&) const = default;
};

// Wire-level kind tag. Communication payloads split into four kinds.
enum class EventKind { call_in, call_out, text_in, text_out, location, sound, activity, light, screen };
inline constexpr std::size_t kEventKindCount = 9;

inline constexpr std::array<std::string_view, kEventKindCount> kEventKindNames = {
    "call_in", "call_out", "text_in", "text_out", "location", "sound", "activity", "light", "screen"};

inline std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < kEventKindNames.size(); ++i) {
    if (kEventKindNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

inline EventKind kind_of(const Payload& p) {
  struct Visitor {
    EventKind operator()(const CommunicationEvent& c) const { return static_cast<EventKind>(c.kind); }
    EventKind operator()(const LocationFix&) const { return EventKind::location; }
    EventKind operator()(const AmbientSoundSample&) const { return EventKind::sound; }
    EventKind operator()(const ActivitySample&) const { return EventKind::activity; }
    EventKind operator()(const LightSample&) const { return EventKind::light; }
    EventKind operator()(const ScreenEvent&) const { return EventKind::screen; }
  };
  return std::visit(Visitor{}, p);
}

inline EventKind kind_of(const SensorEvent& e) { return kind_of(e.payload); }

inline constexpr std::array<std::string_view, kActivityCount> kActivityNames = {
    "still", "walking", "running", "in_vehicle", "on_bicycle", "unknown"};

inline std::string_view to_string(Activity a) { return kActivityNames[static_cast<std::size_t>(a)]; }

inline std::optional<Activity> parse_activity(std::string_view name) {
  for (std::size_t i = 0; i < kActivityNames.size(); ++i) {
    if (kActivityNames[i] == name) return static_cast<Activity>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// K10

enum class DistressLevel { Low = 0, Moderate = 1, High = 2, VeryHigh = 3 };
inline constexpr int kDistressLevelCount = 4;
inline constexpr std::size_t kK10ItemCount = 10;

inline constexpr std::array<std::string_view, kDistressLevelCount> kDistressLevelNames = {"Low", "Moderate",
                                                                                          "High", "VeryHigh"};

inline std::string_view to_string(DistressLevel l) { return kDistressLevelNames[static_cast<std::size_t>(l)]; }

inline std::optional<DistressLevel> parse_distress_level(std::string_view name) {
  for (std::size_t i = 0; i < kDistressLevelNames.size(); ++i) {
    if (kDistressLevelNames[i] == name) return static_cast<DistressLevel>(i);
  }
  return std::nullopt;
}

struct K10Response {
  ParticipantId participant;
  Timestamp at;
  std::vector<int> items;

  bool operator==(const K10Response&) const = default;
};

inline void validate_k10_items(std::span<const int> items) {
  if (items.size() != kK10ItemCount) {
    throw ValidationError("items", "expected 10 items, got " + std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] < 1 || items[i] > 5) {
      throw ValidationError("items[" + std::to_string(i) + "]",
                            "rating must be in [1, 5], got " + std::to_string(items[i]));
    }
  }
}

// Sum of the ten 1-5 ratings; always in [10, 50].
inline int score_k10(std::span<const int> items) {
  validate_k10_items(items);
  int sum = 0;
  for (int v : items) sum += v;
  return sum;
}

// 10-15 Low, 16-21 Moderate, 22-29 High, 30-50 Very high.
inline DistressLevel categorize_k10(int score) {
  if (score < 10 || score > 50) {
    throw ValidationError("score", "K10 score must be in [10, 50], got " + std::to_string(score));
  }
  if (score <= 15) return DistressLevel::Low;
  if (score <= 21) return DistressLevel::Moderate;
  if (score <= 29) return DistressLevel::High;
  return DistressLevel::VeryHigh;
}

// One-way contact token: SHA-256(salt || raw) truncated to 16 bytes. The
// salt is per participant and stays on the device side.
inline ContactToken anonymize_contact(std::string_view raw_contact, const ContactSalt& salt) {
  if (raw_contact.empty()) throw ValidationError("raw_contact", "must not be empty");
  const auto digest = Sha256().update(std::span<const std::uint8_t>(salt)).update(raw_contact).finish();
  ContactToken token{};
  std::copy_n(digest.begin(), token.size(), token.begin());
  return token;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) throw ValidationError(field, "must be finite");
}

inline void require_range(double v, double lo, double hi, const char* field) {
  require_finite(v, field);
  if (v < lo || v > hi) {
    throw ValidationError(field, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                     "]: " + std::to_string(v));
  }
}

inline void require_non_negative(double v, const char* field) {
  require_finite(v, field);
  if (v < 0.0) throw ValidationError(field, "must be >= 0, got " + std::to_string(v));
}

inline void validate_participant(const ParticipantId& p) {
  if (!p.valid()) throw ValidationError("participant", "must be 8-64 URL-safe characters");
}

inline void validate_timestamp(const Timestamp& t) {
  if (t.epoch_ms < 0) throw ValidationError("at_ms", "must be >= 0");
  if (t.tz_offset_minutes < kMinTzOffsetMinutes || t.tz_offset_minutes > kMaxTzOffsetMinutes) {
    throw ValidationError("tz_offset_min", "must be in [-720, 840], got " + std::to_string(t.tz_offset_minutes));
  }
}

struct PayloadValidator {
  void operator()(const CommunicationEvent& c) const {
    require_non_negative(c.duration_s, "body.duration_s");
    if (c.is_call() && c.duration_s == 0.0) {
      throw ValidationError("body.duration_s", "calls must have a positive duration");
    }
    if (!c.is_call() && c.duration_s != 0.0) {
      throw ValidationError("body.duration_s", "texts must have duration 0");
    }
  }
  void operator()(const LocationFix& f) const {
    require_range(f.lat, -90.0, 90.0, "body.lat");
    require_range(f.lon, -180.0, 180.0, "body.lon");
    require_non_negative(f.accuracy_m, "body.accuracy_m");
  }
  void operator()(const AmbientSoundSample& s) const {
    require_range(s.decibels, 0.0, 140.0, "body.decibels");
    require_non_negative(s.dominant_frequency_hz, "body.dominant_frequency_hz");
  }
  void operator()(const ActivitySample& a) const { require_range(a.confidence, 0.0, 1.0, "body.confidence"); }
  void operator()(const LightSample& l) const { require_non_negative(l.lux, "body.lux"); }
  void operator()(const ScreenEvent&) const {}
};

}  // namespace detail

// Returns the event unchanged iff every field invariant holds.
inline const SensorEvent& validate_event(const SensorEvent& event) {
  detail::validate_participant(event.participant);
  detail::validate_timestamp(event.at);
  std::visit(detail::PayloadValidator{}, event.payload);
  return event;
}

inline const K10Response& validate_k10(const K10Response& response) {
  detail::validate_participant(response.participant);
  detail::validate_timestamp(response.at);
  validate_k10_items(response.items);
  return response;
}

}  // namespace ewellness
