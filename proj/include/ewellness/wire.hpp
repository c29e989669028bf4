#pragma once

// JSON wire schema for events and EMA responses. The same encoding is used
// on the HTTP API, in exported event files, and in store segment files.
//
//   {"participant": "...", "at_ms": int, "tz_offset_min": int,
//    "kind": "call_in|call_out|text_in|text_out|location|sound|activity|light|screen",
//    "body": {...}}

#include <string>

#include "ewellness/event_model.hpp"
#include "json.hpp"

namespace ewellness::wire {

using json = nlohmann::json;

namespace detail {

inline const json& field(const json& obj, const char* name, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path.empty() ? "$" : path, "expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ValidationError(path.empty() ? name : path + "." + name, "missing");
  return *it;
}

inline double number(const json& obj, const char* name, const std::string& path) {
  const json& v = field(obj, name, path);
  if (!v.is_number()) throw ValidationError(path.empty() ? name : path + "." + name, "expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& obj, const char* name, const std::string& path) {
  const json& v = field(obj, name, path);
  if (!v.is_number_integer()) throw ValidationError(path.empty() ? name : path + "." + name, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string string(const json& obj, const char* name, const std::string& path) {
  const json& v = field(obj, name, path);
  if (!v.is_string()) throw ValidationError(path.empty() ? name : path + "." + name, "expected a string");
  return v.get<std::string>();
}

struct BodyWriter {
  json operator()(const CommunicationEvent& c) const {
    return {{"duration_s", c.duration_s}, {"contact_token", to_hex(c.contact)}};
  }
  json operator()(const LocationFix& f) const {
    return {{"lat", f.lat}, {"lon", f.lon}, {"accuracy_m", f.accuracy_m}};
  }
  json operator()(const AmbientSoundSample& s) const {
    return {{"decibels", s.decibels}, {"dominant_frequency_hz", s.dominant_frequency_hz}};
  }
  json operator()(const ActivitySample& a) const {
    return {{"activity", std::string(to_string(a.activity))}, {"confidence", a.confidence}};
  }
  json operator()(const LightSample& l) const { return {{"lux", l.lux}}; }
  json operator()(const ScreenEvent& s) const { return {{"state", s.state == ScreenState::on ? "on" : "off"}}; }
};

inline Payload read_body(EventKind kind, const json& body) {
  const std::string p = "body";
  switch (kind) {
    case EventKind::call_in:
    case EventKind::call_out:
    case EventKind::text_in:
    case EventKind::text_out: {
      CommunicationEvent c;
      c.kind = static_cast<CommKind>(kind);
      c.duration_s = number(body, "duration_s", p);
      if (!from_hex(string(body, "contact_token", p), c.contact)) {
        throw ValidationError("body.contact_token", "expected 32 hex characters");
      }
      return c;
    }
    case EventKind::location:
      return LocationFix{number(body, "lat", p), number(body, "lon", p), number(body, "accuracy_m", p)};
    case EventKind::sound:
      return AmbientSoundSample{number(body, "decibels", p), number(body, "dominant_frequency_hz", p)};
    case EventKind::activity: {
      const auto a = parse_activity(string(body, "activity", p));
      if (!a) throw ValidationError("body.activity", "unknown activity");
      return ActivitySample{*a, number(body, "confidence", p)};
    }
    case EventKind::light:
      return LightSample{number(body, "lux", p)};
    case EventKind::screen: {
      const std::string s = string(body, "state", p);
      if (s != "on" && s != "off") throw ValidationError("body.state", "expected 'on' or 'off'");
      return ScreenEvent{s == "on" ? ScreenState::on : ScreenState::off};
    }
  }
  throw ValidationError("kind", "unhandled kind");
}

inline int tz_field(const json& obj) {
  const std::int64_t tz = integer(obj, "tz_offset_min", "");
  if (tz < kMinTzOffsetMinutes || tz > kMaxTzOffsetMinutes) {
    throw ValidationError("tz_offset_min", "must be in [-720, 840]");
  }
  return static_cast<int>(tz);
}

}  // namespace detail

inline json to_json(const SensorEvent& e) {
  json j;
  j["participant"] = e.participant.str();
  j["at_ms"] = e.at.epoch_ms;
  j["tz_offset_min"] = e.at.tz_offset_minutes;
  j["kind"] = std::string(to_string(kind_of(e)));
  j["body"] = std::visit(detail::BodyWriter{}, e.payload);
  return j;
}

// Decodes and validates; errors carry the field path.
inline SensorEvent event_from_json(const json& j) {
  SensorEvent e;
  e.participant = ParticipantId(detail::string(j, "participant", ""));
  e.at.epoch_ms = detail::integer(j, "at_ms", "");
  e.at.tz_offset_minutes = detail::tz_field(j);
  const auto kind = parse_event_kind(detail::string(j, "kind", ""));
  if (!kind) throw ValidationError("kind", "unknown event kind");
  e.payload = detail::read_body(*kind, detail::field(j, "body", ""));
  validate_event(e);
  return e;
}

inline json to_json(const K10Response& r) {
  json j;
  j["participant"] = r.participant.str();
  j["at_ms"] = r.at.epoch_ms;
  j["tz_offset_min"] = r.at.tz_offset_minutes;
  j["items"] = r.items;
  return j;
}

inline K10Response k10_from_json(const json& j) {
  K10Response r;
  r.participant = ParticipantId(detail::string(j, "participant", ""));
  r.at.epoch_ms = detail::integer(j, "at_ms", "");
  r.at.tz_offset_minutes = detail::tz_field(j);
  const json& items = detail::field(j, "items", "");
  if (!items.is_array()) throw ValidationError("items", "expected an array");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].is_number_integer()) throw ValidationError("items[" + std::to_string(i) + "]", "expected an integer");
    r.items.push_back(items[i].get<int>());
  }
  validate_k10(r);
  return r;
}

}  // namespace ewellness::wire
