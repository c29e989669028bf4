#pragma once

// Daily aggregation of raw events into the fixed 37-feature vector, and the
// join of feature vectors with K10 labels. The feature order below is the
// frozen dictionary (see docs/feature-dictionary.md).

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "ewellness/dataset.hpp"
#include "ewellness/event_model.hpp"

namespace ewellness {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kActivityPeriodS = 60.0;
inline constexpr double kSpeechThresholdDb = 50.0;

inline constexpr std::size_t kCommFeatureCount = 6;
inline constexpr std::size_t kSoundFeatureCount = 15;
inline constexpr std::size_t kActivityFeatureCount = 7;
inline constexpr std::size_t kStatsFeatureCount = 7;
inline constexpr std::size_t kFeatureCount = 37;
inline constexpr int kFeatureDictionaryVersion = 1;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    // communication
    "comm_calls_in", "comm_calls_out", "comm_call_duration_s", "comm_texts_in", "comm_texts_out",
    "comm_unique_contacts",
    // location
    "loc_total_km",
    // sound
    "snd_db_min", "snd_db_max", "snd_db_mean", "snd_db_std", "snd_db_p25", "snd_db_p50", "snd_db_p75",
    "snd_hz_min", "snd_hz_max", "snd_hz_mean", "snd_hz_std", "snd_hz_p25", "snd_hz_p50", "snd_hz_p75",
    "snd_frac_above_50db",
    // activity
    "act_transitions", "act_dur_still_s", "act_dur_walking_s", "act_dur_running_s", "act_dur_in_vehicle_s",
    "act_dur_on_bicycle_s", "act_dur_unknown_s",
    // light
    "light_min", "light_max", "light_mean", "light_std", "light_p25", "light_p50", "light_p75",
    // phone use
    "screen_on_s"};

// Metric groups as contiguous ranges of the dictionary.
enum class FeatureGroup { communication, location, sound, activity, light, screen };

struct GroupRange {
  std::size_t offset;
  std::size_t count;
};

inline constexpr std::array<GroupRange, 6> kGroupRanges = {
    GroupRange{0, 6}, GroupRange{6, 1}, GroupRange{7, 15}, GroupRange{22, 7}, GroupRange{29, 7}, GroupRange{36, 1}};

inline std::vector<std::string> feature_names() { return {kFeatureNames.begin(), kFeatureNames.end()}; }

// ---------------------------------------------------------------------------
// Location

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

inline double haversine_km(GeoPoint a, GeoPoint b) {
  auto check = [](GeoPoint p) {
    if (!(p.lat >= -90.0 && p.lat <= 90.0)) throw ValidationError("lat", "out of range [-90, 90]");
    if (!(p.lon >= -180.0 && p.lon <= 180.0)) throw ValidationError("lon", "out of range [-180, 180]");
  };
  check(a);
  check(b);
  constexpr double kRad = std::numbers::pi / 180.0;
  const double s_lat = std::sin((b.lat - a.lat) * kRad / 2.0);
  const double s_lon = std::sin((b.lon - a.lon) * kRad / 2.0);
  double h = s_lat * s_lat + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

template <class T>
struct Timed {
  std::int64_t at_ms = 0;
  T value{};
};

namespace detail {

template <class T>
void require_time_ordered(std::span<const Timed<T>> xs, const char* what) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i].at_ms < xs[i - 1].at_ms) {
      throw PreconditionError(std::string(what) + ": input not sorted by time at index " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline double total_distance_km(std::span<const Timed<LocationFix>> fixes) {
  detail::require_time_ordered(fixes, "total_distance_km");
  double total = 0.0;
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    total += haversine_km({fixes[i - 1].value.lat, fixes[i - 1].value.lon}, {fixes[i].value.lat, fixes[i].value.lon});
  }
  return total;
}

// ---------------------------------------------------------------------------
// Summary statistics

struct SummaryStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population (divide by n)
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;

  std::array<double, kStatsFeatureCount> values() const { return {min, max, mean, std, p25, p50, p75}; }
};

namespace detail {

// Inclusive linear-interpolation quantile at rank q(n-1). Partially orders
// `work` in place.
inline double quantile_select(std::vector<double>& work, double q) {
  const double pos = q * static_cast<double>(work.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(lo), work.end());
  const double lo_v = work[lo];
  if (frac == 0.0 || lo + 1 >= work.size()) return lo_v;
  const double hi_v = *std::min_element(work.begin() + static_cast<std::ptrdiff_t>(lo) + 1, work.end());
  return lo_v + frac * (hi_v - lo_v);
}

}  // namespace detail

inline SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("values", "summary_stats needs at least one value");
  SummaryStats s;
  s.min = s.max = values[0];
  // Welford running mean / sum of squared deviations.
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("values", "non-finite input");
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  s.mean = mean;
  s.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
  std::vector<double> work(values.begin(), values.end());
  s.p25 = detail::quantile_select(work, 0.25);
  s.p50 = detail::quantile_select(work, 0.50);
  s.p75 = detail::quantile_select(work, 0.75);
  // Interpolation rounding must not break min <= p25 <= p50 <= p75 <= max.
  s.p25 = std::clamp(s.p25, s.min, s.max);
  s.p50 = std::clamp(s.p50, s.p25, s.max);
  s.p75 = std::clamp(s.p75, s.p50, s.max);
  return s;
}

// ---------------------------------------------------------------------------
// Metric groups

using CommFeatures = std::array<double, kCommFeatureCount>;
using SoundFeatures = std::array<double, kSoundFeatureCount>;
using ActivityFeatures = std::array<double, kActivityFeatureCount>;
using LightFeatures = std::array<double, kStatsFeatureCount>;

inline CommFeatures communication_features(std::span<const CommunicationEvent> events) {
  CommFeatures f{};
  std::set<ContactToken> contacts;
  for (const auto& e : events) {
    switch (e.kind) {
      case CommKind::call_in: f[0] += 1; f[2] += e.duration_s; break;
      case CommKind::call_out: f[1] += 1; f[2] += e.duration_s; break;
      case CommKind::text_in: f[3] += 1; break;
      case CommKind::text_out: f[4] += 1; break;
    }
    contacts.insert(e.contact);
  }
  f[5] = static_cast<double>(contacts.size());
  return f;
}

// Each sample owns the time until the next one; the last owns one nominal
// 60 s period.
inline ActivityFeatures activity_features(std::span<const Timed<ActivitySample>> samples) {
  detail::require_time_ordered(samples, "activity_features");
  ActivityFeatures f{};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && samples[i].value.activity != samples[i - 1].value.activity) f[0] += 1;
    const double dur = i + 1 < samples.size()
                           ? static_cast<double>(samples[i + 1].at_ms - samples[i].at_ms) / 1000.0
                           : kActivityPeriodS;
    f[1 + static_cast<std::size_t>(samples[i].value.activity)] += dur;
  }
  return f;
}

inline std::optional<SoundFeatures> sound_features(std::span<const AmbientSoundSample> samples) {
  if (samples.empty()) return std::nullopt;
  std::vector<double> db, hz;
  db.reserve(samples.size());
  hz.reserve(samples.size());
  std::size_t above = 0;
  for (const auto& s : samples) {
    db.push_back(s.decibels);
    hz.push_back(s.dominant_frequency_hz);
    if (s.decibels > kSpeechThresholdDb) ++above;
  }
  SoundFeatures f{};
  const auto a = summary_stats(db).values();
  const auto b = summary_stats(hz).values();
  std::copy(a.begin(), a.end(), f.begin());
  std::copy(b.begin(), b.end(), f.begin() + kStatsFeatureCount);
  f[14] = static_cast<double>(above) / static_cast<double>(samples.size());
  return f;
}

inline std::optional<LightFeatures> light_features(std::span<const LightSample> samples) {
  if (samples.empty()) return std::nullopt;
  std::vector<double> lux;
  lux.reserve(samples.size());
  for (const auto& s : samples) lux.push_back(s.lux);
  return summary_stats(lux).values();
}

// Screen-on seconds inside [bounds.start_ms, bounds.end_ms). A leading
// `off` means the screen was already on at day start; a trailing `on` is
// closed at day end.
inline double screen_time_s(std::span<const Timed<ScreenEvent>> events, DayBounds bounds) {
  detail::require_time_ordered(events, "screen_time_s");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].value.state == events[i - 1].value.state) {
      throw PreconditionError("screen_time_s: states do not alternate at index " + std::to_string(i));
    }
  }
  auto overlap = [&](std::int64_t from, std::int64_t to) {
    const std::int64_t a = std::max(from, bounds.start_ms);
    const std::int64_t b = std::min(to, bounds.end_ms);
    return b > a ? b - a : 0;
  };
  std::int64_t on_ms = 0;
  std::optional<std::int64_t> open;
  if (!events.empty() && events.front().value.state == ScreenState::off) open = bounds.start_ms;
  for (const auto& e : events) {
    if (e.value.state == ScreenState::on) {
      open = e.at_ms;
    } else if (open) {
      on_ms += overlap(*open, e.at_ms);
      open.reset();
    }
  }
  if (open) on_ms += overlap(*open, bounds.end_ms);
  return static_cast<double>(on_ms) / 1000.0;
}

// ---------------------------------------------------------------------------
// Daily vector

struct DailyFeatureVector {
  ParticipantId participant;
  LocalDay day;
  std::array<double, kFeatureCount> values{};  // 0 where missing
  std::bitset<kFeatureCount> missing;

  bool has_any() const noexcept { return !missing.all(); }
  bool operator==(const DailyFeatureVector&) const = default;
};

namespace detail {

template <std::size_t N>
void put(DailyFeatureVector& v, FeatureGroup g, const std::array<double, N>& values) {
  const auto r = kGroupRanges[static_cast<std::size_t>(g)];
  for (std::size_t i = 0; i < N; ++i) {
    v.values[r.offset + i] = values[i];
    v.missing.reset(r.offset + i);
  }
}

}  // namespace detail

// All events must belong to `participant` and fall on `day` in local time.
inline DailyFeatureVector featurize_day(const ParticipantId& participant, LocalDay day, int tz_offset_minutes,
                                        std::span<const SensorEvent> events) {
  DailyFeatureVector v;
  v.participant = participant;
  v.day = day;
  v.missing.set();

  std::vector<const SensorEvent*> ordered;
  ordered.reserve(events.size());
  for (const auto& e : events) {
    if (e.participant != participant) throw PreconditionError("featurize_day: mixed participants");
    if (e.at.tz_offset_minutes != tz_offset_minutes || e.at.local_day() != day) {
      throw PreconditionError("featurize_day: event outside local day " + day.iso());
    }
    ordered.push_back(&e);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SensorEvent* a, const SensorEvent* b) { return a->at.epoch_ms < b->at.epoch_ms; });

  std::vector<CommunicationEvent> comm;
  std::vector<Timed<LocationFix>> fixes;
  std::vector<AmbientSoundSample> sound;
  std::vector<Timed<ActivitySample>> activity;
  std::vector<LightSample> light;
  std::vector<Timed<ScreenEvent>> screen;
  for (const SensorEvent* e : ordered) {
    const auto t = e->at.epoch_ms;
    if (auto* c = std::get_if<CommunicationEvent>(&e->payload)) comm.push_back(*c);
    else if (auto* f = std::get_if<LocationFix>(&e->payload)) fixes.push_back({t, *f});
    else if (auto* s = std::get_if<AmbientSoundSample>(&e->payload)) sound.push_back(*s);
    else if (auto* a = std::get_if<ActivitySample>(&e->payload)) activity.push_back({t, *a});
    else if (auto* l = std::get_if<LightSample>(&e->payload)) light.push_back(*l);
    else if (auto* sc = std::get_if<ScreenEvent>(&e->payload)) screen.push_back({t, *sc});
  }

  if (!comm.empty()) detail::put(v, FeatureGroup::communication, communication_features(comm));
  if (!fixes.empty()) detail::put(v, FeatureGroup::location, std::array<double, 1>{total_distance_km(fixes)});
  if (auto s = sound_features(sound)) detail::put(v, FeatureGroup::sound, *s);
  if (!activity.empty()) detail::put(v, FeatureGroup::activity, activity_features(activity));
  if (auto l = light_features(light)) detail::put(v, FeatureGroup::light, *l);
  if (!screen.empty()) {
    detail::put(v, FeatureGroup::screen,
                std::array<double, 1>{screen_time_s(screen, day_bounds(day, tz_offset_minutes))});
  }
  return v;
}

// ---------------------------------------------------------------------------
// Dataset assembly

// Everything stored for one participant. `emas` is in arrival order.
struct ParticipantHistory {
  ParticipantId id;
  int tz_offset_minutes = 0;
  std::vector<SensorEvent> events;
  std::vector<K10Response> emas;
};

// Replaces missing entries with the participant's mean over the days where
// the feature is present, or 0 if it never is.
inline void impute_participant_mean(std::span<DailyFeatureVector> days) {
  std::array<double, kFeatureCount> sum{};
  std::array<std::size_t, kFeatureCount> count{};
  for (const auto& d : days) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (!d.missing.test(f)) {
        sum[f] += d.values[f];
        ++count[f];
      }
    }
  }
  for (auto& d : days) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (d.missing.test(f)) d.values[f] = count[f] > 0 ? sum[f] / static_cast<double>(count[f]) : 0.0;
    }
  }
}

// Latest response per local day, by arrival order.
inline std::map<LocalDay, const K10Response*> latest_ema_per_day(std::span<const K10Response> emas) {
  std::map<LocalDay, const K10Response*> out;
  for (const auto& r : emas) out[r.at.local_day()] = &r;
  return out;
}

// One row per (participant, local day) with both an EMA and at least one
// metric group. Rows ordered by (participant, day).
inline LabeledDataset build_dataset(std::span<const ParticipantHistory> cohort) {
  std::vector<const ParticipantHistory*> ordered;
  for (const auto& p : cohort) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const ParticipantHistory* a, const ParticipantHistory* b) { return a->id < b->id; });

  LabeledDataset ds;
  ds.feature_names = feature_names();
  ds.rows = Matrix(0, kFeatureCount);
  for (const ParticipantHistory* p : ordered) {
    const auto labels = latest_ema_per_day(p->emas);
    std::map<LocalDay, std::vector<SensorEvent>> by_day;
    for (const auto& e : p->events) {
      const LocalDay d = e.at.local_day();
      if (labels.contains(d)) by_day[d].push_back(e);
    }
    std::vector<DailyFeatureVector> days;
    std::vector<int> scores;
    for (const auto& [day, response] : labels) {
      auto it = by_day.find(day);
      if (it == by_day.end()) continue;
      auto v = featurize_day(p->id, day, p->tz_offset_minutes, it->second);
      if (!v.has_any()) continue;
      days.push_back(std::move(v));
      scores.push_back(score_k10(response->items));
    }
    impute_participant_mean(days);
    for (std::size_t i = 0; i < days.size(); ++i) {
      ds.rows.append_row(days[i].values);
      ds.k10_scores.push_back(scores[i]);
      ds.levels.push_back(categorize_k10(scores[i]));
      ds.provenance.push_back({p->id, days[i].day});
    }
  }
  return ds;
}

}  // namespace ewellness
