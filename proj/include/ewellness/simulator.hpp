#pragma once

// Synthetic cohort generator. Each participant has a latent daily distress
// score (bounded random walk on [10, 50]); behaviour channels shift with it
// in a fixed direction scaled by signal_strength, and the daily K10 answers
// sum to a noisy rounding of it. Streams follow the collection cadences:
// activity every 60 s, sound every 5 min, light every 6 s (thinned to 60 s
// by default), location at most once per minute while moving.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ewellness/event_model.hpp"
#include "ewellness/featurizer.hpp"
#include "ewellness/rng.hpp"
#include "json.hpp"

namespace ewellness::sim {

struct SimConfig {
  int n_participants = 10;
  int n_days = 30;
  double signal_strength = 1.0;
  std::uint64_t seed = 42;
  int light_period_s = 60;    // 6 reproduces the full sensor cadence
  double heterogeneity = 0.1;  // spread of habitual behaviour between participants, [0, 1]
  LocalDay start_day{19723};  // 2024-01-01

  void validate() const {
    if (n_participants < 1) throw ValidationError("n_participants", "must be >= 1");
    if (n_days < 1) throw ValidationError("n_days", "must be >= 1");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
      throw ValidationError("signal_strength", "must be in [0, 1]");
    }
    if (light_period_s < 1 || light_period_s > 3600) throw ValidationError("light_period_s", "must be in [1, 3600]");
    if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) throw ValidationError("heterogeneity", "must be in [0, 1]");
  }

  nlohmann::json to_json() const {
    return {{"n_participants", n_participants}, {"n_days", n_days},         {"signal_strength", signal_strength},
            {"seed", seed},                     {"light_period_s", light_period_s}, {"heterogeneity", heterogeneity},
            {"start_day", start_day.iso()}};
  }
};

enum class Channel { calls, texts, contacts, mobility, screen, sound, light };
inline constexpr std::size_t kChannelCount = 7;

// Sign of the distress effect per channel: more distress means fewer calls,
// texts and contacts, less movement, more screen time, quieter and darker
// surroundings.
inline constexpr std::array<double, kChannelCount> kEffectDirection = {-1, -1, -1, -1, +1, -1, -1};

// Habitual behaviour. Ranges below are the population spread at
// heterogeneity 1; the configured heterogeneity shrinks them toward the
// centre value.
struct ParticipantProfile {
  ParticipantId id;
  int tz_offset_minutes = 0;
  std::uint64_t seed = 0;
  ContactSalt salt{};
  double latent_baseline = 20.0;  // [12, 30]
  double calls_per_day = 4.5;     // [2.5, 8.2]
  double texts_per_day = 15.0;    // [6, 37]
  double contact_breadth = 4.5;   // [2.7, 7.4]
  double moving_fraction = 0.11;  // [0.067, 0.18] of waking minutes
  double screen_hours = 4.0;      // [2.7, 6]
  double sound_db = 55.0;         // [45, 65]
  double sound_hz = 300.0;        // [200, 400]
  double light_lux = 300.0;       // [122, 738]
  double wake_hour = 7.5;         // [6, 9]
  GeoPoint home;
  std::array<double, kChannelCount> sensitivity{};  // signed, |s| in [0.6, 1]
  std::array<double, kChannelCount> noise{};        // day-level log noise, [0.05, 0.15]
};

struct SimDay {
  LocalDay day;
  std::vector<SensorEvent> events;  // timestamp-ascending
  K10Response ema;
};

struct SimulatedParticipant {
  ParticipantProfile profile;
  std::vector<double> latent;
  std::vector<SimDay> days;
};

inline constexpr std::array<int, 7> kTzChoices = {-480, -420, -300, 0, 60, 330, 540};

inline ParticipantProfile make_profile(const SimConfig& cfg, int index) {
  ParticipantProfile p;
  p.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
  Rng rng(p.seed);
  std::array<std::uint8_t, 5> id_bytes{};
  for (auto& b : id_bytes) b = static_cast<std::uint8_t>(rng.below(256));
  p.id = ParticipantId("sim-" + to_hex(id_bytes));
  for (auto& b : p.salt) b = static_cast<std::uint8_t>(rng.below(256));
  p.tz_offset_minutes = kTzChoices[rng.below(kTzChoices.size())];
  p.latent_baseline = rng.uniform(12.0, 30.0);
  const double h = cfg.heterogeneity;
  auto scaled = [&](double centre, double log_spread) { return centre * std::exp(h * log_spread * rng.uniform(-1.0, 1.0)); };
  auto shifted = [&](double centre, double spread) { return centre + h * spread * rng.uniform(-1.0, 1.0); };
  p.calls_per_day = scaled(4.5, 0.6);
  p.texts_per_day = scaled(15.0, 0.9);
  p.contact_breadth = scaled(4.5, 0.5);
  p.moving_fraction = scaled(0.11, 0.5);
  p.screen_hours = scaled(4.0, 0.4);
  p.sound_db = shifted(55.0, 10.0);
  p.sound_hz = shifted(300.0, 100.0);
  p.light_lux = scaled(300.0, 0.9);
  p.wake_hour = shifted(7.5, 1.5);
  p.home = {rng.uniform(-60.0, 60.0), rng.uniform(-170.0, 170.0)};
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    p.sensitivity[c] = kEffectDirection[c] * rng.uniform(0.6, 1.0);
    p.noise[c] = rng.uniform(0.05, 0.15);
  }
  return p;
}

inline std::vector<ParticipantProfile> make_profiles(const SimConfig& cfg) {
  cfg.validate();
  std::vector<ParticipantProfile> out;
  for (int i = 0; i < cfg.n_participants; ++i) out.push_back(make_profile(cfg, i));
  return out;
}

// Reflected random walk on [10, 50] with N(0, 3) steps, starting from the
// clamped profile baseline.
inline std::vector<double> latent_distress_walk(const ParticipantProfile& profile, int n_days, std::uint64_t seed) {
  std::vector<double> out;
  if (n_days < 1) return out;
  Rng rng(seed);
  double x = std::clamp(profile.latent_baseline, 10.0, 50.0);
  out.push_back(x);
  for (int d = 1; d < n_days; ++d) {
    x += rng.normal(0.0, 3.0);
    while (x < 10.0 || x > 50.0) x = x < 10.0 ? 20.0 - x : 100.0 - x;
    out.push_back(x);
  }
  return out;
}

// Ten ratings in [1, 5] summing to clamp(round(latent + N(0, 1)), 10, 50).
inline std::vector<int> k10_items_for(double latent, Rng& rng) {
  const int target = std::clamp(static_cast<int>(std::lround(latent + rng.normal(0.0, 1.0))), 10, 50);
  std::vector<int> items(kK10ItemCount, 1);
  for (int remaining = target - 10; remaining > 0; --remaining) {
    std::size_t i = rng.below(items.size());
    while (items[i] == 5) i = (i + 1) % items.size();
    ++items[i];
  }
  return items;
}

namespace detail {

inline constexpr double kEffectGain = 1.2;
inline constexpr double kMetersPerDegree = 111'195.0;

struct DayContext {
  const ParticipantProfile& p;
  LocalDay day;
  DayBounds bounds;
  std::vector<SensorEvent>& out;

  void emit(std::int64_t offset_ms, Payload payload) {
    out.push_back({p.id, {bounds.start_ms + offset_ms, p.tz_offset_minutes}, std::move(payload)});
  }
};

inline double speed_mps(Activity a) {
  switch (a) {
    case Activity::walking: return 1.4;
    case Activity::running: return 3.0;
    case Activity::on_bicycle: return 5.0;
    case Activity::in_vehicle: return 11.0;
    default: return 0.0;
  }
}

inline Activity draw_moving_activity(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.55) return Activity::walking;
  if (u < 0.85) return Activity::in_vehicle;
  if (u < 0.93) return Activity::on_bicycle;
  return Activity::running;
}

// Minute-resolution activity timeline plus the location trace it implies.
inline void activity_and_location(DayContext& ctx, Rng& rng, int wake_min, int sleep_min, double moving_fraction) {
  std::array<Activity, 1440> minute{};
  minute.fill(Activity::still);
  const double f = std::clamp(moving_fraction, 0.01, 0.6);
  const double still_mean = 40.0;
  const double moving_mean = still_mean * f / (1.0 - f);
  int t = wake_min;
  while (t < sleep_min) {
    const bool unknown = rng.bernoulli(0.05);
    int len = unknown ? 1 + static_cast<int>(rng.below(3)) : 1 + static_cast<int>(rng.exponential(still_mean));
    for (int m = t; m < std::min(t + len, sleep_min); ++m) minute[m] = unknown ? Activity::unknown : Activity::still;
    t += len;
    if (t >= sleep_min) break;
    const Activity a = draw_moving_activity(rng);
    len = 1 + static_cast<int>(rng.exponential(moving_mean));
    for (int m = t; m < std::min(t + len, sleep_min); ++m) minute[m] = a;
    t += len;
  }

  double lat = ctx.p.home.lat, lon = ctx.p.home.lon;
  double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  ctx.emit(std::int64_t{wake_min} * 60'000 + 15'000, LocationFix{lat, lon, rng.uniform(3.0, 20.0)});
  for (int m = 0; m < 1440; ++m) {
    ctx.emit(std::int64_t{m} * 60'000, ActivitySample{minute[m], rng.uniform(0.55, 1.0)});
    const double v = speed_mps(minute[m]);
    if (v <= 0.0) continue;
    const double meters = v * 60.0 * rng.uniform(0.7, 1.3);
    heading += rng.normal(0.0, 0.3);
    lat = std::clamp(lat + meters * std::cos(heading) / kMetersPerDegree, -89.0, 89.0);
    lon += meters * std::sin(heading) / (kMetersPerDegree * std::cos(lat * std::numbers::pi / 180.0));
    if (lon > 180.0) lon -= 360.0;
    if (lon < -180.0) lon += 360.0;
    ctx.emit(std::int64_t{m} * 60'000 + 30'000, LocationFix{lat, lon, rng.uniform(3.0, 20.0)});
  }
}

inline void screen_sessions(DayContext& ctx, Rng& rng, int wake_min, int sleep_min, double on_seconds) {
  const std::int64_t window_ms = std::int64_t{sleep_min - wake_min} * 60'000;
  const int n = 1 + rng.poisson(35.0);
  const std::int64_t on_ms = std::clamp<std::int64_t>(static_cast<std::int64_t>(on_seconds * 1000.0), 600'000,
                                                      window_ms - std::int64_t{n + 1} * 2'000);
  const std::int64_t idle_ms = window_ms - on_ms;
  std::vector<double> on_w(static_cast<std::size_t>(n)), gap_w(static_cast<std::size_t>(n) + 1);
  double on_sum = 0.0, gap_sum = 0.0;
  for (auto& w : on_w) on_sum += (w = rng.exponential(1.0) + 0.01);
  for (auto& w : gap_w) gap_sum += (w = rng.exponential(1.0) + 0.01);
  std::int64_t t = std::int64_t{wake_min} * 60'000;
  for (int i = 0; i < n; ++i) {
    t += std::max<std::int64_t>(1'000, static_cast<std::int64_t>(idle_ms * gap_w[i] / gap_sum));
    const std::int64_t len = std::max<std::int64_t>(1'000, static_cast<std::int64_t>(on_ms * on_w[i] / on_sum));
    if (t + len >= kMillisPerDay - 1'000) break;
    ctx.emit(t, ScreenEvent{ScreenState::on});
    t += len;
    ctx.emit(t, ScreenEvent{ScreenState::off});
  }
}

inline void communication(DayContext& ctx, Rng& rng, int wake_min, int sleep_min,
                          const std::array<double, kChannelCount>& mult) {
  const auto& p = ctx.p;
  auto at = [&] { return std::int64_t{wake_min} * 60'000 + static_cast<std::int64_t>(rng.uniform() * (sleep_min - wake_min) * 60'000.0); };
  auto contact = [&] {
    const double breadth = p.contact_breadth * mult[static_cast<std::size_t>(Channel::contacts)];
    const int index = std::min(49, static_cast<int>(rng.exponential(breadth)));
    return anonymize_contact("+1-555-" + std::to_string(p.seed % 100000) + "-" + std::to_string(index), p.salt);
  };
  const double calls = p.calls_per_day * mult[static_cast<std::size_t>(Channel::calls)];
  const double texts = p.texts_per_day * mult[static_cast<std::size_t>(Channel::texts)];
  for (auto kind : {CommKind::call_in, CommKind::call_out}) {
    for (int i = rng.poisson(calls / 2.0); i > 0; --i) {
      const double dur = 1.0 + std::round(rng.exponential(150.0));
      const auto when = at();
      ctx.emit(when, CommunicationEvent{kind, dur, contact()});
    }
  }
  for (auto kind : {CommKind::text_in, CommKind::text_out}) {
    for (int i = rng.poisson(texts / 2.0); i > 0; --i) {
      const auto when = at();
      ctx.emit(when, CommunicationEvent{kind, 0.0, contact()});
    }
  }
}

}  // namespace detail

// Channel multipliers for one day: exp(gain * effect + day noise), where
// effect = sensitivity * signal_strength * (latent - 30) / 20.
inline std::array<double, kChannelCount> channel_multipliers(const ParticipantProfile& p, double signal_strength,
                                                             double latent, Rng& rng) {
  std::array<double, kChannelCount> m{};
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const double effect = p.sensitivity[c] * signal_strength * (latent - 30.0) / 20.0;
    m[c] = std::exp(detail::kEffectGain * effect + rng.normal(0.0, p.noise[c]));
  }
  return m;
}

inline SimDay simulate_day(const ParticipantProfile& p, const SimConfig& cfg, double latent, LocalDay day) {
  Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(day.index)));
  SimDay out;
  out.day = day;
  detail::DayContext ctx{p, day, day_bounds(day, p.tz_offset_minutes), out.events};
  const auto mult = channel_multipliers(p, cfg.signal_strength, latent, rng);
  auto m = [&](Channel c) { return mult[static_cast<std::size_t>(c)]; };

  const int wake_min = std::clamp(static_cast<int>(p.wake_hour * 60.0 + rng.normal(0.0, 20.0)), 240, 660);
  const int sleep_min = std::min(1439, wake_min + 16 * 60);

  detail::activity_and_location(ctx, rng, wake_min, sleep_min, p.moving_fraction * m(Channel::mobility));

  const double day_db = p.sound_db + 8.0 * std::log(m(Channel::sound)) / detail::kEffectGain;
  for (int i = 0; i < 288; ++i) {
    const int minute = i * 5;
    const bool awake = minute >= wake_min && minute < sleep_min;
    const double db = std::clamp(awake ? rng.normal(day_db, 6.0) : rng.normal(30.0, 3.0), 0.0, 140.0);
    const double hz = std::max(20.0, rng.normal(p.sound_hz, 80.0));
    ctx.emit(std::int64_t{minute} * 60'000, AmbientSoundSample{db, hz});
  }

  const double day_lux = p.light_lux * m(Channel::light);
  for (std::int64_t s = 0; s < 86'400; s += cfg.light_period_s) {
    const double hour = static_cast<double>(s) / 3600.0;
    const bool awake = s >= wake_min * 60 && s < sleep_min * 60;
    const double daylight = std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 14.0));
    const double level = awake ? day_lux * (0.05 + daylight) : 0.5;
    ctx.emit(s * 1000, LightSample{level * std::exp(rng.normal(0.0, 0.3))});
  }

  detail::screen_sessions(ctx, rng, wake_min, sleep_min, p.screen_hours * 3600.0 * m(Channel::screen));
  detail::communication(ctx, rng, wake_min, sleep_min, mult);

  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const SensorEvent& a, const SensorEvent& b) { return a.at.epoch_ms < b.at.epoch_ms; });

  out.ema.participant = p.id;
  out.ema.at = {ctx.bounds.start_ms + 20 * 3'600'000 + static_cast<std::int64_t>(rng.below(3'600'000)),
                p.tz_offset_minutes};
  out.ema.items = k10_items_for(latent, rng);
  return out;
}

inline SimulatedParticipant simulate_participant(const ParticipantProfile& p, const SimConfig& cfg) {
  SimulatedParticipant out;
  out.profile = p;
  out.latent = latent_distress_walk(p, cfg.n_days, derive_seed(p.seed, 0xD15));
  for (int d = 0; d < cfg.n_days; ++d) {
    out.days.push_back(simulate_day(p, cfg, out.latent[static_cast<std::size_t>(d)],
                                    LocalDay{cfg.start_day.index + d}));
  }
  return out;
}

// `ids`, when given, replaces the generated participant ids (e.g. ids
// assigned by a live ingest service).
inline std::vector<SimulatedParticipant> generate_cohort(const SimConfig& cfg,
                                                         std::span<const ParticipantId> ids = {}) {
  auto profiles = make_profiles(cfg);
  if (!ids.empty() && ids.size() != profiles.size()) throw ValidationError("ids", "one id per participant expected");
  std::vector<SimulatedParticipant> out;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (!ids.empty()) profiles[i].id = ids[i];
    out.push_back(simulate_participant(profiles[i], cfg));
  }
  return out;
}

inline ParticipantHistory to_history(const SimulatedParticipant& sp) {
  ParticipantHistory h;
  h.id = sp.profile.id;
  h.tz_offset_minutes = sp.profile.tz_offset_minutes;
  for (const auto& d : sp.days) {
    h.events.insert(h.events.end(), d.events.begin(), d.events.end());
    h.emas.push_back(d.ema);
  }
  return h;
}

inline std::vector<ParticipantHistory> to_histories(std::span<const SimulatedParticipant> cohort) {
  std::vector<ParticipantHistory> out;
  for (const auto& sp : cohort) out.push_back(to_history(sp));
  return out;
}

}  // namespace ewellness::sim
