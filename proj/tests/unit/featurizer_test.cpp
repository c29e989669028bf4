#include <gtest/gtest.h>

#include <sstream>

#include "ewellness/dataset.hpp"
#include "ewellness/featurizer.hpp"
#include "ewellness/rng.hpp"
#include "ewellness/simulator.hpp"
#include "oracles.hpp"

using namespace ewellness;

namespace {

const ParticipantId kAlice("p-alice-0001");
const LocalDay kDay = LocalDay::parse("2024-03-10");
constexpr int kTz = 120;

std::int64_t at(int minute) { return day_bounds(kDay, kTz).start_ms + std::int64_t{minute} * 60'000; }

SensorEvent ev(int minute, Payload p) { return {kAlice, {at(minute), kTz}, std::move(p)}; }

ContactToken token(std::uint8_t b) {
  ContactToken t{};
  t.fill(b);
  return t;
}

void expect_stats(const SummaryStats& s, const oracle::Stats& o, double rel) {
  EXPECT_TRUE(oracle::close_rel(s.min, o.min, rel));
  EXPECT_TRUE(oracle::close_rel(s.max, o.max, rel));
  EXPECT_TRUE(oracle::close_rel(s.mean, o.mean, rel));
  EXPECT_TRUE(oracle::close_rel(s.std, o.std, rel));
  EXPECT_TRUE(oracle::close_rel(s.p25, o.p25, rel));
  EXPECT_TRUE(oracle::close_rel(s.p50, o.p50, rel));
  EXPECT_TRUE(oracle::close_rel(s.p75, o.p75, rel));
}

}  // namespace

TEST(Dictionary, ShapeAndGroups) {
  EXPECT_EQ(kFeatureNames.size(), 37u);
  std::size_t next = 0;
  for (const auto& g : kGroupRanges) {
    EXPECT_EQ(g.offset, next);
    next += g.count;
  }
  EXPECT_EQ(next, kFeatureCount);
  EXPECT_EQ(kFeatureNames[6], "loc_total_km");
  EXPECT_EQ(kFeatureNames[21], "snd_frac_above_50db");
  EXPECT_EQ(kFeatureNames[36], "screen_on_s");
  std::set<std::string_view> unique(kFeatureNames.begin(), kFeatureNames.end());
  EXPECT_EQ(unique.size(), kFeatureCount);
}

TEST(Haversine, AnalyticArcs) {
  const double r = kEarthRadiusKm;
  EXPECT_EQ(haversine_km({12.5, 33.0}, {12.5, 33.0}), 0.0);
  EXPECT_TRUE(oracle::close_rel(haversine_km({0, 0}, {0, 180}), std::numbers::pi * r, 1e-6));
  EXPECT_TRUE(oracle::close_rel(haversine_km({0, 0}, {0, 1}), 2 * std::numbers::pi * r / 360.0, 1e-6));
  EXPECT_NEAR(haversine_km({0, 0}, {0, 1}), 111.195, 1e-3);
  EXPECT_THROW(haversine_km({91, 0}, {0, 0}), ValidationError);
  EXPECT_THROW(haversine_km({0, 0}, {0, 181}), ValidationError);
}

TEST(Haversine, AgreesWithChordFormula) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    GeoPoint a{rng.uniform(-90, 90), rng.uniform(-180, 180)}, b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    EXPECT_NEAR(haversine_km(a, b), oracle::great_circle_km(a.lat, a.lon, b.lat, b.lon, kEarthRadiusKm), 1e-6);
  }
}

TEST(Distance, EmptySingleAndCollinear) {
  std::vector<Timed<LocationFix>> fixes;
  EXPECT_EQ(total_distance_km(fixes), 0.0);
  fixes.push_back({0, {0, 0, 5}});
  EXPECT_EQ(total_distance_km(fixes), 0.0);
  fixes.push_back({1, {0, 0.001, 5}});
  fixes.push_back({2, {0, 0.002, 5}});
  const double expected = 2.0 * 2.0 * std::numbers::pi * kEarthRadiusKm / 360.0 * 0.001;
  EXPECT_TRUE(oracle::close_rel(total_distance_km(fixes), expected, 1e-6));
  EXPECT_NEAR(total_distance_km(fixes), 2 * 0.111195, 1e-6);
}

TEST(Distance, RejectsUnsortedAndSplitsAdditively) {
  Rng rng(9);
  std::vector<Timed<LocationFix>> trace;
  for (int i = 0; i < 50; ++i) trace.push_back({i * 60'000LL, {rng.uniform(40, 41), rng.uniform(-74, -73), 5}});
  const double whole = total_distance_km(trace);
  for (std::size_t cut = 1; cut < trace.size(); ++cut) {
    std::span<const Timed<LocationFix>> s(trace);
    const double parts = total_distance_km(s.first(cut)) + total_distance_km(s.subspan(cut - 1));
    EXPECT_NEAR(parts, whole, 1e-9);
  }
  std::swap(trace[3], trace[17]);
  EXPECT_THROW(total_distance_km(trace), PreconditionError);
}

TEST(Stats, WorkedExamples) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summary_stats(v);
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 4);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, 1.118034, 1e-6);
  EXPECT_EQ(s.p25, 1.75);
  EXPECT_EQ(s.p50, 2.5);
  EXPECT_EQ(s.p75, 3.25);

  const auto one = summary_stats(std::vector<double>{7});
  EXPECT_EQ(one.values(), (std::array<double, 7>{7, 7, 7, 0, 7, 7, 7}));
  const auto flat = summary_stats(std::vector<double>{5, 5, 5, 5});
  EXPECT_EQ(flat.std, 0);
  EXPECT_EQ(flat.p25, 5);
  EXPECT_EQ(flat.p75, 5);
}

TEST(Stats, ErrorsAndOracle) {
  EXPECT_THROW(summary_stats(std::vector<double>{}), ValidationError);
  EXPECT_THROW(summary_stats(std::vector<double>{1, INFINITY}), ValidationError);
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.below(300));
    for (double& x : v) x = rng.normal(50, 20);
    const auto s = summary_stats(v);
    expect_stats(s, oracle::stats(v), 1e-9);
    EXPECT_LE(s.min, s.p25);
    EXPECT_LE(s.p25, s.p50);
    EXPECT_LE(s.p50, s.p75);
    EXPECT_LE(s.p75, s.max);
  }
}

TEST(Communication, Counts) {
  EXPECT_EQ(communication_features({}), CommFeatures{});
  std::vector<CommunicationEvent> e = {{CommKind::call_out, 120, token(1)},
                                       {CommKind::call_out, 60, token(1)},
                                       {CommKind::text_in, 0, token(1)}};
  EXPECT_EQ(communication_features(e), (CommFeatures{0, 2, 180, 1, 0, 1}));
  std::vector<CommunicationEvent> three = {{CommKind::call_in, 1, token(1)},
                                           {CommKind::call_in, 1, token(2)},
                                           {CommKind::call_out, 1, token(3)}};
  EXPECT_EQ(communication_features(three)[5], 3);
}

TEST(ActivityTest, GapRuleWithTail) {
  using A = Activity;
  std::vector<Timed<ActivitySample>> s = {
      {0, {A::still, 1}}, {60'000, {A::still, 1}}, {120'000, {A::walking, 1}}, {180'000, {A::still, 1}}};
  const auto f = activity_features(s);
  EXPECT_EQ(f[0], 2);
  EXPECT_EQ(f[1 + static_cast<int>(A::still)], 180);
  EXPECT_EQ(f[1 + static_cast<int>(A::walking)], 60);

  const auto single = activity_features(std::vector<Timed<ActivitySample>>{{5, {A::running, 0.5}}});
  EXPECT_EQ(single[0], 0);
  EXPECT_EQ(single[1 + static_cast<int>(A::running)], 60);
  EXPECT_EQ(activity_features({}), ActivityFeatures{});

  // Dropped sample: the gap before it is owned by the previous sample.
  std::vector<Timed<ActivitySample>> gap = {{0, {A::in_vehicle, 1}}, {300'000, {A::still, 1}}};
  const auto g = activity_features(gap);
  EXPECT_EQ(g[1 + static_cast<int>(A::in_vehicle)], 300);
  double total = 0;
  for (std::size_t i = 1; i < g.size(); ++i) total += g[i];
  EXPECT_EQ(total, 360);
  std::swap(gap[0], gap[1]);
  EXPECT_THROW(activity_features(gap), PreconditionError);
}

TEST(Sound, ThresholdIsStrict) {
  EXPECT_FALSE(sound_features({}).has_value());
  const auto f = sound_features(std::vector<AmbientSoundSample>{{40, 100}, {60, 300}});
  EXPECT_EQ((*f)[14], 0.5);
  EXPECT_EQ((*sound_features(std::vector<AmbientSoundSample>(5, {49, 100})))[14], 0.0);
  EXPECT_EQ((*sound_features(std::vector<AmbientSoundSample>(5, {50, 100})))[14], 0.0);
}

TEST(Sound, DayOfSamplesMatchesOracle) {
  Rng rng(4);
  std::vector<AmbientSoundSample> s(288);
  std::vector<double> db, hz;
  for (auto& x : s) {
    x = {rng.uniform(30, 80), rng.uniform(80, 900)};
    db.push_back(x.decibels);
    hz.push_back(x.dominant_frequency_hz);
  }
  const auto f = *sound_features(s);
  const auto o1 = oracle::stats(db), o2 = oracle::stats(hz);
  const std::array<double, 14> expect = {o1.min, o1.max, o1.mean, o1.std, o1.p25, o1.p50, o1.p75,
                                         o2.min, o2.max, o2.mean, o2.std, o2.p25, o2.p50, o2.p75};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_TRUE(oracle::close_rel(f[i], expect[i], 1e-9)) << i;
}

TEST(Light, ConstantAndZero) {
  EXPECT_FALSE(light_features({}).has_value());
  const auto c = *light_features(std::vector<LightSample>(10, {300}));
  EXPECT_EQ(c[0], 300);
  EXPECT_EQ(c[1], 300);
  EXPECT_EQ(c[2], 300);
  EXPECT_EQ(c[3], 0);
  EXPECT_EQ(*light_features(std::vector<LightSample>{{0}}), LightFeatures{});
}

TEST(Screen, IntervalsAndMidnight) {
  const auto b = day_bounds(kDay, kTz);
  using S = ScreenState;
  EXPECT_EQ(screen_time_s({}, b), 0.0);
  const std::vector<Timed<ScreenEvent>> simple = {{b.start_ms + 1000, {S::on}}, {b.start_ms + 301'000, {S::off}}};
  EXPECT_EQ(screen_time_s(simple, b), 300.0);

  const auto next = day_bounds(LocalDay{kDay.index + 1}, kTz);
  const std::vector<Timed<ScreenEvent>> across = {{b.end_ms - 600'000, {S::on}}, {b.end_ms + 600'000, {S::off}}};
  EXPECT_EQ(screen_time_s(across, b), 600.0);
  EXPECT_EQ(screen_time_s(across, next), 600.0);
  // Per-day slices as featurize_day sees them.
  EXPECT_EQ(screen_time_s(std::span(across).first(1), b), 600.0);
  EXPECT_EQ(screen_time_s(std::span(across).subspan(1), next), 600.0);

  const std::vector<Timed<ScreenEvent>> twice = {{b.start_ms, {S::on}}, {b.start_ms + 10, {S::on}}};
  EXPECT_THROW(screen_time_s(twice, b), PreconditionError);
}

TEST(FeaturizeDay, MissingGroups) {
  const auto none = featurize_day(kAlice, kDay, kTz, {});
  EXPECT_TRUE(none.missing.all());
  EXPECT_FALSE(none.has_any());

  std::vector<SensorEvent> loc = {ev(10, LocationFix{1, 1, 3}), ev(11, LocationFix{1, 1.01, 3})};
  const auto v = featurize_day(kAlice, kDay, kTz, loc);
  EXPECT_EQ(v.missing.count(), 36u);
  EXPECT_FALSE(v.missing.test(6));
  EXPECT_GT(v.values[6], 1.0);
}

TEST(FeaturizeDay, PreconditionsAndOrderIndependence) {
  std::vector<SensorEvent> events = {ev(5, LightSample{1}), ev(1, ActivitySample{Activity::still, 1}),
                                     ev(3, ActivitySample{Activity::walking, 1})};
  const auto a = featurize_day(kAlice, kDay, kTz, events);
  std::reverse(events.begin(), events.end());
  EXPECT_EQ(featurize_day(kAlice, kDay, kTz, events), a);

  auto other = events;
  other[0].participant = ParticipantId("p-bob-00001");
  EXPECT_THROW(featurize_day(kAlice, kDay, kTz, other), PreconditionError);
  auto late = events;
  late[0].at.epoch_ms = at(24 * 60);
  EXPECT_THROW(featurize_day(kAlice, kDay, kTz, late), PreconditionError);
}

TEST(FeaturizeDay, EqualsCompositionOfGroupOps) {
  sim::SimConfig cfg;
  cfg.n_participants = 3;
  cfg.n_days = 4;
  cfg.seed = 17;
  for (const auto& p : sim::generate_cohort(cfg)) {
    for (const auto& d : p.days) {
      std::vector<CommunicationEvent> comm;
      std::vector<Timed<LocationFix>> fixes;
      std::vector<AmbientSoundSample> sound;
      std::vector<Timed<ActivitySample>> act;
      std::vector<LightSample> light;
      std::vector<Timed<ScreenEvent>> screen;
      for (const auto& e : d.events) {
        std::visit(
            [&](const auto& x) {
              using T = std::decay_t<decltype(x)>;
              if constexpr (std::is_same_v<T, CommunicationEvent>) comm.push_back(x);
              if constexpr (std::is_same_v<T, LocationFix>) fixes.push_back({e.at.epoch_ms, x});
              if constexpr (std::is_same_v<T, AmbientSoundSample>) sound.push_back(x);
              if constexpr (std::is_same_v<T, ActivitySample>) act.push_back({e.at.epoch_ms, x});
              if constexpr (std::is_same_v<T, LightSample>) light.push_back(x);
              if constexpr (std::is_same_v<T, ScreenEvent>) screen.push_back({e.at.epoch_ms, x});
            },
            e.payload);
      }
      std::vector<double> expect;
      for (double x : communication_features(comm)) expect.push_back(x);
      expect.push_back(total_distance_km(fixes));
      for (double x : *sound_features(sound)) expect.push_back(x);
      for (double x : activity_features(act)) expect.push_back(x);
      for (double x : *light_features(light)) expect.push_back(x);
      expect.push_back(screen_time_s(screen, day_bounds(d.day, p.profile.tz_offset_minutes)));

      const auto v = featurize_day(p.profile.id, d.day, p.profile.tz_offset_minutes, d.events);
      ASSERT_TRUE(v.missing.none());
      for (std::size_t i = 0; i < kFeatureCount; ++i) EXPECT_EQ(v.values[i], expect[i]) << kFeatureNames[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset assembly

namespace {

K10Response ema(int minute, int item) { return {kAlice, {at(minute), kTz}, std::vector<int>(10, item)}; }

}  // namespace

TEST(BuildDataset, LabelsJoinImputeAndOrder) {
  ParticipantHistory h{kAlice, kTz, {}, {}};
  // Day 0: light only. Day 1: light + screen. Day 2: EMA but no events.
  h.events.push_back(ev(60, LightSample{100}));
  h.events.push_back(ev(24 * 60 + 60, LightSample{300}));
  h.events.push_back(ev(24 * 60 + 61, ScreenEvent{ScreenState::on}));
  h.events.push_back(ev(24 * 60 + 71, ScreenEvent{ScreenState::off}));
  h.events.push_back(ev(3 * 24 * 60 + 5, LightSample{50}));  // data, no label
  h.emas = {ema(20 * 60, 2), ema(24 * 60 + 20 * 60, 3), ema(2 * 24 * 60 + 100, 4),
            ema(21 * 60, 1)};  // later response replaces day 0's first

  const std::vector<ParticipantHistory> cohort{h};
  const auto ds = build_dataset(cohort);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.k10_scores, (std::vector<int>{10, 30}));
  EXPECT_EQ(ds.levels, (std::vector<DistressLevel>{DistressLevel::Low, DistressLevel::VeryHigh}));
  EXPECT_EQ(ds.provenance[0].day, kDay);
  EXPECT_EQ(ds.provenance[1].day.index, kDay.index + 1);
  EXPECT_EQ(ds.rows(0, 29), 100);
  EXPECT_EQ(ds.rows(0, 36), 600);  // imputed from day 1
  EXPECT_EQ(ds.rows(1, 36), 600);
  EXPECT_EQ(ds.rows(0, 0), 0);  // never present: 0
  ds.validate();
}

TEST(BuildDataset, ParticipantWithoutEmasContributesNothing) {
  ParticipantHistory h{kAlice, kTz, {ev(5, LightSample{1})}, {}};
  EXPECT_TRUE(build_dataset(std::vector<ParticipantHistory>{h}).empty());
}

TEST(BuildDataset, SimulatedCohortIsCompleteAndDeterministic) {
  sim::SimConfig cfg;
  cfg.n_participants = 3;
  cfg.n_days = 8;
  const auto a = build_dataset(sim::to_histories(sim::generate_cohort(cfg)));
  const auto b = build_dataset(sim::to_histories(sim::generate_cohort(cfg)));
  EXPECT_EQ(a.size(), 24u);
  EXPECT_EQ(a.rows.cols(), 37u);
  EXPECT_EQ(dataset_json_string(a), dataset_json_string(b));
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto& p = a.provenance[i - 1];
    const auto& q = a.provenance[i];
    EXPECT_TRUE(p.participant < q.participant || (p.participant == q.participant && p.day < q.day));
  }
}

TEST(DatasetFiles, JsonAndCsvRoundTrip) {
  sim::SimConfig cfg;
  cfg.n_participants = 2;
  cfg.n_days = 3;
  const auto ds = build_dataset(sim::to_histories(sim::generate_cohort(cfg)));
  EXPECT_EQ(dataset_from_json(nlohmann::json::parse(dataset_json_string(ds))), ds);
  const auto csv = dataset_csv_string(ds);
  EXPECT_EQ(csv.substr(0, csv.find('\n')).substr(0, 14), "comm_calls_in,");
  EXPECT_NE(csv.find(",k10_score,level,participant,day\n"), std::string::npos);
  std::istringstream in(csv);
  EXPECT_EQ(dataset_from_csv(in), ds);
}

TEST(DatasetFiles, ValidateCatchesInconsistentLabels) {
  sim::SimConfig cfg;
  cfg.n_participants = 1;
  cfg.n_days = 2;
  auto ds = build_dataset(sim::to_histories(sim::generate_cohort(cfg)));
  ds.levels[0] = ds.levels[0] == DistressLevel::Low ? DistressLevel::High : DistressLevel::Low;
  EXPECT_THROW(ds.validate(), ValidationError);
}
