#include <gtest/gtest.h>

#include <numeric>

#include "ewellness/ml/evaluate.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ewellness;
using namespace ewellness::ml;

namespace {

LabeledDataset tiny(std::vector<std::vector<double>> rows, std::vector<int> scores, std::vector<std::string> who) {
  LabeledDataset ds;
  for (std::size_t j = 0; j < rows[0].size(); ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.rows = Matrix(0, rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.rows.append_row(rows[i]);
    ds.k10_scores.push_back(scores[i]);
    ds.levels.push_back(categorize_k10(scores[i]));
    ds.provenance.push_back({ParticipantId(who[i]), LocalDay{static_cast<std::int64_t>(i)}});
  }
  return ds;
}

std::vector<int> labels_of(const std::vector<std::size_t>& counts) {
  std::vector<int> y;
  for (std::size_t c = 0; c < counts.size(); ++c) y.insert(y.end(), counts[c], static_cast<int>(c));
  return y;
}

double accuracy(std::span<const int> a, std::span<const int> b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

ModelSpec spec_for(ModelFamily f, std::uint64_t seed = 42) {
  ModelSpec s;
  s.family = f;
  s.seed = seed;
  return s;
}

constexpr std::array<ModelFamily, 4> kFamilies = {ModelFamily::knn, ModelFamily::extra_trees, ModelFamily::svm,
                                                  ModelFamily::mlp};

}  // namespace

// ---------------------------------------------------------------------------
// Normalization

TEST(Normalize, PerParticipantPopulationStd) {
  const auto ds = tiny({{1, 5}, {2, 5}, {3, 5}, {10, 1}, {20, 2}}, {10, 10, 10, 10, 10},
                       {"p-aaaaaaaa", "p-aaaaaaaa", "p-aaaaaaaa", "p-bbbbbbbb", "p-bbbbbbbb"});
  const auto [z, params] = zscore_normalize(ds);
  EXPECT_NEAR(z.rows(0, 0), -1.224745, 1e-6);
  EXPECT_NEAR(z.rows(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(z.rows(2, 0), 1.224745, 1e-6);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(z.rows(r, 1), 0.0);  // constant within participant
  EXPECT_NEAR(z.rows(3, 0), -1.0, 1e-12);
  EXPECT_EQ(params.per_participant.size(), 2u);
}

TEST(Normalize, GlobalRoundTripAndFallback) {
  const auto ds = fixture::labeled({20, 20}, 6, 3);
  const auto [z, params] = zscore_normalize(ds, NormScope::global);
  const auto back = invert_normalization(params, z);
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(back.rows(r, c), ds.rows(r, c), 1e-9);

  // A participant unseen at fit time is scaled with the global stats.
  const auto fitted = fit_normalization(ds, NormScope::per_participant);
  auto stranger = ds.subset(std::vector<std::size_t>{0});
  stranger.provenance[0].participant = ParticipantId("p-stranger-1");
  const auto zs = apply_normalization(fitted, stranger);
  EXPECT_NEAR(zs.rows(0, 0), (ds.rows(0, 0) - fitted.global.mean[0]) / fitted.global.std[0], 1e-12);
  EXPECT_THROW(zscore_normalize(LabeledDataset{}), ValidationError);
}

// ---------------------------------------------------------------------------
// Selection

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  EXPECT_NEAR(pearson_r(x, x), 1.0, 1e-12);
  std::vector<double> neg;
  for (double v : x) neg.push_back(-2 * v + 7);
  EXPECT_NEAR(pearson_r(x, neg), -1.0, 1e-12);
  EXPECT_NEAR(pearson_r(x, y), 0.8, 1e-9);
  EXPECT_NEAR(pearson_r(x, y), oracle::pearson(x, y), 1e-12);
  EXPECT_EQ(pearson_r(x, std::vector<double>(4, 2.0)), 0.0);
  EXPECT_THROW(pearson_r(x, std::vector<double>{1, 2}), ValidationError);
  EXPECT_THROW(pearson_r(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST(Select, KeepsAllAndRanksExactFeatureFirst) {
  auto ds = fixture::labeled({30, 30, 30}, 5, 8);
  EXPECT_EQ(select_top_k(ds, 99).names.size(), 5u);
  for (std::size_t r = 0; r < ds.size(); ++r) ds.rows(r, 3) = ds.k10_scores[r];
  const auto s = select_top_k(ds, 2);
  EXPECT_EQ(s.names.front(), "f3");
  EXPECT_EQ(s.dataset.rows.cols(), 2u);
  EXPECT_THROW(select_top_k(ds, 0), ValidationError);
}

TEST(Select, TiesFollowDictionaryOrder) {
  auto ds = fixture::labeled({10, 10}, 4, 2);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < 4; ++c) ds.rows(r, c) = 1.0;  // all r = 0
  }
  EXPECT_EQ(select_top_k(ds, 4).columns, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Select, PlantedSignalSurvives) {
  // 5 columns carry the score plus noise, 32 are pure noise.
  Rng rng(77);
  auto ds = fixture::labeled({75, 75, 75, 75}, 37, 77);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < 5; ++c) ds.rows(r, 10 + c * 5) = 0.15 * ds.k10_scores[r] + rng.normal(0, 1.5);
  }
  const auto s = select_top_k(ds, 25);
  int hits = 0;
  for (std::size_t c = 0; c < 5; ++c) hits += std::count(s.columns.begin(), s.columns.end(), 10 + c * 5);
  EXPECT_GE(hits, 4);
}

TEST(Select, InvariantToColumnPermutation) {
  const auto ds = fixture::labeled({40, 40, 40}, 8, 12, 0.4, 3);
  std::vector<std::size_t> perm{5, 2, 7, 0, 1, 6, 3, 4};
  const auto shuffled = ds.with_columns(perm);
  auto a = select_top_k(ds, 5).names, b = select_top_k(shuffled, 5).names;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

// ---------------------------------------------------------------------------
// Class weights, under-sampling, folds

TEST(Weights, CohortLabelCounts) {
  const auto y = labels_of(fixture::kCohortLabelCounts);
  const auto w = class_weights(y, 4);
  EXPECT_NEAR(w[0], 146.0 / (4 * 91), 1e-12);
  EXPECT_NEAR(w[0], 0.4011, 1e-3);
  EXPECT_NEAR(w[1], 1.2586, 1e-3);
  EXPECT_NEAR(w[2], 1.7381, 1e-3);
  EXPECT_NEAR(w[3], 7.3000, 1e-3);
  double mass = 0;
  for (std::size_t c = 0; c < 4; ++c) mass += static_cast<double>(fixture::kCohortLabelCounts[c]) * w[c];
  EXPECT_NEAR(mass, 146.0, 1e-9);
}

TEST(Weights, BalancedSingleAndAbsent) {
  EXPECT_EQ(class_weights(labels_of({10, 10}), 2), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(class_weights(labels_of({0, 7}), 4), (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
  EXPECT_THROW(class_weights(std::vector<int>{}, 4), ValidationError);
}

TEST(Undersample, CohortCountsToThreeBalancedClasses) {
  const auto ds = fixture::labeled(fixture::kCohortLabelCounts, 3, 5);
  const std::set<DistressLevel> keep{DistressLevel::Low, DistressLevel::Moderate, DistressLevel::High};
  const auto u = undersample(ds, keep, 99);
  EXPECT_EQ(u.size(), 63u);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(std::count(u.levels.begin(), u.levels.end(), static_cast<DistressLevel>(c)), 21);
  EXPECT_EQ(std::count(u.levels.begin(), u.levels.end(), DistressLevel::VeryHigh), 0);
  EXPECT_TRUE(std::is_sorted(u.provenance.begin(), u.provenance.end()));
  EXPECT_EQ(undersample(ds, keep, 99), u);
  EXPECT_NE(undersample(ds, keep, 100), u);
}

TEST(Undersample, BalancedInputOnlyLosesExcludedRows) {
  const auto ds = fixture::labeled({12, 12, 12, 4}, 2, 6);
  const auto u = undersample(ds, {DistressLevel::Low, DistressLevel::Moderate, DistressLevel::High}, 1);
  EXPECT_EQ(u.size(), 36u);
  EXPECT_THROW(undersample(fixture::labeled({5, 5}, 2, 6), {DistressLevel::High}, 1), ValidationError);
}

TEST(Folds, SizesForN146) {
  const auto y = labels_of(fixture::kCohortLabelCounts);
  const auto folds = stratified_kfold(y, 5, 42);
  std::vector<std::size_t> sizes;
  for (const auto& f : folds) sizes.push_back(f.size());
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{30, 29, 29, 29, 29}));

  std::vector<int> seen(y.size(), 0);
  for (const auto& f : folds)
    for (std::size_t i : f) ++seen[i];
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  for (int c = 0; c < 4; ++c) {
    std::vector<long> per;
    for (const auto& f : folds) per.push_back(std::count_if(f.begin(), f.end(), [&](auto i) { return y[i] == c; }));
    EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1);
  }
  EXPECT_EQ(stratified_kfold(y, 5, 42), folds);
}

TEST(Folds, BalancedSixtyThree) {
  const auto y = labels_of({21, 21, 21});
  for (const auto& f : stratified_kfold(y, 5, 7)) {
    for (int c = 0; c < 3; ++c) {
      const auto n = std::count_if(f.begin(), f.end(), [&](auto i) { return y[i] == c; });
      EXPECT_TRUE(n == 4 || n == 5);
    }
  }
  EXPECT_THROW(stratified_kfold(labels_of({2, 1}), 5, 1), ValidationError);
  EXPECT_THROW(stratified_kfold(y, 1, 1), ValidationError);
}

// ---------------------------------------------------------------------------
// Models

TEST(Models, KnnOneNeighbourMemorises) {
  const auto ds = fixture::labeled({15, 15, 15}, 4, 31);
  ModelSpec s = spec_for(ModelFamily::knn);
  s.knn.k = 1;
  const auto y = ds.label_indices();
  const auto m = train_model(s, ds.rows, y, class_weights(y, 3), 3);
  EXPECT_EQ(accuracy(predict(m, ds.rows), y), 1.0);
}

TEST(Models, KnnWeightedVoteAndScaleInvariance) {
  // Two neighbours of class 0 (weight 1) vs one of class 1 (weight 5).
  Matrix x(0, 1);
  for (double v : {0.0, 0.1, 0.2}) x.append_row(std::vector<double>{v});
  const std::vector<int> y{0, 0, 1};
  ModelSpec s = spec_for(ModelFamily::knn);
  s.knn.k = 3;
  const Matrix q = [] { Matrix m(0, 1); m.append_row(std::vector<double>{0.05}); return m; }();
  EXPECT_EQ(predict(train_model(s, x, y, std::vector<double>{1, 5}, 2), q)[0], 1);
  EXPECT_EQ(predict(train_model(s, x, y, std::vector<double>{1, 1}, 2), q)[0], 0);
  EXPECT_EQ(predict(train_model(s, x, y, std::vector<double>{1, 2}, 2), q)[0], 0);  // 2 vs 2: lower class

  const auto ds = fixture::labeled({20, 20, 20}, 5, 4, 0.7, 5);
  const auto yy = ds.label_indices();
  const auto w = class_weights(yy, 3);
  auto scale = [](Matrix m) {
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (double& v : m.row(r)) v *= 37.5;
    return m;
  };
  const Matrix scaled = scale(ds.rows);
  const auto test = fixture::labeled({10, 10, 10}, 5, 5, 0.7, 5);
  const Matrix test_scaled = scale(test.rows);
  EXPECT_EQ(predict(train_model(spec_for(ModelFamily::knn), ds.rows, yy, w, 3), test.rows),
            predict(train_model(spec_for(ModelFamily::knn), scaled, yy, w, 3), test_scaled));
}

TEST(Models, SingleClassTrainingPredictsThatClass) {
  const auto ds = fixture::labeled({0, 0, 12}, 4, 6);
  const auto test = fixture::labeled({5, 5, 5, 5}, 4, 7);
  const auto y = ds.label_indices();
  const auto w = class_weights(y, 4);
  for (auto f : kFamilies) {
    const auto pred = predict(train_model(spec_for(f), ds.rows, y, w, 4), test.rows);
    EXPECT_TRUE(std::all_of(pred.begin(), pred.end(), [](int p) { return p == 2; })) << to_string(f);
  }
}

TEST(Models, ExtraTreesSeparableBlob) {
  const auto train = fixture::labeled({50, 50}, 5, 42, 3.0, 5);
  const auto test = fixture::labeled({50, 50}, 5, 43, 3.0, 5);
  const auto y = train.label_indices();
  const auto w = class_weights(y, 2);
  const auto et = predict(train_model(spec_for(ModelFamily::extra_trees), train.rows, y, w, 2), test.rows);
  const auto knn = predict(train_model(spec_for(ModelFamily::knn), train.rows, y, w, 2), test.rows);
  EXPECT_GE(accuracy(et, test.label_indices()), 0.95);
  EXPECT_GE(accuracy(knn, test.label_indices()), 0.95);
}

TEST(Models, TrainingAccuracyBeatsMajorityBaseline) {
  const auto ds = fixture::labeled({60, 30, 20}, 6, 19, 0.8, 4);
  const auto y = ds.label_indices();
  const auto w = class_weights(y, 3);
  const double majority = 60.0 / 110.0;
  for (auto f : {ModelFamily::extra_trees, ModelFamily::mlp}) {
    EXPECT_GE(accuracy(predict(train_model(spec_for(f), ds.rows, y, w, 3), ds.rows), y), majority) << to_string(f);
  }
}

TEST(Models, SeedDeterminismAndInputChecks) {
  const auto ds = fixture::labeled({20, 20, 20}, 5, 9, 0.5, 3);
  const auto test = fixture::labeled({10, 10, 10}, 5, 10, 0.5, 3);
  const auto y = ds.label_indices();
  const auto w = class_weights(y, 3);
  for (auto f : kFamilies) {
    EXPECT_EQ(predict(train_model(spec_for(f, 5), ds.rows, y, w, 3), test.rows),
              predict(train_model(spec_for(f, 5), ds.rows, y, w, 3), test.rows))
        << to_string(f);
    const auto m = train_model(spec_for(f), ds.rows, y, w, 3);
    EXPECT_THROW(predict(m, ds.rows.select_cols(std::vector<std::size_t>{0, 1})), ValidationError) << to_string(f);
  }
  EXPECT_THROW(train_model(spec_for(ModelFamily::knn), Matrix(0, 5), std::vector<int>{}, w, 3), ValidationError);
  EXPECT_THROW(train_model(spec_for(ModelFamily::knn), ds.rows, std::span(y).first(5), w, 3), ValidationError);
  ModelSpec bad = spec_for(ModelFamily::knn);
  bad.knn.k = 0;
  EXPECT_THROW(train_model(bad, ds.rows, y, w, 3), ValidationError);
}

TEST(Models, ClassesAbsentFromTrainingAreNeverPredicted) {
  const auto ds = fixture::labeled({25, 0, 25, 0}, 4, 13, 1.0, 4);
  const auto test = fixture::labeled({10, 10, 10, 10}, 4, 14, 1.0, 4);
  const auto y = ds.label_indices();
  const auto w = class_weights(y, 4);
  for (auto f : kFamilies) {
    for (int p : predict(train_model(spec_for(f), ds.rows, y, w, 4), test.rows)) {
      EXPECT_TRUE(p == 0 || p == 2) << to_string(f);
    }
  }
}

TEST(Models, MlpGradientMatchesFiniteDifferences) {
  const auto ds = fixture::labeled({4, 3, 3}, 5, 2024, 0.5, 5);
  const auto y = ds.label_indices();
  const auto cw = class_weights(y, 3);
  MlpWeights w = init_mlp(5, 8, 3, 7);
  for (std::size_t j = 0; j < w.hidden; ++j) w.b1(j) = 0.05;  // keep units away from the kink
  std::vector<double> grad;
  mlp_loss(w, ds.rows, y, cw, &grad);
  const double h = 1e-6;
  for (std::size_t p = 0; p < w.params.size(); ++p) {
    MlpWeights plus = w, minus = w;
    plus.params[p] += h;
    minus.params[p] -= h;
    const double fd = (mlp_loss(plus, ds.rows, y, cw) - mlp_loss(minus, ds.rows, y, cw)) / (2 * h);
    EXPECT_LE(std::fabs(fd - grad[p]), 1e-4 * std::max(1e-3, std::fabs(fd) + std::fabs(grad[p]))) << p;
  }
}

// ---------------------------------------------------------------------------
// Evaluation

TEST(Confusion, MatchesDoubleLoop) {
  Rng rng(3);
  std::vector<int> t(200), p(200);
  for (auto& v : t) v = static_cast<int>(rng.below(4));
  for (auto& v : p) v = static_cast<int>(rng.below(4));
  const auto cm = confusion_matrix(t, p, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      long n = 0;
      for (std::size_t k = 0; k < t.size(); ++k) n += (t[k] == i && p[k] == j);
      EXPECT_EQ(cm[i][j], n);
    }
  EXPECT_EQ(cm_total(cm), 200);
  const auto diag = confusion_matrix(t, t, 4);
  EXPECT_EQ(cm_trace(diag), 200);
  const auto zeros = confusion_matrix(t, std::vector<int>(200, 0), 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 1; j < 4; ++j) EXPECT_EQ(zeros[i][j], 0);
  EXPECT_THROW(confusion_matrix(t, std::vector<int>(200, 4), 4), ValidationError);
}

TEST(Confusion, MacroRecallAndChance) {
  const ConfusionMatrix cm = {{8, 2, 0}, {1, 3, 0}, {0, 0, 0}};
  EXPECT_NEAR(macro_recall(cm), (0.8 + 0.75) / 2, 1e-12);
  // p_e = sum (row/N)(col/N) = (10*9 + 4*5) / 14^2
  EXPECT_NEAR(chance_agreement(cm), (10.0 * 9 + 4.0 * 5) / 196.0, 1e-12);
}

TEST(Evaluate, SeparableIsPerfect) {
  auto ds = fixture::labeled({30, 30, 30, 30}, 6, 1, 25.0, 6);
  EvaluationConfig cfg;
  cfg.scope = NormScope::global;
  cfg.top_k = 6;
  const auto r = evaluate(ds, cfg);
  EXPECT_EQ(r.mean_accuracy, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Evaluate, ShuffledLabelsNearChance) {
  for (auto f : kFamilies) {
    auto ds = fixture::labeled({40, 40, 40, 40}, 10, 55);
    EvaluationConfig cfg;
    cfg.model = spec_for(f, 3);
    cfg.top_k = 10;
    const auto r = evaluate(ds, cfg);
    EXPECT_NEAR(r.mean_accuracy, 0.25, 0.10) << to_string(f);
  }
}

TEST(Evaluate, ReportInvariantsAndDeterminism) {
  const auto ds = fixture::labeled(fixture::kCohortLabelCounts, 12, 21, 0.6, 5);
  EvaluationConfig cfg;
  cfg.top_k = 8;
  const auto r = evaluate(ds, cfg);
  EXPECT_EQ(r.n_samples, 146u);
  EXPECT_EQ(cm_total(r.confusion), 146);
  EXPECT_EQ(r.accuracy, static_cast<double>(cm_trace(r.confusion)) / 146.0);
  EXPECT_EQ(r.folds.size(), 5u);
  double mean = 0;
  for (const auto& f : r.folds) {
    EXPECT_EQ(f.selected_features.size(), 8u);
    mean += f.accuracy;
  }
  EXPECT_NEAR(r.mean_accuracy, mean / 5, 1e-12);
  EXPECT_EQ(report_json_string(r), report_json_string(evaluate(ds, cfg)));

  const auto j = to_json(r);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["config"]["model"]["hyperparameters"]["n_trees"], 100);
  const auto table = confusion_table(j);
  const std::string acc_line = "(" + std::to_string(cm_trace(r.confusion)) + "/146)";
  EXPECT_NE(table.find(acc_line), std::string::npos);
}

TEST(Evaluate, ThreeClassModeUndersamples) {
  const auto ds = fixture::labeled(fixture::kCohortLabelCounts, 6, 22, 1.0, 3);
  EvaluationConfig cfg;
  cfg.mode = ClassMode::three_class;
  cfg.top_k = 6;
  EvaluationTrace trace;
  const auto r = evaluate(ds, cfg, &trace);
  EXPECT_EQ(r.n_samples, 63u);
  EXPECT_EQ(r.class_labels.size(), 3u);
  EXPECT_EQ(trace.evaluated.size(), 63u);
}

TEST(Evaluate, PreprocessingIsFittedOnTrainingFoldsOnly) {
  const auto ds = fixture::labeled(fixture::kCohortLabelCounts, 10, 23, 0.6, 4);
  EvaluationConfig cfg;
  cfg.top_k = 5;
  EvaluationTrace trace;
  evaluate(ds, cfg, &trace);
  ASSERT_EQ(trace.preprocessing.size(), 5u);
  for (std::size_t f = 0; f < 5; ++f) {
    std::vector<bool> in_test(ds.size(), false);
    for (std::size_t i : trace.test_folds[f]) in_test[i] = true;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (!in_test[i]) train_idx.push_back(i);
    const auto train = trace.evaluated.subset(train_idx);
    const auto ref = fit_preprocessing(train, cfg, 4);
    EXPECT_EQ(trace.preprocessing[f].normalization, ref.normalization);
    EXPECT_EQ(trace.preprocessing[f].columns, ref.columns);
    EXPECT_EQ(trace.preprocessing[f].class_weights, ref.class_weights);
    EXPECT_NE(trace.preprocessing[f].normalization, fit_preprocessing(trace.evaluated, cfg, 4).normalization);
  }
}

TEST(Evaluate, LeakyModeChangesTheReport) {
  const auto ds = fixture::labeled(fixture::kCohortLabelCounts, 20, 24, 0.3, 3);
  EvaluationConfig cfg;
  cfg.top_k = 5;
  EvaluationConfig leaky = cfg;
  leaky.paper_mode = true;
  EXPECT_NE(report_json_string(evaluate(ds, cfg)), report_json_string(evaluate(ds, leaky)));
}

TEST(Evaluate, RejectsEmpty) {
  EXPECT_THROW(evaluate(LabeledDataset{}, EvaluationConfig{}), ValidationError);
}
