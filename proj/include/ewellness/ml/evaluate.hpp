#pragma once

// Cross-validated evaluation: per training fold, fit z-score parameters,
// top-k correlation selection, class weights, and the model; apply them to
// the held-out fold; pool predictions into one confusion matrix.

#include <cstdio>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ewellness/dataset.hpp"
#include "ewellness/ml/model.hpp"
#include "ewellness/ml/normalize.hpp"
#include "ewellness/ml/sampling.hpp"
#include "ewellness/ml/selection.hpp"

namespace ewellness::ml {

enum class ClassMode { four_class, three_class };

inline int class_count(ClassMode m) { return m == ClassMode::three_class ? 3 : 4; }

struct EvaluationConfig {
  ModelSpec model;
  std::size_t folds = 5;
  NormScope scope = NormScope::per_participant;
  std::size_t top_k = 25;
  ClassMode mode = ClassMode::four_class;
  // Fit normalization, selection, and class weights once on the full
  // dataset before splitting. Leaks test folds into preprocessing.
  bool paper_mode = false;

  nlohmann::json to_json() const {
    return {{"model", model.to_json()},
            {"folds", folds},
            {"scope", std::string(to_string(scope))},
            {"top_k", top_k},
            {"classes", class_count(mode)},
            {"paper_mode", paper_mode}};
  }
};

using ConfusionMatrix = std::vector<std::vector<long>>;

inline ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int k) {
  if (y_true.size() != y_pred.size()) throw ValidationError("y_pred", "length differs from y_true");
  ConfusionMatrix cm(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= k || y_pred[i] < 0 || y_pred[i] >= k) {
      throw ValidationError("labels", "label out of range at index " + std::to_string(i));
    }
    ++cm[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }
  return cm;
}

inline long cm_total(const ConfusionMatrix& cm) {
  long t = 0;
  for (const auto& r : cm) t += std::accumulate(r.begin(), r.end(), 0L);
  return t;
}

inline long cm_trace(const ConfusionMatrix& cm) {
  long t = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) t += cm[i][i];
  return t;
}

// Mean over classes with support of diag / row sum.
inline double macro_recall(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int classes = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const long support = std::accumulate(cm[i].begin(), cm[i].end(), 0L);
    if (support == 0) continue;
    sum += static_cast<double>(cm[i][i]) / static_cast<double>(support);
    ++classes;
  }
  return classes > 0 ? sum / classes : 0.0;
}

// Agreement expected if predictions were independent of the truth with the
// same marginals: sum_c (row_c / N) * (col_c / N).
inline double chance_agreement(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm_total(cm));
  if (n == 0.0) return 0.0;
  double pe = 0.0;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < cm.size(); ++j) {
      row += static_cast<double>(cm[c][j]);
      col += static_cast<double>(cm[j][c]);
    }
    pe += (row / n) * (col / n);
  }
  return pe;
}

// Everything fitted on one training split.
struct FittedPipeline {
  NormalizationParams normalization;
  std::vector<std::size_t> columns;
  std::vector<std::string> selected;
  std::vector<double> class_weights;
  Model model;
};

struct Preprocessing {
  NormalizationParams normalization;
  std::vector<std::size_t> columns;
  std::vector<std::string> selected;
  std::vector<double> class_weights;
};

inline Preprocessing fit_preprocessing(const LabeledDataset& train, const EvaluationConfig& cfg, int n_classes) {
  Preprocessing p;
  p.normalization = fit_normalization(train, cfg.scope);
  auto sel = select_top_k(apply_normalization(p.normalization, train), cfg.top_k);
  p.columns = std::move(sel.columns);
  p.selected = std::move(sel.names);
  const auto labels = train.label_indices();
  p.class_weights = class_weights(labels, n_classes);
  return p;
}

inline Matrix transform(const Preprocessing& p, const LabeledDataset& ds) {
  return apply_normalization(p.normalization, ds).rows.select_cols(p.columns);
}

inline FittedPipeline fit_pipeline(const LabeledDataset& train, const EvaluationConfig& cfg, int n_classes,
                                   std::uint64_t model_seed, const Preprocessing* fixed = nullptr) {
  Preprocessing p = fixed ? *fixed : fit_preprocessing(train, cfg, n_classes);
  ModelSpec spec = cfg.model;
  spec.seed = model_seed;
  const auto labels = train.label_indices();
  Model model = train_model(spec, transform(p, train), labels, p.class_weights, n_classes);
  return {std::move(p.normalization), std::move(p.columns), std::move(p.selected), std::move(p.class_weights),
          std::move(model)};
}

inline std::vector<int> predict(const FittedPipeline& fp, const LabeledDataset& ds) {
  Preprocessing p{fp.normalization, fp.columns, fp.selected, fp.class_weights};
  return predict(fp.model, transform(p, ds));
}

struct FoldResult {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double accuracy = 0.0;
  std::vector<std::string> selected_features;
  std::vector<double> class_weights;
};

struct EvaluationReport {
  EvaluationConfig config;
  std::vector<std::string> class_labels;
  std::size_t n_samples = 0;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;  // mean of per-fold accuracies
  double accuracy = 0.0;       // pooled: trace / total
  double macro_recall = 0.0;
  double chance_agreement = 0.0;
  ConfusionMatrix confusion;
};

// Per-fold fitted state, exposed so tests can check nothing leaked.
struct EvaluationTrace {
  LabeledDataset evaluated;  // after optional under-sampling
  std::vector<std::vector<std::size_t>> test_folds;
  std::vector<Preprocessing> preprocessing;
};

inline constexpr std::uint64_t kFoldStream = 0;
inline constexpr std::uint64_t kUndersampleStream = 0xA5A5;

inline EvaluationReport evaluate(const LabeledDataset& input, const EvaluationConfig& cfg,
                                 EvaluationTrace* trace = nullptr) {
  if (input.empty()) throw ValidationError("dataset", "cannot evaluate an empty dataset");
  input.validate();
  cfg.model.validate();
  const int k = class_count(cfg.mode);
  const std::uint64_t seed = cfg.model.seed;
  const LabeledDataset ds =
      cfg.mode == ClassMode::three_class
          ? undersample(input, {DistressLevel::Low, DistressLevel::Moderate, DistressLevel::High},
                        derive_seed(seed, kUndersampleStream))
          : input;
  const auto labels = ds.label_indices();
  const auto folds = stratified_kfold(labels, cfg.folds, derive_seed(seed, kFoldStream));

  std::optional<Preprocessing> leaked;
  if (cfg.paper_mode) leaked = fit_preprocessing(ds, cfg, k);

  EvaluationReport report;
  report.config = cfg;
  for (int c = 0; c < k; ++c) report.class_labels.emplace_back(to_string(static_cast<DistressLevel>(c)));
  report.n_samples = ds.size();
  report.confusion = ConfusionMatrix(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  if (trace) {
    trace->evaluated = ds;
    trace->test_folds = folds;
    trace->preprocessing.clear();
  }

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> in_test(ds.size(), false);
    for (std::size_t i : folds[f]) in_test[i] = true;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (!in_test[i]) train_idx.push_back(i);
    const LabeledDataset train = ds.subset(train_idx);
    const LabeledDataset test = ds.subset(folds[f]);

    const auto fitted = fit_pipeline(train, cfg, k, derive_seed(seed, f + 1), leaked ? &*leaked : nullptr);
    const auto pred = predict(fitted, test);
    const auto truth = test.label_indices();
    const auto cm = confusion_matrix(truth, pred, k);
    for (std::size_t i = 0; i < cm.size(); ++i)
      for (std::size_t j = 0; j < cm.size(); ++j) report.confusion[i][j] += cm[i][j];

    FoldResult fr;
    fr.train_size = train.size();
    fr.test_size = test.size();
    fr.accuracy = test.empty() ? 0.0 : static_cast<double>(cm_trace(cm)) / static_cast<double>(test.size());
    fr.selected_features = fitted.selected;
    fr.class_weights = fitted.class_weights;
    report.folds.push_back(std::move(fr));
    if (trace) trace->preprocessing.push_back({fitted.normalization, fitted.columns, fitted.selected, fitted.class_weights});
  }

  double acc_sum = 0.0;
  for (const auto& fr : report.folds) acc_sum += fr.accuracy;
  report.mean_accuracy = acc_sum / static_cast<double>(report.folds.size());
  report.accuracy = static_cast<double>(cm_trace(report.confusion)) / static_cast<double>(cm_total(report.confusion));
  report.macro_recall = macro_recall(report.confusion);
  report.chance_agreement = chance_agreement(report.confusion);
  return report;
}

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = r.config.to_json();
  j["seed"] = r.config.model.seed;
  j["family"] = std::string(to_string(r.config.model.family));
  j["class_labels"] = r.class_labels;
  j["n_samples"] = r.n_samples;
  auto folds = nlohmann::json::array();
  std::vector<double> accs;
  for (const auto& f : r.folds) {
    folds.push_back({{"train_size", f.train_size},
                     {"test_size", f.test_size},
                     {"accuracy", f.accuracy},
                     {"selected_features", f.selected_features},
                     {"class_weights", f.class_weights}});
    accs.push_back(f.accuracy);
  }
  j["folds"] = std::move(folds);
  j["fold_accuracies"] = accs;
  j["mean_accuracy"] = r.mean_accuracy;
  j["accuracy"] = r.accuracy;
  j["macro_recall"] = r.macro_recall;
  j["chance_agreement"] = r.chance_agreement;
  j["confusion_matrix"] = r.confusion;
  return j;
}

inline std::string report_json_string(const EvaluationReport& r) { return to_json(r).dump(2) + "\n"; }

// Plain-text table from a report's JSON form (so `report` can render files).
inline std::string confusion_table(const nlohmann::json& report) {
  const auto labels = report.at("class_labels").get<std::vector<std::string>>();
  const auto cm = report.at("confusion_matrix").get<ConfusionMatrix>();
  std::ostringstream out;
  char buf[64];
  out << "confusion matrix (rows = true, columns = predicted)\n";
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const auto& l : labels) {
    std::snprintf(buf, sizeof buf, "%10s", l.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-10s", labels[i].c_str());
    out << buf;
    for (long v : cm[i]) {
      std::snprintf(buf, sizeof buf, "%10ld", v);
      out << buf;
    }
    out << '\n';
  }
  const long total = cm_total(cm), trace = cm_trace(cm);
  std::snprintf(buf, sizeof buf, "accuracy: %.6f (%ld/%ld)\n", total ? double(trace) / double(total) : 0.0, trace,
                total);
  out << buf;
  std::snprintf(buf, sizeof buf, "macro recall: %.6f\n", macro_recall(cm));
  out << buf;
  return out.str();
}

}  // namespace ewellness::ml
