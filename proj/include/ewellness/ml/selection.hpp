#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ewellness/dataset.hpp"

namespace ewellness::ml {

// Sample Pearson correlation; 0 when either side has zero variance.
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "length differs from x");
  if (x.size() < 2) throw ValidationError("x", "need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Column indices ordered by |r(feature, k10 score)| descending; ties keep
// dictionary (column) order.
inline std::vector<std::size_t> rank_features(const LabeledDataset& ds) {
  if (ds.empty()) throw ValidationError("dataset", "cannot rank features of an empty dataset");
  const std::vector<double> y(ds.k10_scores.begin(), ds.k10_scores.end());
  std::vector<double> strength(ds.rows.cols(), 0.0);
  for (std::size_t c = 0; c < ds.rows.cols(); ++c) {
    strength[c] = ds.size() >= 2 ? std::abs(pearson_r(ds.rows.column(c), y)) : 0.0;
  }
  std::vector<std::size_t> order(ds.rows.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return strength[a] > strength[b]; });
  return order;
}

struct Selection {
  LabeledDataset dataset;
  std::vector<std::string> names;
  std::vector<std::size_t> columns;
};

// Keeps the min(k, n_features) most correlated features, in rank order.
inline Selection select_top_k(const LabeledDataset& ds, std::size_t k = 25) {
  if (k < 1) throw ValidationError("k", "must be >= 1");
  auto order = rank_features(ds);
  order.resize(std::min(k, order.size()));
  Selection s;
  s.dataset = ds.with_columns(order);
  s.names = s.dataset.feature_names;
  s.columns = std::move(order);
  return s;
}

}  // namespace ewellness::ml
