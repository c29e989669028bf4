#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "ewellness/dataset.hpp"
#include "ewellness/rng.hpp"

namespace ewellness::ml {

// w_c = N / (K * n_c) over the K classes present; absent classes get 0.
inline std::vector<double> class_weights(std::span<const int> labels, int n_classes) {
  if (labels.empty()) throw ValidationError("labels", "need at least one label");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw ValidationError("labels", "label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  const double present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  const double n = static_cast<double>(labels.size());
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) w[c] = n / (present * static_cast<double>(counts[c]));
  }
  return w;
}

// Drops rows outside `keep`, then randomly reduces every kept class to the
// size of the smallest kept class. Output rows are sorted by provenance.
inline LabeledDataset undersample(const LabeledDataset& ds, const std::set<DistressLevel>& keep, std::uint64_t seed) {
  std::map<DistressLevel, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (keep.contains(ds.levels[i])) by_class[ds.levels[i]].push_back(i);
  }
  for (auto level : keep) {
    if (!by_class.contains(level)) {
      throw ValidationError("keep", "class " + std::string(to_string(level)) + " absent from dataset");
    }
  }
  std::size_t minority = ds.size();
  for (const auto& [level, rows] : by_class) minority = std::min(minority, rows.size());

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [level, rows] : by_class) {
    rng.shuffle(rows);
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    if (ds.provenance[a] != ds.provenance[b]) return ds.provenance[a] < ds.provenance[b];
    return a < b;
  });
  return ds.subset(chosen);
}

// Shuffles each class, concatenates the classes, and deals the result
// round-robin into k folds. Every class is spread within +-1 across folds
// and fold sizes differ by at most one. Each fold is sorted ascending.
inline std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                              std::uint64_t seed) {
  if (k < 2) throw ValidationError("k", "need at least 2 folds");
  if (labels.size() < k) throw ValidationError("k", "more folds than samples");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& [label, rows] : by_class) {
    rng.shuffle(rows);
    for (std::size_t i : rows) folds[next++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace ewellness::ml
