#pragma once

#include <cmath>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "ewellness/dataset.hpp"

namespace ewellness::ml {

enum class NormScope { per_participant, global };

inline std::string_view to_string(NormScope s) { return s == NormScope::global ? "global" : "per_participant"; }

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> std;  // population
  bool operator==(const ColumnStats&) const = default;
};

struct NormalizationParams {
  NormScope scope = NormScope::per_participant;
  ColumnStats global;  // always fitted; fallback for participants unseen at fit time
  std::map<ParticipantId, ColumnStats> per_participant;
  bool operator==(const NormalizationParams&) const = default;
};

namespace detail {

inline ColumnStats column_stats(const Matrix& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols();
  ColumnStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += x(r, c);
  }
  for (auto& m : s.mean) m /= n;
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = x(r, c) - s.mean[c];
      s.std[c] += dev * dev;
    }
  }
  for (auto& v : s.std) v = std::sqrt(v / n);
  return s;
}

inline const ColumnStats& stats_for(const NormalizationParams& p, const ParticipantId& id) {
  if (p.scope == NormScope::per_participant) {
    auto it = p.per_participant.find(id);
    if (it != p.per_participant.end()) return it->second;
  }
  return p.global;
}

}  // namespace detail

inline NormalizationParams fit_normalization(const LabeledDataset& ds, NormScope scope) {
  if (ds.empty()) throw ValidationError("dataset", "cannot fit normalization on an empty dataset");
  NormalizationParams p;
  p.scope = scope;
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  p.global = detail::column_stats(ds.rows, all);
  if (scope == NormScope::per_participant) {
    std::map<ParticipantId, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ds.size(); ++i) groups[ds.provenance[i].participant].push_back(i);
    for (const auto& [id, rows] : groups) p.per_participant[id] = detail::column_stats(ds.rows, rows);
  }
  return p;
}

// (x - mean) / std; zero-variance columns map to 0.
inline LabeledDataset apply_normalization(const NormalizationParams& p, const LabeledDataset& ds) {
  LabeledDataset out = ds;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const ColumnStats& s = detail::stats_for(p, ds.provenance[r].participant);
    for (std::size_t c = 0; c < ds.rows.cols(); ++c) {
      out.rows(r, c) = s.std[c] > 0.0 ? (ds.rows(r, c) - s.mean[c]) / s.std[c] : 0.0;
    }
  }
  return out;
}

// Inverse of apply_normalization for columns with std > 0 (others restore the mean).
inline LabeledDataset invert_normalization(const NormalizationParams& p, const LabeledDataset& ds) {
  LabeledDataset out = ds;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const ColumnStats& s = detail::stats_for(p, ds.provenance[r].participant);
    for (std::size_t c = 0; c < ds.rows.cols(); ++c) out.rows(r, c) = ds.rows(r, c) * s.std[c] + s.mean[c];
  }
  return out;
}

inline std::pair<LabeledDataset, NormalizationParams> zscore_normalize(const LabeledDataset& ds,
                                                                        NormScope scope = NormScope::per_participant) {
  auto params = fit_normalization(ds, scope);
  return {apply_normalization(params, ds), std::move(params)};
}

}  // namespace ewellness::ml
