#pragma once

#include <array>
#include <string>
#include <vector>

#include "ewellness/dataset.hpp"
#include "ewellness/rng.hpp"

namespace fixture {

using namespace ewellness;

// A K10 score inside the band of `level`.
inline int score_in_band(DistressLevel level, Rng& rng) {
  static constexpr std::array<std::pair<int, int>, 4> kBands = {{{10, 15}, {16, 21}, {22, 29}, {30, 50}}};
  const auto [lo, hi] = kBands[static_cast<std::size_t>(level)];
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// `counts[c]` rows of level c with N(0,1) features; `separation` shifts
// feature j of class c by separation * c * (j < informative).
inline LabeledDataset labeled(std::vector<std::size_t> counts, std::size_t d, std::uint64_t seed,
                              double separation = 0.0, std::size_t informative = 0, int participants = 10) {
  Rng rng(seed);
  LabeledDataset ds;
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.rows = Matrix(0, d);
  std::size_t row = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
      std::vector<double> x(d);
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = rng.normal() + (j < informative ? separation * static_cast<double>(c) : 0.0);
      }
      ds.rows.append_row(x);
      const auto level = static_cast<DistressLevel>(c);
      ds.k10_scores.push_back(score_in_band(level, rng));
      ds.levels.push_back(level);
      const auto p = row % static_cast<std::size_t>(participants);
      ds.provenance.push_back({ParticipantId("p-fixture-" + std::to_string(100 + p)),
                               LocalDay{19723 + static_cast<std::int64_t>(row / participants)}});
    }
  }
  return ds;
}

// Class sizes of the reference cohort (146 labeled days).
inline const std::vector<std::size_t> kCohortLabelCounts = {91, 29, 21, 5};

}  // namespace fixture
