#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "ewellness/matrix.hpp"
#include "ewellness/ml/model_spec.hpp"

namespace ewellness::ml {

struct KnnModel {
  std::size_t k = 5;
  int n_classes = 0;
  Matrix x;
  std::vector<int> y;
  std::vector<double> class_weights;
};

inline KnnModel fit_knn(const KnnConfig& cfg, const Matrix& x, std::span<const int> y,
                        std::span<const double> class_weights, int n_classes) {
  return {static_cast<std::size_t>(cfg.k), n_classes, x, {y.begin(), y.end()},
          {class_weights.begin(), class_weights.end()}};
}

// Class-weighted vote among the k nearest training rows (Euclidean).
// Distance ties go to the lower training index, vote ties to the lower class.
inline std::vector<int> predict(const KnnModel& m, const Matrix& x) {
  std::vector<int> out(x.rows());
  const std::size_t k = std::min(m.k, m.x.rows());
  std::vector<std::pair<double, std::size_t>> dist(m.x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto q = x.row(r);
    for (std::size_t i = 0; i < m.x.rows(); ++i) {
      const auto p = m.x.row(i);
      double d2 = 0.0;
      for (std::size_t c = 0; c < q.size(); ++c) d2 += (q[c] - p[c]) * (q[c] - p[c]);
      dist[i] = {d2, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<double> votes(static_cast<std::size_t>(m.n_classes), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const int label = m.y[dist[j].second];
      votes[static_cast<std::size_t>(label)] += m.class_weights[static_cast<std::size_t>(label)];
    }
    out[r] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

}  // namespace ewellness::ml
