#pragma once

// Extremely randomized trees: at every node, ceil(sqrt(d)) candidate
// features each get one uniform-random threshold inside the node's value
// range, and the candidate with the largest weighted Gini decrease wins.
// Trees grow until a node is pure or has fewer than min_samples_split rows.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ewellness/matrix.hpp"
#include "ewellness/ml/model_spec.hpp"
#include "ewellness/rng.hpp"

namespace ewellness::ml {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct ExtraTree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }
};

struct ExtraTreesModel {
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<ExtraTree> trees;
};

namespace detail {

inline double gini(std::span<const double> mass, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double m : mass) s += (m / total) * (m / total);
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::span<const double> sample_w, int n_classes,
              std::size_t max_features, std::size_t min_split, std::uint64_t seed)
      : x_(x), y_(y), w_(sample_w), k_(static_cast<std::size_t>(n_classes)), max_features_(max_features),
        min_split_(min_split), rng_(seed) {}

  ExtraTree build() {
    std::vector<std::size_t> idx(x_.rows());
    std::iota(idx.begin(), idx.end(), 0);
    ExtraTree tree;
    grow(tree, idx, 0, idx.size());
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;
  };

  std::vector<double> class_mass(std::span<const std::size_t> idx, std::size_t lo, std::size_t hi) const {
    std::vector<double> m(k_, 0.0);
    for (std::size_t i = lo; i < hi; ++i) m[static_cast<std::size_t>(y_[idx[i]])] += w_[idx[i]];
    return m;
  }

  int grow(ExtraTree& tree, std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto mass = class_mass(idx, lo, hi);
    tree.nodes.back().label = static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());

    const bool pure = std::count_if(mass.begin(), mass.end(), [](double m) { return m > 0.0; }) <= 1;
    if (pure || hi - lo < min_split_) return id;

    const Split best = choose_split(idx, lo, hi, mass);
    if (best.feature < 0) return id;

    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                           idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                           [&](std::size_t r) { return x_(r, f) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - idx.begin());
    const int left = grow(tree, idx, lo, split_at);
    const int right = grow(tree, idx, split_at, hi);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  Split choose_split(std::span<const std::size_t> idx, std::size_t lo, std::size_t hi,
                     const std::vector<double>& mass) {
    std::vector<std::size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);

    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    const double parent = total * gini(mass, total);
    Split best;
    std::size_t drawn = 0;
    std::vector<double> left(k_);
    for (std::size_t f : features) {
      if (drawn == max_features_) break;
      double fmin = x_(idx[lo], f), fmax = fmin;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        fmin = std::min(fmin, x_(idx[i], f));
        fmax = std::max(fmax, x_(idx[i], f));
      }
      if (!(fmax > fmin)) continue;  // constant in this node
      ++drawn;
      double t = fmin + rng_.uniform() * (fmax - fmin);
      if (t >= fmax) t = fmin;  // keep both sides non-empty
      std::fill(left.begin(), left.end(), 0.0);
      for (std::size_t i = lo; i < hi; ++i) {
        if (x_(idx[i], f) <= t) left[static_cast<std::size_t>(y_[idx[i]])] += w_[idx[i]];
      }
      const double wl = std::accumulate(left.begin(), left.end(), 0.0);
      std::vector<double> right(k_);
      for (std::size_t c = 0; c < k_; ++c) right[c] = mass[c] - left[c];
      const double wr = total - wl;
      const double gain = parent - wl * gini(left, wl) - wr * gini(right, wr);
      if (gain > best.gain) best = {static_cast<int>(f), t, gain};
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  std::size_t max_features_;
  std::size_t min_split_;
  Rng rng_;
};

}  // namespace detail

inline ExtraTreesModel fit_extra_trees(const ExtraTreesConfig& cfg, std::uint64_t seed, const Matrix& x,
                                       std::span<const int> y, std::span<const double> class_weights,
                                       int n_classes) {
  const std::size_t d = x.cols();
  const std::size_t max_features =
      cfg.max_features > 0 ? static_cast<std::size_t>(cfg.max_features)
                           : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  std::vector<double> sample_w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sample_w[i] = class_weights[static_cast<std::size_t>(y[i])];

  ExtraTreesModel m;
  m.n_classes = n_classes;
  m.n_features = d;
  m.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) {
    detail::TreeBuilder builder(x, y, sample_w, n_classes, std::max<std::size_t>(1, max_features),
                                static_cast<std::size_t>(cfg.min_samples_split),
                                derive_seed(seed, static_cast<std::uint64_t>(t)));
    m.trees.push_back(builder.build());
  }
  return m;
}

// Majority vote over trees; ties go to the lower class index.
inline std::vector<int> predict(const ExtraTreesModel& m, const Matrix& x) {
  std::vector<int> out(x.rows());
  std::vector<int> votes(static_cast<std::size_t>(m.n_classes));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& t : m.trees) ++votes[static_cast<std::size_t>(t.predict(x.row(r)))];
    out[r] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

}  // namespace ewellness::ml
