#pragma once

#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ewellness/matrix.hpp"
#include "ewellness/ml/model_spec.hpp"
#include "ewellness/rng.hpp"

namespace ewellness::ml {

// One-vs-rest linear classifiers. The bias is the last weight, attached to
// a constant 1 input.
struct LinearSvmModel {
  int n_classes = 0;
  std::vector<std::vector<double>> weights;  // per class, d + 1
  std::vector<bool> trained;                 // false for classes absent at fit time
};

// Pegasos-style stochastic subgradient descent on the class-weighted hinge
// loss with L2 penalty, step 1 / (lambda * t).
inline std::vector<double> fit_binary_svm(const SvmConfig& cfg, std::uint64_t seed, const Matrix& x,
                                          std::span<const double> target, std::span<const double> sample_w) {
  const std::size_t d = x.cols();
  std::vector<double> w(d + 1, 0.0);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
      const auto xi = x.row(i);
      double score = w[d];
      for (std::size_t c = 0; c < d; ++c) score += w[c] * xi[c];
      const double shrink = 1.0 - eta * cfg.lambda;
      for (double& v : w) v *= shrink;
      if (target[i] * score < 1.0) {
        const double step = eta * sample_w[i] * target[i];
        for (std::size_t c = 0; c < d; ++c) w[c] += step * xi[c];
        w[d] += step;
      }
    }
  }
  return w;
}

inline LinearSvmModel fit_svm(const SvmConfig& cfg, std::uint64_t seed, const Matrix& x, std::span<const int> y,
                              std::span<const double> class_weights, int n_classes) {
  LinearSvmModel m;
  m.n_classes = n_classes;
  m.weights.resize(static_cast<std::size_t>(n_classes));
  m.trained.assign(static_cast<std::size_t>(n_classes), false);
  std::vector<double> sample_w(y.size()), target(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sample_w[i] = class_weights[static_cast<std::size_t>(y[i])];
  for (int c = 0; c < n_classes; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    if (class_weights[cu] <= 0.0) continue;
    for (std::size_t i = 0; i < y.size(); ++i) target[i] = y[i] == c ? 1.0 : -1.0;
    m.weights[cu] = fit_binary_svm(cfg, derive_seed(seed, cu), x, target, sample_w);
    m.trained[cu] = true;
  }
  return m;
}

inline std::vector<int> predict(const LinearSvmModel& m, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xi = x.row(r);
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < m.weights.size(); ++c) {
      if (!m.trained[c]) continue;
      const auto& w = m.weights[c];
      double s = w.back();
      for (std::size_t j = 0; j < xi.size(); ++j) s += w[j] * xi[j];
      if (s > best) {
        best = s;
        arg = static_cast<int>(c);
      }
    }
    out[r] = arg;
  }
  return out;
}

}  // namespace ewellness::ml
