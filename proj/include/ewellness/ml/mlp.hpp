#pragma once

// One-hidden-layer perceptron: ReLU hidden units, softmax output,
// class-weighted cross-entropy, full-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ewellness/matrix.hpp"
#include "ewellness/ml/model_spec.hpp"
#include "ewellness/rng.hpp"

namespace ewellness::ml {

// All parameters in one flat vector: W1 (h x d), b1 (h), W2 (k x h), b2 (k).
struct MlpWeights {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  std::vector<double> params;

  MlpWeights() = default;
  MlpWeights(std::size_t d, std::size_t h, std::size_t k)
      : inputs(d), hidden(h), outputs(k), params(h * d + h + k * h + k, 0.0) {}

  std::size_t b1_offset() const { return hidden * inputs; }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + outputs * hidden; }

  double& w1(std::size_t j, std::size_t i) { return params[j * inputs + i]; }
  double w1(std::size_t j, std::size_t i) const { return params[j * inputs + i]; }
  double& b1(std::size_t j) { return params[b1_offset() + j]; }
  double b1(std::size_t j) const { return params[b1_offset() + j]; }
  double& w2(std::size_t c, std::size_t j) { return params[w2_offset() + c * hidden + j]; }
  double w2(std::size_t c, std::size_t j) const { return params[w2_offset() + c * hidden + j]; }
  double& b2(std::size_t c) { return params[b2_offset() + c]; }
  double b2(std::size_t c) const { return params[b2_offset() + c]; }
};

struct MlpModel {
  MlpWeights weights;
  std::vector<bool> trained;  // classes seen at fit time
};

// Uniform in +-1/sqrt(fan_in); biases start at zero.
inline MlpWeights init_mlp(std::size_t d, std::size_t h, std::size_t k, std::uint64_t seed) {
  MlpWeights w(d, h, k);
  Rng rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t j = 0; j < h; ++j)
    for (std::size_t i = 0; i < d; ++i) w.w1(j, i) = rng.uniform(-a1, a1);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < h; ++j) w.w2(c, j) = rng.uniform(-a2, a2);
  return w;
}

namespace detail {

inline void mlp_forward(const MlpWeights& w, std::span<const double> x, std::vector<double>& hidden,
                        std::vector<double>& probs) {
  hidden.assign(w.hidden, 0.0);
  for (std::size_t j = 0; j < w.hidden; ++j) {
    double a = w.b1(j);
    for (std::size_t i = 0; i < w.inputs; ++i) a += w.w1(j, i) * x[i];
    hidden[j] = a > 0.0 ? a : 0.0;
  }
  probs.assign(w.outputs, 0.0);
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < w.outputs; ++c) {
    double z = w.b2(c);
    for (std::size_t j = 0; j < w.hidden; ++j) z += w.w2(c, j) * hidden[j];
    probs[c] = z;
    zmax = std::max(zmax, z);
  }
  double norm = 0.0;
  for (double& p : probs) {
    p = std::exp(p - zmax);
    norm += p;
  }
  for (double& p : probs) p /= norm;
}

}  // namespace detail

// Loss = (1/N) sum_i w_{y_i} * -log p(y_i | x_i). Writes dLoss/dparams into
// `grad` when non-null.
inline double mlp_loss(const MlpWeights& w, const Matrix& x, std::span<const int> y,
                       std::span<const double> class_weights, std::vector<double>* grad = nullptr) {
  const double n = static_cast<double>(x.rows());
  if (grad) grad->assign(w.params.size(), 0.0);
  MlpWeights g;
  if (grad) g = MlpWeights(w.inputs, w.hidden, w.outputs);
  std::vector<double> hidden, probs, dhidden(w.hidden);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xi = x.row(r);
    const auto yi = static_cast<std::size_t>(y[r]);
    const double cw = class_weights[yi];
    detail::mlp_forward(w, xi, hidden, probs);
    loss += -cw * std::log(std::max(probs[yi], 1e-300));
    if (!grad) continue;
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t c = 0; c < w.outputs; ++c) {
      const double dz = cw * (probs[c] - (c == yi ? 1.0 : 0.0)) / n;
      g.b2(c) += dz;
      for (std::size_t j = 0; j < w.hidden; ++j) {
        g.w2(c, j) += dz * hidden[j];
        dhidden[j] += dz * w.w2(c, j);
      }
    }
    for (std::size_t j = 0; j < w.hidden; ++j) {
      if (hidden[j] <= 0.0) continue;
      g.b1(j) += dhidden[j];
      for (std::size_t i = 0; i < w.inputs; ++i) g.w1(j, i) += dhidden[j] * xi[i];
    }
  }
  if (grad) *grad = std::move(g.params);
  return loss / n;
}

inline MlpModel fit_mlp(const MlpConfig& cfg, std::uint64_t seed, const Matrix& x, std::span<const int> y,
                        std::span<const double> class_weights, int n_classes) {
  MlpModel m;
  m.weights = init_mlp(x.cols(), static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(n_classes), seed);
  m.trained.resize(static_cast<std::size_t>(n_classes));
  for (std::size_t c = 0; c < m.trained.size(); ++c) m.trained[c] = class_weights[c] > 0.0;
  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    mlp_loss(m.weights, x, y, class_weights, &grad);
    for (std::size_t p = 0; p < grad.size(); ++p) m.weights.params[p] -= cfg.learning_rate * grad[p];
  }
  return m;
}

inline std::vector<int> predict(const MlpModel& m, const Matrix& x) {
  std::vector<int> out(x.rows());
  std::vector<double> hidden, probs;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    detail::mlp_forward(m.weights, x.row(r), hidden, probs);
    int arg = -1;
    for (std::size_t c = 0; c < probs.size(); ++c) {
      if (m.trained[c] && (arg < 0 || probs[c] > probs[static_cast<std::size_t>(arg)])) arg = static_cast<int>(c);
    }
    out[r] = std::max(arg, 0);
  }
  return out;
}

}  // namespace ewellness::ml
