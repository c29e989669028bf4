#pragma once

#include <span>
#include <variant>
#include <vector>

#include "ewellness/ml/extra_trees.hpp"
#include "ewellness/ml/knn.hpp"
#include "ewellness/ml/linear_svm.hpp"
#include "ewellness/ml/mlp.hpp"
#include "ewellness/ml/model_spec.hpp"

namespace ewellness::ml {

using Model = std::variant<KnnModel, ExtraTreesModel, LinearSvmModel, MlpModel>;

// `class_weights` has one entry per class (0 for classes absent from y).
inline Model train_model(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                         std::span<const double> class_weights, int n_classes) {
  spec.validate();
  if (x.rows() == 0) throw ValidationError("x", "empty training set");
  if (x.rows() != y.size()) throw ValidationError("y", "row count differs from label count");
  if (class_weights.size() != static_cast<std::size_t>(n_classes)) {
    throw ValidationError("class_weights", "expected one weight per class");
  }
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw ValidationError("y", "label out of range");
  }
  switch (spec.family) {
    case ModelFamily::knn: return fit_knn(spec.knn, x, y, class_weights, n_classes);
    case ModelFamily::extra_trees: return fit_extra_trees(spec.extra_trees, spec.seed, x, y, class_weights, n_classes);
    case ModelFamily::svm: return fit_svm(spec.svm, spec.seed, x, y, class_weights, n_classes);
    case ModelFamily::mlp: return fit_mlp(spec.mlp, spec.seed, x, y, class_weights, n_classes);
  }
  throw ValidationError("family", "unknown model family");
}

inline std::size_t input_width(const Model& model) {
  struct V {
    std::size_t operator()(const KnnModel& m) const { return m.x.cols(); }
    std::size_t operator()(const ExtraTreesModel& m) const { return m.n_features; }
    std::size_t operator()(const LinearSvmModel& m) const {
      for (const auto& w : m.weights)
        if (!w.empty()) return w.size() - 1;
      return 0;
    }
    std::size_t operator()(const MlpModel& m) const { return m.weights.inputs; }
  };
  return std::visit(V{}, model);
}

inline std::vector<int> predict(const Model& model, const Matrix& x) {
  const std::size_t width = input_width(model);
  if (width != 0 && x.rows() > 0 && x.cols() != width) {
    throw ValidationError("x", "feature count differs from the training data");
  }
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

}  // namespace ewellness::ml
