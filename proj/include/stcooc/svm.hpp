#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stcooc/tensor.hpp"

namespace stcooc {

/// One-vs-rest linear classifier: score_c(x) = w_c . x + b_c.
struct LinearModel {
  Eigen::MatrixXf weights;  // C x D
  Eigen::VectorXf bias;     // C
  double lambda = 1e-4;

  int num_classes() const { return int(weights.rows()); }
  Eigen::Index dimension() const { return weights.cols(); }
};

struct SvmParams {
  double lambda = 1e-4;
  int epochs = 100;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

struct SvmTraining {
  LinearModel model;
  /// objective[c][e]: regularised hinge objective of class c's binary problem
  /// after epoch e, over the whole training set.
  std::vector<std::vector<double>> objective;
};

/// Pegasos-style subgradient descent per one-vs-rest problem, step 1/(lambda t),
/// bias folded in as a constant feature and projected onto the 1/sqrt(lambda)
/// ball. After each epoch the iterate is kept only if it lowers the full-set
/// objective, so the recorded objective never increases.
SvmTraining train_svm_traced(const Eigen::MatrixXf& features, const std::vector<int>& labels,
                             const SvmParams& params);

LinearModel train_svm(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                      const SvmParams& params = {});

struct Prediction {
  int label = 0;
  Eigen::VectorXf scores;
};

/// argmax of the class scores, ties to the lowest index.
Prediction predict(const LinearModel& model, const Eigen::VectorXf& feature);
Prediction predict(const LinearModel& model, const FeatureVector& feature);

/// Row-stacks features into an N x D matrix; throws ShapeError on ragged input.
Eigen::MatrixXf stack_features(const std::vector<FeatureVector>& features);

void save_svm(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_svm(const std::filesystem::path& path);

}  // namespace stcooc
