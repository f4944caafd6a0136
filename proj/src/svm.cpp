#include "stcooc/svm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stcooc/convnet.hpp"
#include "stcooc/model_file.hpp"

namespace stcooc {

namespace {

// Regularised hinge objective with the bias as the last weight component.
double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda) {
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd margins = (x * w.head(d)).array() + w[d];
  const double hinge = (1.0 - y.array() * margins.array()).max(0.0).sum() / double(x.rows());
  return 0.5 * lambda * w.squaredNorm() + hinge;
}

}  // namespace

SvmTraining train_svm_traced(const Eigen::MatrixXf& features, const std::vector<int>& labels,
                             const SvmParams& params) {
  if (features.rows() != Eigen::Index(labels.size()))
    throw ShapeError("feature count " + std::to_string(features.rows()) + " differs from label count " +
                     std::to_string(labels.size()));
  if (features.rows() == 0 || features.cols() == 0) throw ShapeError("empty training set");
  if (!(params.lambda > 0.0)) throw InvalidValue("lambda must be positive");
  if (params.epochs < 1) throw InvalidValue("epochs must be >= 1");
  if (!features.allFinite()) throw InvalidValue("non-finite training feature");
  for (int l : labels)
    if (l < 0) throw InvalidValue("negative class label");
  const std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DegenerateLabels("training set has a single class");

  const int classes = *present.rbegin() + 1;
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  const Eigen::MatrixXd x = features.cast<double>();
  const double radius = 1.0 / std::sqrt(params.lambda);

  SvmTraining out;
  out.model.weights.resize(classes, d);
  out.model.bias.resize(classes);
  out.model.lambda = params.lambda;
  out.objective.resize(std::size_t(classes));

  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) y[k] = labels[std::size_t(k)] == c ? 1.0 : -1.0;
    UniformSource rng(derive_seed(params.seed, "svm-class-" + std::to_string(c)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) order[std::size_t(k)] = k;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd best = w;
    double best_obj = objective(x, y, w, params.lambda);
    double t = 0.0;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
      if (params.shuffle)
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
      for (Eigen::Index idx : order) {
        t += 1.0;
        const double eta = 1.0 / (params.lambda * t);
        const double margin = y[idx] * (x.row(idx).dot(w.head(d)) + w[d]);
        w *= 1.0 - eta * params.lambda;
        if (margin < 1.0) {
          w.head(d) += eta * y[idx] * x.row(idx).transpose();
          w[d] += eta * y[idx];
        }
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
      }
      const double obj = objective(x, y, w, params.lambda);
      if (obj <= best_obj) {
        best_obj = obj;
        best = w;
      } else {
        w = best;
      }
      out.objective[std::size_t(c)].push_back(best_obj);
    }
    out.model.weights.row(c) = best.head(d).cast<float>().transpose();
    out.model.bias[c] = float(best[d]);
  }
  return out;
}

Eigen::MatrixXf stack_features(const std::vector<FeatureVector>& features) {
  if (features.empty()) return {};
  const Eigen::Index d = features.front().size();
  Eigen::MatrixXf x(Eigen::Index(features.size()), d);
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].size() != d)
      throw ShapeError("feature " + std::to_string(k) + " has length " + std::to_string(features[k].size()) +
                       ", expected " + std::to_string(d));
    x.row(Eigen::Index(k)) = features[k].data.transpose();
  }
  return x;
}

LinearModel train_svm(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                      const SvmParams& params) {
  return train_svm_traced(stack_features(features), labels, params).model;
}

Prediction predict(const LinearModel& model, const Eigen::VectorXf& feature) {
  if (feature.size() != model.dimension())
    throw ShapeError("feature length " + std::to_string(feature.size()) + " differs from model dimension " +
                     std::to_string(model.dimension()));
  Prediction p;
  p.scores = (model.weights.cast<double>() * feature.cast<double>() + model.bias.cast<double>()).cast<float>();
  for (Eigen::Index c = 1; c < p.scores.size(); ++c)
    if (p.scores[c] > p.scores[p.label]) p.label = int(c);
  return p;
}

Prediction predict(const LinearModel& model, const FeatureVector& feature) { return predict(model, feature.data); }

void save_svm(const LinearModel& model, const std::filesystem::path& path) {
  std::string bytes = model_file::header(model_file::Kind::svm);
  detail::put_u32(bytes, std::uint32_t(model.weights.rows()));
  detail::put_u32(bytes, std::uint32_t(model.weights.cols()));
  model_file::put_f64(bytes, model.lambda);
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) detail::put_f32(bytes, model.weights(r, c));
  for (Eigen::Index r = 0; r < model.bias.size(); ++r) detail::put_f32(bytes, model.bias[r]);
  detail::write_file(path, bytes);
}

LinearModel load_svm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  model_file::Reader rd(bytes, path.string());
  rd.expect_header(model_file::Kind::svm);
  const std::uint32_t rows = rd.u32();
  const std::uint32_t cols = rd.u32();
  LinearModel m;
  m.lambda = rd.f64();
  if (std::uint64_t(rows) * (std::uint64_t(cols) + 1) > rd.remaining() / 4)
    throw FormatError(path.string() + ": truncated payload");
  m.weights.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m.weights(r, c) = rd.f32();
  m.bias.resize(rows);
  for (std::uint32_t r = 0; r < rows; ++r) m.bias[r] = rd.f32();
  rd.expect_end();
  return m;
}

}  // namespace stcooc
