#include "stcooc/tensor.hpp"

#include <vector>

namespace stcooc {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::fc6_spatial: return "fc6_spatial";
    case Provenance::fc6_temporal: return "fc6_temporal";
    case Provenance::softmax_spatial: return "softmax_spatial";
    case Provenance::softmax_temporal: return "softmax_temporal";
    case Provenance::bilinear: return "bilinear";
    case Provenance::concat: return "concat";
  }
  return "unknown";
}

FeatureVector::FeatureVector(Eigen::VectorXf values, Provenance p)
    : data(std::move(values)), provenance(p) {
  if (data.size() == 0) throw InvalidValue("feature vector must be nonempty");
  if (!data.allFinite()) throw InvalidValue("feature vector has non-finite values");
}

Eigen::VectorXf l2_normalized(const Eigen::VectorXf& v) {
  if (v.size() == 0) throw InvalidValue("cannot normalize an empty vector");
  if (!v.allFinite()) throw InvalidValue("cannot normalize a non-finite vector");
  const Eigen::VectorXd wide = v.cast<double>();
  const double norm = wide.norm();
  if (norm == 0.0) return v;
  return (wide / norm).cast<float>();
}

FeatureVector l2_normalize(const FeatureVector& v) {
  return FeatureVector(l2_normalized(v.data), v.provenance);
}

FeatureMap stack_frames(const std::vector<FeatureMap>& frames) {
  if (frames.empty()) throw ShapeError("cannot stack zero frames");
  const FeatureMap& first = frames.front();
  const Eigen::Index per = first.size();
  Eigen::VectorXf data(per * Eigen::Index(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FeatureMap& f = frames[t];
    if (f.frames() != 1 || f.height() != first.height() || f.width() != first.width() ||
        f.depth() != first.depth())
      throw ShapeError("frame " + std::to_string(t) + " has shape " + f.shape_string() +
                       ", expected " + first.shape_string());
    data.segment(Eigen::Index(t) * per, per) = f.values();
  }
  return FeatureMap(int(frames.size()), first.height(), first.width(), first.depth(),
                    std::move(data));
}

}  // namespace stcooc
