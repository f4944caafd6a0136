#include "stcooc/fusion.hpp"

#include <cmath>

namespace stcooc {

Pooling parse_pooling(const std::string& name) {
  if (name == "max") return Pooling::max;
  if (name == "sum") return Pooling::sum;
  throw InvalidValue("unknown pooling '" + name + "'");
}

std::string_view to_string(Pooling p) { return p == Pooling::max ? "max" : "sum"; }

Eigen::VectorXd bilinear_pooled(const FeatureMap& spatial, const FeatureMap& temporal, Pooling pooling) {
  if (!spatial.same_shape(temporal))
    throw ShapeError("co-occurrence inputs differ in shape: " + spatial.shape_string() + " vs " +
                     temporal.shape_string());
  const Eigen::Index d = spatial.depth();
  const RowMatrixX<double> s = spatial.pixels().cast<double>();
  const RowMatrixX<double> t = temporal.pixels().cast<double>();
  RowMatrixX<double> pooled(d, d);
  if (pooling == Pooling::sum) {
    pooled.noalias() = s.transpose() * t;
  } else {
    pooled = s.row(0).transpose() * t.row(0);
    for (Eigen::Index p = 1; p < s.rows(); ++p) pooled = pooled.cwiseMax(s.row(p).transpose() * t.row(p));
  }
  return Eigen::Map<const Eigen::VectorXd>(pooled.data(), d * d);
}

CooccurrenceFeature bilinear_cooccurrence(const FeatureMap& spatial, const FeatureMap& temporal, Pooling pooling,
                                          const std::string& source_layer) {
  const Eigen::VectorXd raw = bilinear_pooled(spatial, temporal, pooling);
  if (!raw.allFinite()) throw InvalidValue("non-finite co-occurrence");
  const double norm = raw.norm();
  Eigen::VectorXf out = norm > 0.0 ? (raw / norm).cast<float>().eval() : raw.cast<float>().eval();
  return {FeatureVector(std::move(out), Provenance::bilinear), source_layer};
}

namespace {

Eigen::VectorXf concat(std::initializer_list<const Eigen::VectorXf*> parts) {
  Eigen::Index n = 0;
  for (const auto* p : parts) n += p->size();
  Eigen::VectorXf out(n);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

void expect(const FeatureVector& v, Provenance p, const char* role) {
  if (v.provenance != p)
    throw ProvenanceError(std::string(role) + " has provenance " + std::string(to_string(v.provenance)) +
                          ", expected " + std::string(to_string(p)));
  if (v.size() == 0) throw ProvenanceError(std::string(role) + " is empty");
}

void expect_probability(const FeatureVector& v, const char* role) {
  const double total = v.data.cast<double>().sum();
  if (std::abs(total - 1.0) > 1e-4 || (v.data.array() < 0.0f).any())
    throw InvalidValue(std::string(role) + " is not a probability vector (sum " + std::to_string(total) + ")");
}

}  // namespace

FeatureVector early_fusion(const FeatureVector& fc6_spatial, const FeatureVector& fc6_temporal) {
  expect(fc6_spatial, Provenance::fc6_spatial, "spatial fc6");
  expect(fc6_temporal, Provenance::fc6_temporal, "temporal fc6");
  return FeatureVector(concat({&fc6_spatial.data, &fc6_temporal.data}), Provenance::concat);
}

FeatureVector late_fusion(const FeatureVector& softmax_spatial, const FeatureVector& softmax_temporal) {
  expect(softmax_spatial, Provenance::softmax_spatial, "spatial softmax");
  expect(softmax_temporal, Provenance::softmax_temporal, "temporal softmax");
  expect_probability(softmax_spatial, "spatial softmax");
  expect_probability(softmax_temporal, "temporal softmax");
  return FeatureVector(concat({&softmax_spatial.data, &softmax_temporal.data}), Provenance::concat);
}

FeatureVector cooccurrence_with_fc6(const CooccurrenceFeature& bilinear, const FeatureVector& fc6_spatial,
                                    const FeatureVector& fc6_temporal) {
  expect(bilinear.feature, Provenance::bilinear, "co-occurrence feature");
  expect(fc6_spatial, Provenance::fc6_spatial, "spatial fc6");
  expect(fc6_temporal, Provenance::fc6_temporal, "temporal fc6");
  const double norm = bilinear.feature.data.cast<double>().norm();
  if (norm != 0.0 && std::abs(norm - 1.0) > 1e-4) throw InvalidValue("co-occurrence feature is not normalised");
  return FeatureVector(concat({&bilinear.feature.data, &fc6_spatial.data, &fc6_temporal.data}), Provenance::concat);
}

FeatureVector to_feature(const FeatureMap& activation, Provenance provenance) {
  return FeatureVector(activation.values(), provenance);
}

}  // namespace stcooc
