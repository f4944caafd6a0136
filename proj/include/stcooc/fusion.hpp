#pragma once

#include <string>

#include "stcooc/tensor.hpp"

namespace stcooc {

enum class Pooling { max, sum };

Pooling parse_pooling(const std::string& name);
std::string_view to_string(Pooling p);

/// L2-normalised pooled co-occurrence feature of length d^2.
struct CooccurrenceFeature {
  FeatureVector feature;
  std::string source_layer = "c5";
};

/// Pooled outer products before normalisation. Element a*d + b is the pooled
/// value of S_a * T_b over all locations (row-major vec of S T^T). Products
/// and comparisons are done in double.
Eigen::VectorXd bilinear_pooled(const FeatureMap& spatial, const FeatureMap& temporal,
                                Pooling pooling = Pooling::max);

/// Spatio-temporal co-occurrence: per-location outer product, pooled over
/// locations (max by default), then L2-normalised.
CooccurrenceFeature bilinear_cooccurrence(const FeatureMap& spatial, const FeatureMap& temporal,
                                          Pooling pooling = Pooling::max,
                                          const std::string& source_layer = "c5");

/// fc6 concatenation, spatial first.
FeatureVector early_fusion(const FeatureVector& fc6_spatial, const FeatureVector& fc6_temporal);

/// Softmax concatenation, spatial first. Inputs must each sum to 1 within 1e-4.
FeatureVector late_fusion(const FeatureVector& softmax_spatial, const FeatureVector& softmax_temporal);

/// (bilinear, fc6 spatial, fc6 temporal) concatenation.
FeatureVector cooccurrence_with_fc6(const CooccurrenceFeature& bilinear, const FeatureVector& fc6_spatial,
                                    const FeatureVector& fc6_temporal);

/// Flat activation of a tap as a feature vector.
FeatureVector to_feature(const FeatureMap& activation, Provenance provenance);

}  // namespace stcooc
