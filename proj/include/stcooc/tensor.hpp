#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stcooc/errors.hpp"

namespace stcooc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense activation volume of shape frames x height x width x depth.
///
/// Storage is a single contiguous buffer, row-major with the channel index
/// innermost: element (t, i, j, c) lives at ((t*H + i)*W + j)*D + c. A plain
/// image or feature map is a tensor with one frame; a window of L frames fed
/// to a 3D network is a tensor with L frames.
template <typename Scalar>
class Tensor {
 public:
  using Vector = VectorX<Scalar>;
  using PixelMap = Eigen::Map<RowMatrixX<Scalar>>;
  using ConstPixelMap = Eigen::Map<const RowMatrixX<Scalar>>;

  Tensor() = default;

  Tensor(int height, int width, int depth) : Tensor(1, height, width, depth) {}

  Tensor(int frames, int height, int width, int depth)
      : frames_(frames), height_(height), width_(width), depth_(depth) {
    if (frames <= 0 || height <= 0 || width <= 0 || depth <= 0)
      throw ShapeError("tensor dimensions must be positive, got " + shape_string());
    data_ = Vector::Zero(Eigen::Index(frames) * height * width * depth);
  }

  Tensor(int frames, int height, int width, int depth, Vector data)
      : Tensor(frames, height, width, depth) {
    if (data.size() != data_.size())
      throw ShapeError("payload length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string());
    data_ = std::move(data);
  }

  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int depth() const { return depth_; }
  Eigen::Index size() const { return data_.size(); }
  Eigen::Index pixel_count() const { return Eigen::Index(frames_) * height_ * width_; }
  bool empty() const { return data_.size() == 0; }

  Eigen::Index index(int t, int i, int j, int c) const {
    return ((Eigen::Index(t) * height_ + i) * width_ + j) * depth_ + c;
  }

  Scalar& operator()(int i, int j, int c) { return data_[index(0, i, j, c)]; }
  Scalar operator()(int i, int j, int c) const { return data_[index(0, i, j, c)]; }
  Scalar& operator()(int t, int i, int j, int c) { return data_[index(t, i, j, c)]; }
  Scalar operator()(int t, int i, int j, int c) const { return data_[index(t, i, j, c)]; }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// (pixels x depth) row-major view; row p holds the channel vector of pixel p.
  PixelMap pixels() { return PixelMap(data_.data(), pixel_count(), depth_); }
  ConstPixelMap pixels() const { return ConstPixelMap(data_.data(), pixel_count(), depth_); }

  bool same_shape(const Tensor& o) const {
    return frames_ == o.frames_ && height_ == o.height_ && width_ == o.width_ && depth_ == o.depth_;
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(frames_, height_, width_, depth_, data_.template cast<Other>());
  }

  /// Single frame t as a one-frame tensor.
  Tensor frame(int t) const {
    const Eigen::Index n = Eigen::Index(height_) * width_ * depth_;
    return Tensor(1, height_, width_, depth_, data_.segment(Eigen::Index(t) * n, n));
  }

  std::string shape_string() const {
    std::string s = std::to_string(frames_) + "x" + std::to_string(height_) + "x" +
                    std::to_string(width_) + "x" + std::to_string(depth_);
    return s;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int frames_ = 0;
  int height_ = 0;
  int width_ = 0;
  int depth_ = 0;
  Vector data_;
};

/// Images, flow maps and convolutional activations at storage precision.
using FeatureMap = Tensor<float>;

enum class Provenance : std::uint8_t {
  fc6_spatial,
  fc6_temporal,
  softmax_spatial,
  softmax_temporal,
  bilinear,
  concat,
};

std::string_view to_string(Provenance p);

/// A flat, finite, nonempty feature with a record of where it came from.
struct FeatureVector {
  Eigen::VectorXf data;
  Provenance provenance = Provenance::concat;

  FeatureVector() = default;
  FeatureVector(Eigen::VectorXf values, Provenance p);

  Eigen::Index size() const { return data.size(); }
};

/// Scales v to unit Euclidean norm. The all-zero vector is returned unchanged.
/// Throws InvalidValue on non-finite input.
FeatureVector l2_normalize(const FeatureVector& v);

/// Same rule on a raw vector, 64-bit accumulation.
Eigen::VectorXf l2_normalized(const Eigen::VectorXf& v);

/// Stacks same-shaped one-frame maps into a multi-frame tensor.
FeatureMap stack_frames(const std::vector<FeatureMap>& frames);

}  // namespace stcooc
