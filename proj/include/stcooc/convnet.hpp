#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "stcooc/tensor.hpp"

namespace stcooc {

enum class LayerKind : std::uint8_t {
  conv2d = 0,
  conv3d = 1,
  relu = 2,
  maxpool2d = 3,
  maxpool3d = 4,
  fully_connected = 5,
  softmax = 6,
};

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct Extent3 {
  int t = 1;
  int h = 1;
  int w = 1;
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

/// One layer of a network. `kernel` and `stride` apply to conv and pool
/// layers, `out_channels` to conv and fully-connected layers. Every layer is
/// a named tap.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;
  Extent3 kernel;
  Extent3 stride;
  int out_channels = 0;

  static LayerSpec conv2d(std::string name, int out_channels, int k, int stride = 1);
  static LayerSpec conv3d(std::string name, int out_channels, int kt, int k, int stride = 1);
  static LayerSpec relu(std::string name);
  static LayerSpec maxpool2d(std::string name, int k, int stride);
  static LayerSpec maxpool3d(std::string name, int kt, int k, int stride_t, int stride);
  static LayerSpec fully_connected(std::string name, int out_channels);
  static LayerSpec softmax(std::string name);

  bool has_params() const {
    return kind == LayerKind::conv2d || kind == LayerKind::conv3d || kind == LayerKind::fully_connected;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Shape {
  int frames = 1;
  int height = 1;
  int width = 1;
  int depth = 1;

  Eigen::Index size() const { return Eigen::Index(frames) * height * width * depth; }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename Scalar>
Shape shape_of(const Tensor<Scalar>& t) {
  return {t.frames(), t.height(), t.width(), t.depth()};
}

/// Output shape of one layer; throws ShapeError on incompatible input.
Shape layer_output_shape(const LayerSpec& spec, const Shape& in);

/// Validates a layer list against an input declaration and returns the
/// output shape of every layer. Names must be nonempty and unique, and conv3d
/// layers need a multi-frame (temporal window) input.
std::vector<Shape> infer_shapes(const Shape& input, const std::vector<LayerSpec>& layers);

/// Conv weights are (out_channels x kt*kh*kw*in_channels) with the column
/// index ((dt*kh + di)*kw + dj)*in_channels + c. Fully-connected weights are
/// (out x in) over the row-major flattened input.
template <typename Scalar>
struct LayerParams {
  MatrixX<Scalar> weights;
  VectorX<Scalar> bias;

  template <typename Other>
  LayerParams<Other> cast() const {
    return {weights.template cast<Other>(), bias.template cast<Other>()};
  }
};

template <typename Scalar>
using Gradients = std::vector<LayerParams<Scalar>>;

/// Uniform deterministic draws from a 64-bit Mersenne twister. The engine's
/// output sequence is fixed by the standard; the conversions below are ours,
/// so results do not depend on the library's distribution implementations.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1) with 53 random bits.
  double next() { return double(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform index in [0, n).
  std::size_t below(std::size_t n) { return std::size_t(next() * double(n)); }
  /// Standard normal draw (Box-Muller).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

template <typename Scalar>
class Network {
 public:
  Network() = default;

  /// Fresh network with uniform +-sqrt(6/(fan_in+fan_out)) weights and zero biases.
  Network(Shape input, std::vector<LayerSpec> layers, std::uint64_t seed)
      : input_(input), layers_(std::move(layers)) {
    shapes_ = infer_shapes(input_, layers_);
    UniformSource rng(seed);
    params_.resize(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (!layers_[k].has_params()) continue;
      const auto [rows, cols] = param_dims(k);
      const int receptive = layers_[k].kind == LayerKind::fully_connected
                                ? 1
                                : layers_[k].kernel.t * layers_[k].kernel.h * layers_[k].kernel.w;
      const double limit = std::sqrt(6.0 / double(cols + rows * receptive));
      MatrixX<Scalar> w(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = Scalar((2.0 * rng.next() - 1.0) * limit);
      params_[k].weights = std::move(w);
      params_[k].bias = VectorX<Scalar>::Zero(rows);
    }
  }

  Network(Shape input, std::vector<LayerSpec> layers, std::vector<LayerParams<Scalar>> params)
      : input_(input), layers_(std::move(layers)), params_(std::move(params)) {
    shapes_ = infer_shapes(input_, layers_);
    if (params_.size() != layers_.size()) throw ShapeError("parameter list length differs from layer count");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (!layers_[k].has_params()) {
        if (params_[k].weights.size() != 0 || params_[k].bias.size() != 0)
          throw ShapeError("layer " + layers_[k].name + " takes no parameters");
        continue;
      }
      const auto [rows, cols] = param_dims(k);
      if (params_[k].weights.rows() != rows || params_[k].weights.cols() != cols || params_[k].bias.size() != rows)
        throw ShapeError("parameter shape mismatch at layer " + layers_[k].name);
    }
  }

  const Shape& input_shape() const { return input_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<Shape>& output_shapes() const { return shapes_; }
  const std::vector<LayerParams<Scalar>>& params() const { return params_; }
  std::vector<LayerParams<Scalar>>& params() { return params_; }

  bool temporal_window() const { return input_.frames > 1; }
  Eigen::Index output_size() const { return shapes_.empty() ? 0 : shapes_.back().size(); }

  /// Index of the layer with this name, if any.
  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t k = 0; k < layers_.size(); ++k)
      if (layers_[k].name == name) return k;
    return std::nullopt;
  }

  Shape layer_input_shape(std::size_t k) const { return k == 0 ? input_ : shapes_[k - 1]; }

  std::pair<Eigen::Index, Eigen::Index> param_dims(std::size_t k) const {
    const LayerSpec& l = layers_[k];
    const Shape in = layer_input_shape(k);
    if (l.kind == LayerKind::fully_connected) return {l.out_channels, in.size()};
    return {l.out_channels, Eigen::Index(l.kernel.t) * l.kernel.h * l.kernel.w * in.depth};
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.weights.size() + p.bias.size();
    return n;
  }

  template <typename Other>
  Network<Other> cast() const {
    std::vector<LayerParams<Other>> converted;
    converted.reserve(params_.size());
    for (const auto& p : params_) converted.push_back(p.template cast<Other>());
    return Network<Other>(input_, layers_, std::move(converted));
  }

 private:
  Shape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<LayerParams<Scalar>> params_;
};

/// Every layer output of one forward pass plus what backward needs.
template <typename Scalar>
struct ForwardTrace {
  Tensor<Scalar> input;
  std::vector<Tensor<Scalar>> outputs;
  std::vector<std::vector<Eigen::Index>> argmax;  // per max-pool layer, source index per output

  const Tensor<Scalar>& output() const { return outputs.back(); }
};

template <typename Scalar>
using TapMap = std::map<std::string, Tensor<Scalar>>;

namespace detail {

struct ConvGeometry {
  int in_t, in_h, in_w, in_c;
  int kt, kh, kw;
  int st, sh, sw;
  int pad_h, pad_w;
  int out_t, out_h, out_w;
};

ConvGeometry conv_geometry(const LayerSpec& spec, const Shape& in);

template <typename Scalar>
RowMatrixX<Scalar> im2col(const Tensor<Scalar>& in, const ConvGeometry& g) {
  const Eigen::Index patch = Eigen::Index(g.kt) * g.kh * g.kw * g.in_c;
  RowMatrixX<Scalar> cols = RowMatrixX<Scalar>::Zero(Eigen::Index(g.out_t) * g.out_h * g.out_w, patch);
  Eigen::Index row = 0;
  for (int to = 0; to < g.out_t; ++to)
    for (int io = 0; io < g.out_h; ++io)
      for (int jo = 0; jo < g.out_w; ++jo, ++row) {
        Scalar* dst = cols.row(row).data();
        for (int dt = 0; dt < g.kt; ++dt) {
          const int t = to * g.st + dt;
          for (int di = 0; di < g.kh; ++di) {
            const int i = io * g.sh + di - g.pad_h;
            for (int dj = 0; dj < g.kw; ++dj) {
              const int j = jo * g.sw + dj - g.pad_w;
              Scalar* cell = dst + ((Eigen::Index(dt) * g.kh + di) * g.kw + dj) * g.in_c;
              if (i < 0 || j < 0 || i >= g.in_h || j >= g.in_w) continue;
              const Scalar* src = in.data() + in.index(t, i, j, 0);
              for (int c = 0; c < g.in_c; ++c) cell[c] = src[c];
            }
          }
        }
      }
  return cols;
}

template <typename Scalar>
void col2im_add(const RowMatrixX<Scalar>& cols, const ConvGeometry& g, Tensor<Scalar>& grad_in) {
  Eigen::Index row = 0;
  for (int to = 0; to < g.out_t; ++to)
    for (int io = 0; io < g.out_h; ++io)
      for (int jo = 0; jo < g.out_w; ++jo, ++row) {
        const Scalar* src = cols.row(row).data();
        for (int dt = 0; dt < g.kt; ++dt) {
          const int t = to * g.st + dt;
          for (int di = 0; di < g.kh; ++di) {
            const int i = io * g.sh + di - g.pad_h;
            for (int dj = 0; dj < g.kw; ++dj) {
              const int j = jo * g.sw + dj - g.pad_w;
              if (i < 0 || j < 0 || i >= g.in_h || j >= g.in_w) continue;
              const Scalar* cell = src + ((Eigen::Index(dt) * g.kh + di) * g.kw + dj) * g.in_c;
              Scalar* dst = grad_in.data() + grad_in.index(t, i, j, 0);
              for (int c = 0; c < g.in_c; ++c) dst[c] += cell[c];
            }
          }
        }
      }
}

template <typename Scalar>
Tensor<Scalar> conv_forward(const LayerSpec& spec, const LayerParams<Scalar>& p, const Tensor<Scalar>& in) {
  const ConvGeometry g = conv_geometry(spec, shape_of(in));
  const RowMatrixX<Scalar> cols = im2col(in, g);
  Tensor<Scalar> out(g.out_t, g.out_h, g.out_w, spec.out_channels);
  auto o = out.pixels();
  o.noalias() = cols * p.weights.transpose();
  o.rowwise() += p.bias.transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> maxpool_forward(const LayerSpec& spec, const Tensor<Scalar>& in, std::vector<Eigen::Index>& argmax) {
  const Shape os = layer_output_shape(spec, shape_of(in));
  Tensor<Scalar> out(os.frames, os.height, os.width, os.depth);
  argmax.assign(std::size_t(out.size()), 0);
  for (int to = 0; to < os.frames; ++to)
    for (int io = 0; io < os.height; ++io)
      for (int jo = 0; jo < os.width; ++jo)
        for (int c = 0; c < os.depth; ++c) {
          Eigen::Index best = in.index(to * spec.stride.t, io * spec.stride.h, jo * spec.stride.w, c);
          for (int dt = 0; dt < spec.kernel.t; ++dt)
            for (int di = 0; di < spec.kernel.h; ++di)
              for (int dj = 0; dj < spec.kernel.w; ++dj) {
                const Eigen::Index idx = in.index(to * spec.stride.t + dt, io * spec.stride.h + di,
                                                  jo * spec.stride.w + dj, c);
                if (in.values()[idx] > in.values()[best]) best = idx;
              }
          const Eigen::Index o = out.index(to, io, jo, c);
          out.values()[o] = in.values()[best];
          argmax[std::size_t(o)] = best;
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& t, const Shape& s) {
  return Tensor<Scalar>(s.frames, s.height, s.width, s.depth, t.values());
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
Tensor<Scalar> layer_forward(const LayerSpec& spec, const LayerParams<Scalar>& p, const Tensor<Scalar>& in,
                             const Shape& out_shape, std::vector<Eigen::Index>& argmax) {
  switch (spec.kind) {
    case LayerKind::conv2d:
    case LayerKind::conv3d:
      return conv_forward(spec, p, in);
    case LayerKind::relu: {
      Tensor<Scalar> out = in;
      out.values() = out.values().cwiseMax(Scalar(0));
      return out;
    }
    case LayerKind::maxpool2d:
    case LayerKind::maxpool3d:
      return maxpool_forward(spec, in, argmax);
    case LayerKind::fully_connected: {
      VectorX<Scalar> y = p.weights * in.values() + p.bias;
      return Tensor<Scalar>(out_shape.frames, out_shape.height, out_shape.width, out_shape.depth, std::move(y));
    }
    case LayerKind::softmax:
      return Tensor<Scalar>(out_shape.frames, out_shape.height, out_shape.width, out_shape.depth,
                            softmax<Scalar>(in.values()));
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace detail

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const Network<Scalar>& net, const Tensor<Scalar>& input) {
  if (!(shape_of(input) == net.input_shape()))
    throw ShapeError("input shape " + shape_of(input).to_string() + " does not match declared " +
                     net.input_shape().to_string());
  ForwardTrace<Scalar> trace;
  trace.input = input;
  trace.outputs.reserve(net.layers().size());
  trace.argmax.resize(net.layers().size());
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const Tensor<Scalar>& in = k == 0 ? trace.input : trace.outputs.back();
    trace.outputs.push_back(
        detail::layer_forward(net.layers()[k], net.params()[k], in, net.output_shapes()[k], trace.argmax[k]));
  }
  return trace;
}

/// Activation of every named layer.
template <typename Scalar>
TapMap<Scalar> forward(const Network<Scalar>& net, const Tensor<Scalar>& input) {
  ForwardTrace<Scalar> trace = forward_trace(net, input);
  TapMap<Scalar> taps;
  for (std::size_t k = 0; k < net.layers().size(); ++k) taps.emplace(net.layers()[k].name, std::move(trace.outputs[k]));
  return taps;
}

/// Forward pass of a temporal-window network over exactly L stacked frames.
template <typename Scalar>
TapMap<Scalar> forward3d(const Network<Scalar>& net, std::span<const Tensor<Scalar>> window) {
  if (int(window.size()) != net.input_shape().frames)
    throw ShapeError("window has " + std::to_string(window.size()) + " frames, network expects " +
                     std::to_string(net.input_shape().frames));
  std::vector<Tensor<Scalar>> frames(window.begin(), window.end());
  const Tensor<Scalar>& first = frames.front();
  const Eigen::Index per = first.size();
  VectorX<Scalar> data(per * Eigen::Index(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].frames() != 1 || !frames[t].same_shape(first))
      throw ShapeError("window frames must be single frames of identical shape");
    data.segment(Eigen::Index(t) * per, per) = frames[t].values();
  }
  return forward(net, Tensor<Scalar>(int(frames.size()), first.height(), first.width(), first.depth(), std::move(data)));
}

/// Cross-entropy of the softmax output against `target`, computed stably from
/// the logits feeding the final softmax layer.
template <typename Scalar>
Scalar cross_entropy(const Network<Scalar>& net, const ForwardTrace<Scalar>& trace, int target) {
  const std::size_t last = net.layers().size() - 1;
  const Tensor<Scalar>& logits = last == 0 ? trace.input : trace.outputs[last - 1];
  const Scalar top = logits.values().maxCoeff();
  const Scalar lse = top + std::log((logits.values().array() - top).exp().sum());
  return lse - logits.values()[target];
}

template <typename Scalar>
struct BackwardResult {
  Scalar loss = 0;
  Gradients<Scalar> gradients;
  VectorX<Scalar> probabilities;
};

namespace detail {

template <typename Scalar>
void check_training_target(const Network<Scalar>& net, int target) {
  if (net.layers().empty() || net.layers().back().kind != LayerKind::softmax)
    throw ShapeError("training needs a network ending in a softmax layer");
  if (target < 0 || target >= net.output_size())
    throw InvalidValue("target class " + std::to_string(target) + " outside [0, " +
                       std::to_string(net.output_size()) + ")");
}

}  // namespace detail

/// Gradients of the cross-entropy loss at the softmax tap with respect to
/// every parameter. Throws DivergenceError naming the first layer whose
/// output is non-finite.
template <typename Scalar>
BackwardResult<Scalar> backward(const Network<Scalar>& net, const Tensor<Scalar>& input, int target) {
  detail::check_training_target(net, target);
  const ForwardTrace<Scalar> trace = forward_trace(net, input);
  for (std::size_t k = 0; k < trace.outputs.size(); ++k)
    if (!trace.outputs[k].all_finite()) throw DivergenceError("non-finite activation at layer " + net.layers()[k].name);

  BackwardResult<Scalar> result;
  result.loss = cross_entropy(net, trace, target);
  if (!std::isfinite(double(result.loss)))
    throw DivergenceError("non-finite loss at layer " + net.layers().back().name);
  result.probabilities = trace.output().values();
  result.gradients.resize(net.layers().size());

  const std::size_t n = net.layers().size();
  // Softmax + cross-entropy: d loss / d logits = p - onehot.
  Tensor<Scalar> grad = trace.output();
  grad.values()[target] -= Scalar(1);
  for (std::size_t k = n - 1; k-- > 0;) {
    const LayerSpec& spec = net.layers()[k];
    const Tensor<Scalar>& in = k == 0 ? trace.input : trace.outputs[k - 1];
    const Shape in_shape = shape_of(in);
    Tensor<Scalar> grad_in(in_shape.frames, in_shape.height, in_shape.width, in_shape.depth);
    switch (spec.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d: {
        const detail::ConvGeometry g = detail::conv_geometry(spec, in_shape);
        const RowMatrixX<Scalar> cols = detail::im2col(in, g);
        const auto dout = grad.pixels();
        result.gradients[k].weights = dout.transpose() * cols;
        result.gradients[k].bias = dout.colwise().sum().transpose();
        const RowMatrixX<Scalar> dcols = dout * net.params()[k].weights;
        detail::col2im_add(dcols, g, grad_in);
        break;
      }
      case LayerKind::relu:
        grad_in.values() = (in.values().array() > Scalar(0)).select(grad.values(), Scalar(0));
        break;
      case LayerKind::maxpool2d:
      case LayerKind::maxpool3d: {
        const auto& src = trace.argmax[k];
        for (Eigen::Index o = 0; o < grad.size(); ++o) grad_in.values()[src[std::size_t(o)]] += grad.values()[o];
        break;
      }
      case LayerKind::fully_connected:
        result.gradients[k].weights = grad.values() * in.values().transpose();
        result.gradients[k].bias = grad.values();
        grad_in.values() = net.params()[k].weights.transpose() * grad.values();
        break;
      case LayerKind::softmax: {
        const VectorX<Scalar>& p = trace.outputs[k].values();
        const Scalar dot = p.dot(grad.values());
        grad_in.values() = p.cwiseProduct((grad.values().array() - dot).matrix());
        break;
      }
    }
    grad = std::move(grad_in);
  }
  return result;
}

/// Loss only, for finite-difference checks.
template <typename Scalar>
Scalar loss(const Network<Scalar>& net, const Tensor<Scalar>& input, int target) {
  detail::check_training_target(net, target);
  return cross_entropy(net, forward_trace(net, input), target);
}

struct SgdParams {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// Momentum buffers, one per parameter tensor.
template <typename Scalar>
struct SgdState {
  Gradients<Scalar> velocity;
};

/// v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v.
/// Weight decay touches weights only, not biases.
template <typename Scalar>
void sgd_step(Network<Scalar>& net, const Gradients<Scalar>& grads, const SgdParams& p, SgdState<Scalar>& state) {
  auto& params = net.params();
  if (grads.size() != params.size()) throw ShapeError("gradient list length differs from layer count");
  if (state.velocity.size() != params.size()) {
    state.velocity.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.velocity[k].weights = MatrixX<Scalar>::Zero(params[k].weights.rows(), params[k].weights.cols());
      state.velocity[k].bias = VectorX<Scalar>::Zero(params[k].bias.size());
    }
  }
  const Scalar lr = Scalar(p.learning_rate), mu = Scalar(p.momentum), wd = Scalar(p.weight_decay);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].weights.size() == 0) continue;
    auto& v = state.velocity[k];
    v.weights = mu * v.weights + grads[k].weights + wd * params[k].weights;
    v.bias = mu * v.bias + grads[k].bias;
    params[k].weights -= lr * v.weights;
    params[k].bias -= lr * v.bias;
  }
}

struct TrainParams {
  SgdParams sgd;
  int epochs = 10;
  int batch_size = 16;
  double lr_decay = 1.0;  // multiplies the learning rate after each epoch
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Mini-batch SGD over `count` samples fetched by index. Sample order is
/// reshuffled per epoch from `params.seed`; gradients are averaged over each
/// batch in a fixed order, so runs are bitwise reproducible.
template <typename Scalar>
TrainReport train(Network<Scalar>& net, std::size_t count,
                  const std::function<Tensor<Scalar>(std::size_t)>& sample,
                  const std::function<int(std::size_t)>& label, const TrainParams& params) {
  if (count == 0) throw InvalidValue("no training samples");
  if (params.batch_size < 1 || params.epochs < 0) throw InvalidValue("bad batch size or epoch count");
  TrainReport report;
  SgdState<Scalar> state;
  UniformSource rng(params.seed);
  std::vector<std::size_t> order(count);
  for (std::size_t k = 0; k < count; ++k) order[k] = k;
  SgdParams sgd = params.sgd;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t k = count; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    double total = 0.0;
    for (std::size_t start = 0; start < count; start += std::size_t(params.batch_size)) {
      const std::size_t end = std::min(count, start + std::size_t(params.batch_size));
      Gradients<Scalar> acc;
      for (std::size_t s = start; s < end; ++s) {
        BackwardResult<Scalar> r = backward(net, sample(order[s]), label(order[s]));
        total += double(r.loss);
        if (acc.empty()) {
          acc = std::move(r.gradients);
        } else {
          for (std::size_t k = 0; k < acc.size(); ++k) {
            if (acc[k].weights.size() == 0) continue;
            acc[k].weights += r.gradients[k].weights;
            acc[k].bias += r.gradients[k].bias;
          }
        }
      }
      const Scalar scale = Scalar(1) / Scalar(end - start);
      for (auto& g : acc) {
        g.weights *= scale;
        g.bias *= scale;
      }
      sgd_step(net, acc, sgd, state);
    }
    report.epoch_loss.push_back(total / double(count));
    sgd.learning_rate *= params.lr_decay;
  }
  return report;
}

template <typename Scalar>
TrainReport train(Network<Scalar>& net, std::span<const Tensor<Scalar>> inputs, std::span<const int> labels,
                  const TrainParams& params) {
  if (inputs.size() != labels.size()) throw ShapeError("inputs and labels differ in length");
  return train<Scalar>(
      net, inputs.size(), [&](std::size_t k) { return inputs[k]; }, [&](std::size_t k) { return labels[k]; },
      params);
}

/// Index of the largest softmax output; ties go to the lowest index.
template <typename Scalar>
int argmax_class(const Tensor<Scalar>& probabilities) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < probabilities.size(); ++k)
    if (probabilities.values()[k] > probabilities.values()[best]) best = k;
  return int(best);
}

/// conv(8, 3x3) relu pool2 conv(16, 3x3, "c5") relu pool2 fc(64, "fc6") relu
/// fc(32, "fc7") relu fc(num_classes) softmax("o").
std::vector<LayerSpec> default_stream_layers(int num_classes);

/// 3D counterpart for L-frame windows: spatial pool, two conv3d blocks with
/// temporal kernel 3 ("c1", "c5"), then the same fc6/fc7/softmax head.
std::vector<LayerSpec> default_window_layers(int num_classes);

/// "STWN" model container; network payload. Optional `expected` layer list is
/// checked against the stored descriptors.
void save_weights(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_weights(const std::filesystem::path& path,
                            const std::vector<LayerSpec>* expected = nullptr);

}  // namespace stcooc
