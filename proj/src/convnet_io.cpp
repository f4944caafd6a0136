#include <array>
#include <cstring>
#include <numbers>

#include "stcooc/convnet.hpp"
#include "stcooc/io.hpp"
#include "stcooc/model_file.hpp"

namespace stcooc {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::conv2d, LayerKind::conv3d, LayerKind::relu, LayerKind::maxpool2d,
                 LayerKind::maxpool3d, LayerKind::fully_connected, LayerKind::softmax})
    if (to_string(k) == name) return k;
  throw InvalidValue("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(std::string name, int out_channels, int k, int stride) {
  return {LayerKind::conv2d, std::move(name), {1, k, k}, {1, stride, stride}, out_channels};
}
LayerSpec LayerSpec::conv3d(std::string name, int out_channels, int kt, int k, int stride) {
  return {LayerKind::conv3d, std::move(name), {kt, k, k}, {1, stride, stride}, out_channels};
}
LayerSpec LayerSpec::relu(std::string name) { return {LayerKind::relu, std::move(name), {}, {}, 0}; }
LayerSpec LayerSpec::maxpool2d(std::string name, int k, int stride) {
  return {LayerKind::maxpool2d, std::move(name), {1, k, k}, {1, stride, stride}, 0};
}
LayerSpec LayerSpec::maxpool3d(std::string name, int kt, int k, int stride_t, int stride) {
  return {LayerKind::maxpool3d, std::move(name), {kt, k, k}, {stride_t, stride, stride}, 0};
}
LayerSpec LayerSpec::fully_connected(std::string name, int out_channels) {
  return {LayerKind::fully_connected, std::move(name), {}, {}, out_channels};
}
LayerSpec LayerSpec::softmax(std::string name) { return {LayerKind::softmax, std::move(name), {}, {}, 0}; }

std::string Shape::to_string() const {
  return std::to_string(frames) + "x" + std::to_string(height) + "x" + std::to_string(width) + "x" +
         std::to_string(depth);
}

namespace detail {

ConvGeometry conv_geometry(const LayerSpec& spec, const Shape& in) {
  ConvGeometry g{};
  g.in_t = in.frames;
  g.in_h = in.height;
  g.in_w = in.width;
  g.in_c = in.depth;
  g.kt = spec.kernel.t;
  g.kh = spec.kernel.h;
  g.kw = spec.kernel.w;
  g.st = spec.stride.t;
  g.sh = spec.stride.h;
  g.sw = spec.stride.w;
  g.pad_h = (g.kh - 1) / 2;
  g.pad_w = (g.kw - 1) / 2;
  g.out_t = (g.in_t - g.kt) / g.st + 1;
  g.out_h = (g.in_h + 2 * g.pad_h - g.kh) / g.sh + 1;
  g.out_w = (g.in_w + 2 * g.pad_w - g.kw) / g.sw + 1;
  return g;
}

}  // namespace detail

namespace {

void require(bool ok, const LayerSpec& spec, const std::string& what) {
  if (!ok) throw ShapeError("layer '" + spec.name + "' (" + std::string(to_string(spec.kind)) + "): " + what);
}

}  // namespace

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  switch (spec.kind) {
    case LayerKind::conv2d:
    case LayerKind::conv3d: {
      require(spec.out_channels > 0, spec, "out_channels must be positive");
      require(spec.kernel.t >= 1 && spec.kernel.h >= 1 && spec.kernel.w >= 1, spec, "bad kernel");
      require(spec.stride.t >= 1 && spec.stride.h >= 1 && spec.stride.w >= 1, spec, "bad stride");
      if (spec.kind == LayerKind::conv2d) require(spec.kernel.t == 1 && spec.stride.t == 1, spec, "2D kernels have no temporal extent");
      require(spec.kernel.t <= in.frames, spec, "temporal kernel longer than input " + in.to_string());
      const auto g = detail::conv_geometry(spec, in);
      require(g.out_h >= 1 && g.out_w >= 1, spec, "kernel larger than input " + in.to_string());
      return {g.out_t, g.out_h, g.out_w, spec.out_channels};
    }
    case LayerKind::maxpool2d:
    case LayerKind::maxpool3d: {
      require(spec.kernel.t >= 1 && spec.kernel.h >= 1 && spec.kernel.w >= 1, spec, "bad kernel");
      require(spec.stride.t >= 1 && spec.stride.h >= 1 && spec.stride.w >= 1, spec, "bad stride");
      if (spec.kind == LayerKind::maxpool2d) require(spec.kernel.t == 1 && spec.stride.t == 1, spec, "2D pooling has no temporal extent");
      require(spec.kernel.t <= in.frames && spec.kernel.h <= in.height && spec.kernel.w <= in.width, spec,
              "pool window larger than input " + in.to_string());
      return {(in.frames - spec.kernel.t) / spec.stride.t + 1, (in.height - spec.kernel.h) / spec.stride.h + 1,
              (in.width - spec.kernel.w) / spec.stride.w + 1, in.depth};
    }
    case LayerKind::relu:
    case LayerKind::softmax:
      return in;
    case LayerKind::fully_connected:
      require(spec.out_channels > 0, spec, "out_channels must be positive");
      return {1, 1, 1, spec.out_channels};
  }
  throw ShapeError("unknown layer kind");
}

std::vector<Shape> infer_shapes(const Shape& input, const std::vector<LayerSpec>& layers) {
  if (input.frames < 1 || input.height < 1 || input.width < 1 || input.depth < 1)
    throw ShapeError("input shape must be positive, got " + input.to_string());
  std::unordered_set<std::string> names;
  std::vector<Shape> shapes;
  Shape cur = input;
  for (const LayerSpec& spec : layers) {
    if (spec.name.empty()) throw ShapeError("every layer needs a tap name");
    if (!names.insert(spec.name).second) throw ShapeError("duplicate layer name '" + spec.name + "'");
    if (spec.kind == LayerKind::conv3d && input.frames <= 1)
      throw ShapeError("conv3d layer '" + spec.name + "' needs a temporal-window network");
    cur = layer_output_shape(spec, cur);
    shapes.push_back(cur);
  }
  return shapes;
}

double UniformSource::normal() {
  double u1 = next();
  while (u1 <= 0.0) u1 = next();
  const double u2 = next();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  // FNV-1a over the label, mixed with the seed through splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : label) h = (h ^ ch) * 1099511628211ull;
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<LayerSpec> default_stream_layers(int num_classes) {
  return {
      LayerSpec::conv2d("c1", 8, 3),          LayerSpec::relu("r1"),
      LayerSpec::maxpool2d("p1", 2, 2),       LayerSpec::conv2d("c5", 16, 3),
      LayerSpec::relu("r5"),                  LayerSpec::maxpool2d("p5", 2, 2),
      LayerSpec::fully_connected("fc6", 64),  LayerSpec::relu("r6"),
      LayerSpec::fully_connected("fc7", 32),  LayerSpec::relu("r7"),
      LayerSpec::fully_connected("fc8", num_classes), LayerSpec::softmax("o"),
  };
}

std::vector<LayerSpec> default_window_layers(int num_classes) {
  return {
      LayerSpec::maxpool3d("p0", 1, 2, 1, 2), LayerSpec::conv3d("c1", 8, 3, 3),
      LayerSpec::relu("r1"),                  LayerSpec::maxpool3d("p1", 1, 2, 1, 2),
      LayerSpec::conv3d("c5", 16, 3, 3),      LayerSpec::relu("r5"),
      LayerSpec::maxpool3d("p5", 2, 2, 2, 2), LayerSpec::fully_connected("fc6", 64),
      LayerSpec::relu("r6"),                  LayerSpec::fully_connected("fc7", 32),
      LayerSpec::relu("r7"),                  LayerSpec::fully_connected("fc8", num_classes),
      LayerSpec::softmax("o"),
  };
}

void save_weights(const Network<float>& net, const std::filesystem::path& path) {
  std::string bytes = model_file::header(model_file::Kind::network);
  const Shape& in = net.input_shape();
  for (int d : {in.frames, in.height, in.width, in.depth}) detail::put_u32(bytes, std::uint32_t(d));
  detail::put_u32(bytes, std::uint32_t(net.layers().size()));
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const LayerSpec& l = net.layers()[k];
    bytes.push_back(static_cast<char>(l.kind));
    detail::put_u32(bytes, std::uint32_t(l.name.size()));
    bytes += l.name;
    for (int v : {l.kernel.t, l.kernel.h, l.kernel.w, l.stride.t, l.stride.h, l.stride.w, l.out_channels})
      detail::put_u32(bytes, std::uint32_t(v));
    const auto& p = net.params()[k];
    detail::put_u32(bytes, std::uint32_t(p.weights.rows()));
    detail::put_u32(bytes, std::uint32_t(p.weights.cols()));
    detail::put_u32(bytes, std::uint32_t(p.bias.size()));
  }
  for (const auto& p : net.params()) {
    for (Eigen::Index r = 0; r < p.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights.cols(); ++c) detail::put_f32(bytes, p.weights(r, c));
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) detail::put_f32(bytes, p.bias[r]);
  }
  detail::write_file(path, bytes);
}

Network<float> load_weights(const std::filesystem::path& path, const std::vector<LayerSpec>* expected) {
  const std::string bytes = detail::read_file(path);
  model_file::Reader rd(bytes, path.string());
  rd.expect_header(model_file::Kind::network);
  Shape in;
  in.frames = int(rd.u32());
  in.height = int(rd.u32());
  in.width = int(rd.u32());
  in.depth = int(rd.u32());
  const std::uint32_t count = rd.u32();
  if (count > 4096) throw FormatError(path.string() + ": implausible layer count");
  if (expected != nullptr && count != expected->size())
    throw FormatError(path.string() + ": file has " + std::to_string(count) + " layer descriptors, expected " +
                      std::to_string(expected->size()));
  std::vector<LayerSpec> layers;
  std::vector<std::array<std::uint32_t, 3>> dims;
  for (std::uint32_t k = 0; k < count; ++k) {
    LayerSpec l;
    const std::uint8_t kind = rd.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::softmax)) throw FormatError(path.string() + ": bad layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.name = rd.str(rd.u32());
    l.kernel = {int(rd.u32()), int(rd.u32()), int(rd.u32())};
    l.stride = {int(rd.u32()), int(rd.u32()), int(rd.u32())};
    l.out_channels = int(rd.u32());
    dims.push_back({rd.u32(), rd.u32(), rd.u32()});
    if (expected != nullptr && !(l == (*expected)[k]))
      throw FormatError(path.string() + ": layer " + std::to_string(k) + " ('" + l.name +
                        "') does not match the expected layer list");
    layers.push_back(std::move(l));
  }
  std::vector<LayerParams<float>> params(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto [rows, cols, nb] = dims[k];
    if (std::uint64_t(rows) * cols > rd.remaining() / 4) throw FormatError(path.string() + ": truncated payload");
    params[k].weights.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) params[k].weights(r, c) = rd.f32();
    params[k].bias.resize(nb);
    for (std::uint32_t r = 0; r < nb; ++r) params[k].bias[r] = rd.f32();
  }
  rd.expect_end();
  try {
    return Network<float>(in, std::move(layers), std::move(params));
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace stcooc
