#include <doctest.h>

#include <fstream>
#include <random>

#include "oracles.hpp"
#include "stcooc/convnet.hpp"

using namespace stcooc;

namespace {

double max_abs_diff(const Tensor<float>& a, const Tensor<double>& b) {
  REQUIRE(a.frames() == b.frames());
  REQUIRE(a.height() == b.height());
  REQUIRE(a.width() == b.width());
  REQUIRE(a.depth() == b.depth());
  return (a.values().cast<double>() - b.values()).cwiseAbs().maxCoeff();
}

// Direct evaluation of every tap of a float network, layer by layer.
std::vector<Tensor<double>> oracle_taps(const Network<float>& net, const Tensor<float>& input) {
  std::vector<Tensor<double>> taps;
  Tensor<double> x = input.cast<double>();
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const LayerSpec& l = net.layers()[k];
    const auto p = net.params()[k].cast<double>();
    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d:
        x = oracle::conv(x, p.weights, p.bias, l.kernel.t, l.kernel.h, l.kernel.w, l.stride.t, l.stride.h, l.stride.w);
        break;
      case LayerKind::maxpool2d:
      case LayerKind::maxpool3d:
        x = oracle::maxpool(x, l.kernel.t, l.kernel.h, l.kernel.w, l.stride.t, l.stride.h, l.stride.w);
        break;
      case LayerKind::relu:
        x.values() = x.values().cwiseMax(0.0);
        break;
      case LayerKind::fully_connected: {
        Eigen::VectorXd y = p.weights * x.values() + p.bias;
        x = Tensor<double>(1, 1, 1, int(y.size()), y);
        break;
      }
      case LayerKind::softmax: {
        Eigen::VectorXd e = (x.values().array() - x.values().maxCoeff()).exp();
        x.values() = e / e.sum();
        break;
      }
    }
    taps.push_back(x);
  }
  return taps;
}

}  // namespace

TEST_SUITE("convnet") {

TEST_CASE("identity kernel reproduces the input") {
  const std::vector<LayerSpec> layers = {LayerSpec::conv2d("c1", 1, 3)};
  std::vector<LayerParams<float>> params(1);
  params[0].weights = MatrixX<float>::Zero(1, 9);
  params[0].weights(0, 4) = 1.0f;
  params[0].bias = VectorX<float>::Zero(1);
  const Network<float> net({1, 5, 7, 1}, layers, params);
  std::mt19937_64 gen(1);
  const FeatureMap in = oracle::random_tensor<float>(1, 5, 7, 1, gen);
  const auto taps = forward(net, in);
  CHECK((taps.at("c1").values() - in.values()).cwiseAbs().maxCoeff() <= 1e-6f);
}

TEST_CASE("every tap of a random 2D net matches nested-loop evaluation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<LayerSpec> layers = {
        LayerSpec::conv2d("c1", 4, 3),        LayerSpec::relu("r1"),
        LayerSpec::maxpool2d("p1", 2, 2),     LayerSpec::conv2d("c5", 5, 3, 2),
        LayerSpec::relu("r5"),                LayerSpec::fully_connected("fc6", 7),
        LayerSpec::fully_connected("fc7", 3), LayerSpec::softmax("o")};
    const Network<float> net({1, 10, 9, 3}, layers, seed);
    std::mt19937_64 gen(seed);
    const FeatureMap in = oracle::random_tensor<float>(1, 10, 9, 3, gen);
    const auto taps = forward(net, in);
    const auto expected = oracle_taps(net, in);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      CAPTURE(layers[k].name);
      CHECK(max_abs_diff(taps.at(layers[k].name), expected[k]) < 1e-4);
    }
    const Eigen::VectorXf& o = taps.at("o").values();
    CHECK(std::abs(o.sum() - 1.0f) <= 1e-5f);
    CHECK((o.array() > 0.0f).all());
    CHECK((o.array() < 1.0f).all());
  }
}

TEST_CASE("forward rejects a mismatched input") {
  const Network<float> net({1, 6, 6, 3}, default_stream_layers(4), 1);
  CHECK_THROWS_AS(forward(net, FeatureMap(6, 6, 1)), ShapeError);
  CHECK_THROWS_AS(forward(net, FeatureMap(6, 5, 3)), ShapeError);
}

TEST_CASE("summation kernel over time") {
  const std::vector<LayerSpec> layers = {LayerSpec::conv3d("c1", 1, 2, 1)};
  std::vector<LayerParams<float>> params(1);
  params[0].weights = MatrixX<float>::Ones(1, 2 * 3);
  params[0].bias = VectorX<float>::Zero(1);
  const Network<float> net({4, 3, 3, 3}, layers, params);
  std::vector<FeatureMap> window;
  for (int t = 0; t < 4; ++t) {
    FeatureMap f(3, 3, 3);
    f.values().setConstant(0.75f);
    window.push_back(f);
  }
  const auto taps = forward3d<float>(net, window);
  const FeatureMap& out = taps.at("c1");
  CHECK(out.frames() == 3);
  CHECK((out.values().array() - 2.0f * 0.75f * 3.0f).abs().maxCoeff() <= 1e-6f);

  window.pop_back();
  CHECK_THROWS_AS(forward3d<float>(net, window), ShapeError);
}

TEST_CASE("temporal extent is L - k + 1") {
  const Network<float> net({15, 4, 4, 1}, {LayerSpec::conv3d("c1", 2, 3, 3)}, 1);
  CHECK(net.output_shapes()[0].frames == 13);
  for (int L = 3; L <= 20; ++L)
    for (int k = 1; k <= std::min(L, 5); ++k)
      CHECK(layer_output_shape(LayerSpec::conv3d("c", 1, k, 3), {L, 4, 4, 1}).frames == L - k + 1);
  CHECK_THROWS_AS(Network<float>({1, 4, 4, 1}, {LayerSpec::conv3d("c1", 2, 3, 3)}, 1), ShapeError);
}

TEST_CASE("random 3D net matches nested-loop evaluation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<LayerSpec> layers = {LayerSpec::conv3d("c1", 3, 3, 3), LayerSpec::relu("r1"),
                                           LayerSpec::maxpool3d("p1", 2, 2, 1, 2), LayerSpec::conv3d("c5", 2, 2, 3, 2),
                                           LayerSpec::fully_connected("fc6", 4), LayerSpec::softmax("o")};
    const Network<float> net({6, 8, 8, 2}, layers, seed);
    std::mt19937_64 gen(seed + 100);
    std::vector<FeatureMap> window;
    for (int t = 0; t < 6; ++t) window.push_back(oracle::random_tensor<float>(1, 8, 8, 2, gen));
    const auto taps = forward3d<float>(net, window);
    const auto expected = oracle_taps(net, stack_frames(window));
    for (std::size_t k = 0; k < layers.size(); ++k) {
      CAPTURE(layers[k].name);
      CHECK(max_abs_diff(taps.at(layers[k].name), expected[k]) < 1e-4);
    }
  }
}

TEST_CASE("gradients match central differences for every layer kind") {
  for (const auto& c : oracle::gradient_cases())
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const oracle::GradCheck r = oracle::run_gradient_case(c, seed);
      CAPTURE(c.kind);
      CAPTURE(seed);
      CAPTURE(r.worst_layer);
      CHECK(r.worst_relative < 1e-3);
      CHECK(r.min_coverage >= 1.0);
    }
}

TEST_CASE("loss agrees with the reference evaluation") {
  std::mt19937_64 gen(3);
  const auto c = oracle::gradient_cases().back();
  const Network<double> net(c.input, c.layers, 3);
  const Tensor<double> in = oracle::random_tensor<double>(1, 8, 8, 3, gen);
  CHECK(std::abs(loss(net, in, 2) - oracle::reference_loss(net, in, 2)) < 1e-12);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Network<float> net({1, 8, 8, 3}, default_stream_layers(3), 4);
  const Network<float> before = net;
  std::mt19937_64 gen(4);
  const auto r = backward(net, oracle::random_tensor<float>(1, 8, 8, 3, gen), 1);
  SgdState<float> state;
  sgd_step(net, r.gradients, SgdParams{0.0, 0.9, 5e-4}, state);
  sgd_step(net, r.gradients, SgdParams{0.0, 0.9, 5e-4}, state);
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    CHECK(net.params()[k].weights == before.params()[k].weights);
    CHECK(net.params()[k].bias == before.params()[k].bias);
  }
}

TEST_CASE("momentum update rule") {
  const std::vector<LayerSpec> layers = {LayerSpec::fully_connected("fc", 2), LayerSpec::softmax("o")};
  std::vector<LayerParams<double>> params(2);
  params[0].weights = MatrixX<double>::Constant(2, 1, 1.0);
  params[0].bias = VectorX<double>::Constant(2, 0.5);
  Network<double> net({1, 1, 1, 1}, layers, params);
  Gradients<double> g(2);
  g[0].weights = MatrixX<double>::Constant(2, 1, 0.2);
  g[0].bias = VectorX<double>::Constant(2, 0.1);
  SgdState<double> state;
  const SgdParams p{0.1, 0.5, 0.01};
  sgd_step(net, g, p, state);
  // v = 0.2 + 0.01*1 = 0.21; w = 1 - 0.021
  CHECK(net.params()[0].weights(0, 0) == doctest::Approx(0.979).epsilon(1e-12));
  CHECK(net.params()[0].bias[0] == doctest::Approx(0.49).epsilon(1e-12));
  sgd_step(net, g, p, state);
  // v = 0.5*0.21 + 0.2 + 0.01*0.979 = 0.31479
  CHECK(net.params()[0].weights(0, 0) == doctest::Approx(0.979 - 0.031479).epsilon(1e-12));
  CHECK(net.params()[0].bias[0] == doctest::Approx(0.49 - 0.1 * 0.15).epsilon(1e-12));
}

TEST_CASE("separable two-point task converges") {
  Network<float> net({1, 1, 1, 2}, {LayerSpec::fully_connected("fc", 2), LayerSpec::softmax("o")}, 9);
  std::vector<FeatureMap> xs(2, FeatureMap(1, 1, 2));
  xs[0].values() << 1.0f, 0.0f;
  xs[1].values() << 0.0f, 1.0f;
  const std::vector<int> ys = {0, 1};
  SgdState<float> state;
  const SgdParams p{0.1, 0.0, 0.0};
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    auto a = backward(net, xs[0], ys[0]);
    auto b = backward(net, xs[1], ys[1]);
    const double total = 0.5 * (double(a.loss) + double(b.loss));
    if (step == 0) first = total;
    last = total;
    for (std::size_t k = 0; k < a.gradients.size(); ++k) {
      if (a.gradients[k].weights.size() == 0) continue;
      a.gradients[k].weights = 0.5f * (a.gradients[k].weights + b.gradients[k].weights);
      a.gradients[k].bias = 0.5f * (a.gradients[k].bias + b.gradients[k].bias);
    }
    sgd_step(net, a.gradients, p, state);
  }
  const double final_loss = 0.5 * (double(loss(net, xs[0], 0)) + double(loss(net, xs[1], 1)));
  CHECK(last < first);
  CHECK(final_loss < 0.1);
}

TEST_CASE("mini-batch training is reproducible") {
  std::mt19937_64 gen(21);
  std::vector<FeatureMap> xs;
  std::vector<int> ys;
  for (int k = 0; k < 12; ++k) {
    xs.push_back(oracle::random_tensor<float>(1, 8, 8, 3, gen));
    ys.push_back(k % 3);
  }
  TrainParams tp;
  tp.epochs = 3;
  tp.batch_size = 4;
  tp.seed = 5;
  Network<float> a({1, 8, 8, 3}, default_stream_layers(3), 2), b = a;
  const TrainReport ra = train<float>(a, xs, ys, tp);
  const TrainReport rb = train<float>(b, xs, ys, tp);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  for (std::size_t k = 0; k < a.params().size(); ++k) CHECK(a.params()[k].weights == b.params()[k].weights);
}

TEST_CASE("non-finite activations raise DivergenceError naming the layer") {
  Network<float> net({1, 1, 1, 2}, {LayerSpec::fully_connected("fc_big", 2), LayerSpec::softmax("o")}, 1);
  net.params()[0].weights.setConstant(3e38f);
  FeatureMap x(1, 1, 2);
  x.values() << 10.0f, 10.0f;
  try {
    backward(net, x, 0);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("fc_big") != std::string::npos);
  }
}

TEST_CASE("weights round trip through STWN") {
  oracle::TempDir dir("stwn");
  const Network<float> net({1, 12, 12, 3}, default_stream_layers(4), 17);
  save_weights(net, dir.path() / "n.stwn");
  const auto layers = default_stream_layers(4);
  const Network<float> back = load_weights(dir.path() / "n.stwn", &layers);
  std::mt19937_64 gen(2);
  const FeatureMap in = oracle::random_tensor<float>(1, 12, 12, 3, gen);
  const auto a = forward(net, in), b = forward(back, in);
  for (const auto& [name, t] : a) CHECK(b.at(name) == t);

  std::ifstream f(dir.path() / "n.stwn", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(bytes.substr(0, 4) == "STWN");

  std::ofstream(dir.path() / "cut.stwn", std::ios::binary).write(bytes.data(), std::streamsize(bytes.size() - 5));
  CHECK_THROWS_AS(load_weights(dir.path() / "cut.stwn"), FormatError);

  const auto fewer = default_stream_layers(4);
  const std::vector<LayerSpec> shorter(fewer.begin(), fewer.end() - 1);
  CHECK_THROWS_AS(load_weights(dir.path() / "n.stwn", &shorter), FormatError);

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir.path() / "bad.stwn", std::ios::binary).write(bad.data(), std::streamsize(bad.size()));
  CHECK_THROWS_AS(load_weights(dir.path() / "bad.stwn"), FormatError);
}

TEST_CASE("relu, pooling and softmax properties") {
  std::mt19937_64 gen(31);
  const std::vector<LayerSpec> layers = {LayerSpec::conv2d("c1", 4, 3), LayerSpec::relu("r1"),
                                         LayerSpec::maxpool2d("p1", 2, 2)};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Network<float> net({1, 8, 8, 2}, layers, seed);
    const FeatureMap in = oracle::random_tensor<float>(1, 8, 8, 2, gen);
    const auto taps = forward(net, in);
    const FeatureMap& r = taps.at("r1");
    CHECK(r.values().minCoeff() >= 0.0f);
    const FeatureMap& p = taps.at("p1");
    for (int i = 0; i < p.height(); ++i)
      for (int j = 0; j < p.width(); ++j)
        for (int c = 0; c < p.depth(); ++c) {
          const double mean = (double(r(2 * i, 2 * j, c)) + r(2 * i + 1, 2 * j, c) + r(2 * i, 2 * j + 1, c) +
                               r(2 * i + 1, 2 * j + 1, c)) / 4.0;
          CHECK(double(p(i, j, c)) >= mean - 1e-7);
        }
  }
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    VectorX<double> z(6);
    for (auto& x : z) x = u(gen);
    const double shift = u(gen) * 10.0;
    const VectorX<double> shifted = (z.array() + shift).matrix();
    CHECK((detail::softmax(z) - detail::softmax(shifted)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("layer specs are validated") {
  CHECK_THROWS_AS(infer_shapes({1, 4, 4, 1}, {LayerSpec::relu("a"), LayerSpec::relu("a")}), ShapeError);
  CHECK_THROWS_AS(infer_shapes({1, 4, 4, 1}, {LayerSpec::relu("")}), ShapeError);
  const auto shapes = infer_shapes({1, 32, 32, 3}, default_stream_layers(4));
  CHECK(shapes.back().size() == 4);
}

}  // TEST_SUITE
