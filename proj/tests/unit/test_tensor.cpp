#include <doctest.h>

#include <fstream>
#include <random>

#include "oracles.hpp"
#include "stcooc/io.hpp"
#include "stcooc/tensor.hpp"

using namespace stcooc;

namespace {

FeatureVector vec(std::initializer_list<float> v) {
  Eigen::VectorXf d(Eigen::Index(v.size()));
  Eigen::Index k = 0;
  for (float x : v) d[k++] = x;
  return FeatureVector(d, Provenance::concat);
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_SUITE("tensor_core") {

TEST_CASE("l2_normalize examples") {
  const FeatureVector n = l2_normalize(vec({3, 4}));
  CHECK(n.data[0] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(n.data[1] == doctest::Approx(0.8).epsilon(1e-6));

  const FeatureVector z = l2_normalize(vec({0, 0, 0}));
  CHECK(z.data == Eigen::VectorXf::Zero(3));
}

TEST_CASE("l2_normalize matches a per-element division oracle") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> g;
  Eigen::VectorXf v(100);
  for (auto& x : v) x = float(g(gen));
  double sq = 0.0;
  for (float x : v) sq += double(x) * double(x);
  const double norm = std::sqrt(sq);
  const FeatureVector n = l2_normalize(FeatureVector(v, Provenance::bilinear));
  for (Eigen::Index k = 0; k < v.size(); ++k) CHECK(std::abs(double(n.data[k]) - double(v[k]) / norm) < 1e-6);
  CHECK(std::abs(double(n.data.cast<double>().norm()) - 1.0) < 1e-5);
  CHECK(n.provenance == Provenance::bilinear);
}

TEST_CASE("l2_normalize rejects non-finite input") {
  Eigen::VectorXf v(2);
  v << 1.0f, std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(l2_normalized(v), InvalidValue);
  v << 1.0f, std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(l2_normalized(v), InvalidValue);
}

TEST_CASE("l2_normalize idempotence and scale invariance") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), alpha(0.01, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXf v(1 + Eigen::Index(gen() % 40));
    for (auto& x : v) x = float(u(gen));
    const Eigen::VectorXf n = l2_normalized(v);
    CHECK((l2_normalized(n) - n).cwiseAbs().maxCoeff() <= 1e-6f);
    const Eigen::VectorXf scaled = l2_normalized((v * float(alpha(gen))).eval());
    CHECK((scaled - n).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("fmap round trip is bit identical") {
  oracle::TempDir dir("fmap");
  FeatureMap m(2, 3, 4);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.values()[k] = float(k) * 0.37f - 3.0f;
  write_fmap(m, dir.path() / "a.fmap");
  const FeatureMap back = read_fmap(dir.path() / "a.fmap");
  CHECK(back.height() == 2);
  CHECK(back.width() == 3);
  CHECK(back.depth() == 4);
  CHECK(back == m);

  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + int(gen() % 7), w = 1 + int(gen() % 7), d = 1 + int(gen() % 5);
    FeatureMap r = oracle::random_tensor<float>(1, h, w, d, gen, -1e6, 1e6);
    r.values()[0] = -0.0f;
    r.values()[r.size() - 1] = std::numeric_limits<float>::denorm_min();
    write_fmap(r, dir.path() / "r.fmap");
    const FeatureMap rb = read_fmap(dir.path() / "r.fmap");
    REQUIRE(rb.same_shape(r));
    CHECK(std::memcmp(rb.data(), r.data(), std::size_t(r.size()) * sizeof(float)) == 0);
  }
}

TEST_CASE("fmap file layout") {
  oracle::TempDir dir("fmap_layout");
  FeatureMap m(1, 2, 1);
  m(0, 0, 0) = 1.0f;
  m(0, 1, 0) = -2.0f;
  write_fmap(m, dir.path() / "m.fmap");
  std::ifstream in(dir.path() / "m.fmap", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string expected = std::string("FMAP") + std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) + std::string("\x02\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) + std::string("\x00\x00\x80\x3f", 4) +
                               std::string("\x00\x00\x00\xc0", 4);
  CHECK(bytes == expected);
}

TEST_CASE("fmap corrupt files") {
  oracle::TempDir dir("fmap_bad");
  auto header = [](const char* magic, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
    std::string s(magic, 4);
    for (std::uint32_t v : {1u, h, w, d})
      for (int b = 0; b < 4; ++b) s.push_back(char((v >> (8 * b)) & 0xff));
    return s;
  };
  write_bytes(dir.path() / "magic.fmap", header("XXXX", 1, 1, 1) + std::string(4, '\0'));
  CHECK_THROWS_AS(read_fmap(dir.path() / "magic.fmap"), FormatError);

  write_bytes(dir.path() / "short.fmap", header("FMAP", 2, 2, 2) + std::string(7 * 4, '\0'));
  CHECK_THROWS_AS(read_fmap(dir.path() / "short.fmap"), FormatError);

  write_bytes(dir.path() / "huge.fmap", header("FMAP", 0xffffffffu, 0xffffffffu, 0xffffffffu));
  CHECK_THROWS_AS(read_fmap(dir.path() / "huge.fmap"), FormatError);

  write_bytes(dir.path() / "stub.fmap", "FMA");
  CHECK_THROWS_AS(read_fmap(dir.path() / "stub.fmap"), FormatError);
}

TEST_CASE("read_image scaling and channel order") {
  oracle::TempDir dir("img");
  write_bytes(dir.path() / "a.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\x40", 4));
  const FeatureMap g = read_image(dir.path() / "a.pgm");
  REQUIRE(g.depth() == 1);
  CHECK(g(0, 0, 0) == 0.0f);
  CHECK(g(0, 1, 0) == 1.0f);
  CHECK(g(1, 0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
  CHECK(g(1, 1, 0) == doctest::Approx(64.0 / 255.0).epsilon(1e-7));

  write_bytes(dir.path() / "b.ppm", std::string("P6\n# comment\n2 1\n255\n") + std::string("\xff\x00\x00\x00\x00\xff", 6));
  const FeatureMap c = read_image(dir.path() / "b.ppm");
  REQUIRE(c.depth() == 3);
  CHECK(c(0, 0, 0) == 1.0f);
  CHECK(c(0, 0, 1) == 0.0f);
  CHECK(c(0, 1, 2) == 1.0f);

  write_bytes(dir.path() / "c.pgm", "P2\n2 1\n255\n0 255\n");
  CHECK_THROWS_AS(read_image(dir.path() / "c.pgm"), FormatError);
  write_bytes(dir.path() / "d.pgm", std::string("P5\n1 1\n65535\n") + std::string(2, '\0'));
  CHECK_THROWS_AS(read_image(dir.path() / "d.pgm"), FormatError);
}

TEST_CASE("image write/read round trip at 8 bits") {
  oracle::TempDir dir("img_rt");
  std::mt19937_64 gen(9);
  const FeatureMap m = oracle::random_tensor<float>(1, 5, 4, 3, gen, 0.0, 1.0);
  write_image(m, dir.path() / "m.ppm");
  const FeatureMap back = read_image(dir.path() / "m.ppm");
  REQUIRE(back.same_shape(m));
  CHECK((back.values() - m.values()).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(FeatureMap(0, 2, 2), ShapeError);
  CHECK_THROWS_AS(FeatureMap(1, 2, 2, 2, Eigen::VectorXf::Zero(7)), ShapeError);
  FeatureMap a(2, 3, 2);
  a(1, 2, 1) = 5.0f;
  CHECK(a.values()[(1 * 3 + 2) * 2 + 1] == 5.0f);
}

}  // TEST_SUITE
