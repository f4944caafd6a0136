#include "stcooc/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace stcooc {

namespace detail {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

void write_fmap(const FeatureMap& map, const std::filesystem::path& path) {
  if (map.frames() != 1) throw ShapeError("fmap holds single-frame maps, got " + map.shape_string());
  std::string bytes = "FMAP";
  bytes.reserve(20 + std::size_t(map.size()) * 4);
  detail::put_u32(bytes, kFmapVersion);
  detail::put_u32(bytes, std::uint32_t(map.height()));
  detail::put_u32(bytes, std::uint32_t(map.width()));
  detail::put_u32(bytes, std::uint32_t(map.depth()));
  for (Eigen::Index k = 0; k < map.size(); ++k) detail::put_f32(bytes, map.values()[k]);
  detail::write_file(path, bytes);
}

FeatureMap read_fmap(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 20) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(p, "FMAP", 4) != 0) throw FormatError(path.string() + ": bad magic");
  if (detail::get_u32(p + 4) != kFmapVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(detail::get_u32(p + 4)));
  const std::uint64_t h = detail::get_u32(p + 8);
  const std::uint64_t w = detail::get_u32(p + 12);
  const std::uint64_t d = detail::get_u32(p + 16);
  if (h == 0 || w == 0 || d == 0) throw FormatError(path.string() + ": zero dimension");
  constexpr std::uint64_t kMaxDim = std::numeric_limits<int>::max();
  if (h > kMaxDim || w > kMaxDim || d > kMaxDim) throw FormatError(path.string() + ": dimension overflow");
  // h*w*d*4 must fit; each factor is < 2^31 so check stepwise.
  const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() - 20) / 4;
  if (h > limit / w || h * w > limit / d) throw FormatError(path.string() + ": dimension overflow");
  const std::uint64_t count = h * w * d;
  if (bytes.size() != 20 + count * 4)
    throw FormatError(path.string() + ": payload has " + std::to_string((bytes.size() - 20) / 4) +
                      " floats, header declares " + std::to_string(count));
  Eigen::VectorXf data(static_cast<Eigen::Index>(count));
  for (std::uint64_t k = 0; k < count; ++k) data[Eigen::Index(k)] = detail::get_f32(p + 20 + 4 * k);
  return FeatureMap(1, int(h), int(w), int(d), std::move(data));
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) tok += bytes[pos++];
  return tok;
}

int parse_header_int(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || tok.size() > 9) throw FormatError(path.string() + ": bad header field '" + tok + "'");
  for (char ch : tok)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw FormatError(path.string() + ": bad header field '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace

FeatureMap read_image(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  int depth = 0;
  if (magic == "P5") depth = 1;
  else if (magic == "P6") depth = 3;
  else throw FormatError(path.string() + ": unsupported image format '" + magic + "'");
  const int width = parse_header_int(next_token(bytes, pos), path);
  const int height = parse_header_int(next_token(bytes, pos), path);
  const int maxval = parse_header_int(next_token(bytes, pos), path);
  if (maxval != 255) throw FormatError(path.string() + ": maxval must be 255, got " + std::to_string(maxval));
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": empty image");
  ++pos;  // single whitespace byte before the raster
  const std::size_t count = std::size_t(width) * height * depth;
  if (bytes.size() < pos + count) throw FormatError(path.string() + ": truncated raster");
  FeatureMap map(height, width, depth);
  for (std::size_t k = 0; k < count; ++k)
    map.values()[Eigen::Index(k)] = float(static_cast<unsigned char>(bytes[pos + k])) / 255.0f;
  return map;
}

void write_image(const FeatureMap& map, const std::filesystem::path& path) {
  if (map.frames() != 1 || (map.depth() != 1 && map.depth() != 3))
    throw ShapeError("images must be single-frame with depth 1 or 3, got " + map.shape_string());
  std::string bytes = (map.depth() == 1 ? "P5\n" : "P6\n") + std::to_string(map.width()) + " " +
                      std::to_string(map.height()) + "\n255\n";
  bytes.reserve(bytes.size() + std::size_t(map.size()));
  for (Eigen::Index k = 0; k < map.size(); ++k) {
    const float v = std::clamp(map.values()[k], 0.0f, 1.0f);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  }
  detail::write_file(path, bytes);
}

}  // namespace stcooc
