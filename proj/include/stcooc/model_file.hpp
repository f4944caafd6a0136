#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "stcooc/errors.hpp"
#include "stcooc/io.hpp"

/// "STWN" container shared by network weights and SVM models:
/// magic "STWN", u32 version, u8 model kind, then a kind-specific body.
namespace stcooc::model_file {

inline constexpr std::uint32_t kVersion = 1;

enum class Kind : std::uint8_t { network = 0, svm = 1 };

inline std::string header(Kind kind) {
  std::string bytes = "STWN";
  detail::put_u32(bytes, kVersion);
  bytes.push_back(static_cast<char>(kind));
  return bytes;
}

/// Bounds-checked little-endian cursor; every overrun is a FormatError.
class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void expect_header(Kind kind) {
    if (bytes_.size() < 9 || bytes_.compare(0, 4, "STWN") != 0) fail("bad magic");
    pos_ = 4;
    const std::uint32_t version = u32();
    if (version != kVersion) fail("unsupported version " + std::to_string(version));
    const std::uint8_t k = u8();
    if (k != static_cast<std::uint8_t>(kind)) fail("model kind " + std::to_string(k) + " is not the expected kind");
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    const auto v = detail::get_u32(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_));
    pos_ += 4;
    return v;
  }
  float f32() {
    need(4);
    const float v = detail::get_f32(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_));
    pos_ += 4;
    return v;
  }
  double f64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return std::bit_cast<double>(lo | (hi << 32));
  }
  std::string str(std::uint32_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size()) fail("trailing bytes after payload");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(source_ + ": " + what); }

  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  detail::put_u32(out, std::uint32_t(bits & 0xFFFFFFFFu));
  detail::put_u32(out, std::uint32_t(bits >> 32));
}

}  // namespace stcooc::model_file
