#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stcooc/tensor.hpp"

namespace stcooc {

/// .fmap layout: "FMAP", u32 version (1), u32 height, u32 width, u32 depth,
/// then height*width*depth float32 values. Everything little-endian.
inline constexpr std::uint32_t kFmapVersion = 1;

void write_fmap(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap read_fmap(const std::filesystem::path& path);

/// Binary 8-bit PGM (P5) or PPM (P6). Values scaled to [0,1].
FeatureMap read_image(const std::filesystem::path& path);

/// Writes depth-1 maps as P5 and depth-3 maps as P6, rounding clamped
/// [0,1] values to 8 bits.
void write_image(const FeatureMap& map, const std::filesystem::path& path);

namespace detail {

void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(const unsigned char* p);
float get_f32(const unsigned char* p);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace detail

}  // namespace stcooc
