#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "omnisal/raster.hpp"

namespace omnisal {

// 8-bit PNG. Samples are read into [0, 255]; gray, gray+alpha, RGB and RGBA
// inputs load as 1 or 3 channels (alpha is dropped).
Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& image);

/// Writes a single-channel map as linear 8-bit luminance, scaled so the map
/// maximum becomes 255.
void write_saliency_png(const std::filesystem::path& path, const Raster& map);

// ".sal" float raster: "SAL1", u32 width, u32 height, then width*height
// little-endian f32 values in row-major order. Single channel only.
std::vector<std::uint8_t> encode_sal(const Raster& map);
Raster decode_sal(std::span<const std::uint8_t> bytes);
void write_sal(const std::filesystem::path& path, const Raster& map);
Raster read_sal(const std::filesystem::path& path);

/// Dispatches on extension: ".sal" as float raster, anything else as PNG
/// converted to a single channel.
Raster read_saliency(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
}  // namespace le

}  // namespace omnisal
