#include "omnisal/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "omnisal/error.hpp"

namespace omnisal {

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Raster read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::IoError, "no such file " + path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error(Errc::BadImage, path.string() + ": " + image.message);

  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(Errc::BadImage, path.string() + ": " + image.message);
  }
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  std::transform(buffer.begin(), buffer.end(), out.data.begin(),
                 [](png_byte b) { return static_cast<float>(b); });
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3)
    throw Error(Errc::InvalidArgument, "PNG export supports 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(raster.data.size());
  std::transform(raster.data.begin(), raster.data.end(), buffer.begin(), [](float v) {
    return static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 255.0f)));
  });
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw Error(Errc::IoError, path.string() + ": " + image.message);
}

void write_saliency_png(const std::filesystem::path& path, const Raster& map) {
  Raster scaled = normalize_max(to_gray(map));
  for (float& v : scaled.data) v *= 255.0f;
  write_png(path, scaled);
}

std::vector<std::uint8_t> encode_sal(const Raster& map) {
  if (map.channels != 1) throw Error(Errc::InvalidArgument, ".sal holds a single channel");
  std::vector<std::uint8_t> out{'S', 'A', 'L', '1'};
  out.reserve(12 + 4 * map.data.size());
  le::put_u32(out, static_cast<std::uint32_t>(map.width));
  le::put_u32(out, static_cast<std::uint32_t>(map.height));
  for (float v : map.data) le::put_f32(out, v);
  return out;
}

Raster decode_sal(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "SAL1", 4) != 0)
    throw Error(Errc::CorruptFile, "missing SAL1 header");
  const std::uint32_t w = le::get_u32(bytes.data() + 4);
  const std::uint32_t h = le::get_u32(bytes.data() + 8);
  const std::uint64_t count = static_cast<std::uint64_t>(w) * h;
  if (bytes.size() != 12 + 4 * count) throw Error(Errc::CorruptFile, "SAL1 payload size mismatch");
  Raster out(static_cast<int>(w), static_cast<int>(h), 1);
  for (std::uint64_t i = 0; i < count; ++i) out.data[i] = le::get_f32(bytes.data() + 12 + 4 * i);
  return out;
}

void write_sal(const std::filesystem::path& path, const Raster& map) {
  write_file_bytes(path, encode_sal(map));
}

Raster read_sal(const std::filesystem::path& path) { return decode_sal(read_file_bytes(path)); }

Raster read_saliency(const std::filesystem::path& path) {
  if (path.extension() == ".sal") return read_sal(path);
  return to_gray(read_png(path));
}

}  // namespace omnisal
