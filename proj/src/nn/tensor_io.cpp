#include "omnisal/nn/tensor_io.hpp"

#include <cstring>

#include "omnisal/error.hpp"
#include "omnisal/raster_io.hpp"

namespace omnisal::nn {

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out{'T', 'E', 'N', '1'};
  le::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) le::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) le::put_f32(out, static_cast<float>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "TEN1", 4) != 0)
    throw Error(Errc::CorruptFile, "missing TEN1 header");
  const std::uint32_t rank = le::get_u32(bytes.data() + 4);
  if (rank < 1 || rank > 4) throw Error(Errc::CorruptFile, "tensor rank out of range");
  if (bytes.size() < 8 + 4 * std::size_t{rank}) throw Error(Errc::CorruptFile, "truncated tensor header");
  std::vector<std::size_t> shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(le::get_u32(bytes.data() + 8 + 4 * i));
    count *= shape.back();
  }
  const std::size_t offset = 8 + 4 * std::size_t{rank};
  if (bytes.size() != offset + 4 * count) throw Error(Errc::CorruptFile, "tensor payload size mismatch");
  Tensor t(shape);
  for (std::uint64_t i = 0; i < count; ++i) t[i] = le::get_f32(bytes.data() + offset + 4 * i);
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

}  // namespace omnisal::nn
