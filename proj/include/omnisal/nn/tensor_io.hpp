#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "omnisal/nn/tensor.hpp"

namespace omnisal::nn {

// "TEN1", u32 rank, rank x u32 dims, then little-endian f32 values.
// Values are stored as f32, so a double tensor round-trips through float.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Throws CorruptFile on a bad header or truncated payload.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace omnisal::nn
