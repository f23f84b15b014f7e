#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "armlab/tensor.hpp"

namespace armlab {

// ".ten" layout: "ARMT", u8 version (1), u8 rank, rank x u32 LE extents,
// then float32 LE payload in row-major order.
inline constexpr std::uint8_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace armlab
