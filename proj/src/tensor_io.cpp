#include "armlab/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace armlab {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out{'A', 'R', 'M', 'T', kTensorFormatVersion,
                                static_cast<std::uint8_t>(t.rank())};
  out.reserve(6 + 4 * t.rank() + 4 * t.size());
  for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "ARMT", 4) != 0) {
    throw IoError("not a .ten stream (bad magic)");
  }
  if (bytes[4] != kTensorFormatVersion) {
    throw IoError(".ten version " + std::to_string(bytes[4]) + " unsupported");
  }
  const std::size_t rank = bytes[5];
  if (rank > kMaxRank) throw IoError(".ten rank " + std::to_string(rank) + " exceeds 4");
  if (bytes.size() < 6 + 4 * rank) throw IoError(".ten stream truncated in header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes, 6 + 4 * i);
  const std::size_t count = shape_product(shape);
  const std::size_t payload = 6 + 4 * rank;
  if (bytes.size() != payload + 4 * count) {
    throw IoError(".ten payload size " + std::to_string(bytes.size() - payload) +
                  " does not match shape " + shape_to_string(shape));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, payload + 4 * i));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace armlab
