#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace armlab {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5, maxval <= 255). Comments in the header are skipped.
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Linear heatmap: value * 255 / max, rounded; an all-zero (or non-positive)
/// map stays black.
GrayImage heatmap(std::span<const double> values, std::size_t width, std::size_t height);

/// Writes `values` as `height` comma-separated rows.
void write_grid_csv(const std::filesystem::path& path, std::span<const double> values,
                    std::size_t width, std::size_t height);

/// Shortest round-trip decimal text for a double.
std::string format_number(double v);

}  // namespace armlab
