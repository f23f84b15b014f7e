#include "armlab/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include "armlab/error.hpp"

namespace armlab {

namespace {

struct HeaderReader {
  std::span<const std::uint8_t> b;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
    if (pos == start) throw IoError(std::string("PGM: missing ") + what);
    return v;
  }
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw IoError("PGM: only binary P5 images are supported");
  }
  HeaderReader r{bytes, 2};
  GrayImage img;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (maxval == 0 || maxval > 255) {
    throw IoError("PGM: maxval " + std::to_string(maxval) + " unsupported (need 1..255)");
  }
  if (r.pos >= bytes.size() || !std::isspace(bytes[r.pos])) throw IoError("PGM: bad header end");
  ++r.pos;
  const std::size_t n = img.width * img.height;
  if (bytes.size() - r.pos < n) throw IoError("PGM: truncated pixel data");
  img.pixels.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + n);
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(std::lround(std::min<double>(p, maxval) * 255.0 / maxval));
    }
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_pgm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) {
    throw IoError("PGM: pixel buffer does not match " + std::to_string(img.width) + "x" +
                  std::to_string(img.height));
  }
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  const auto bytes = encode_pgm(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

GrayImage heatmap(std::span<const double> values, std::size_t width, std::size_t height) {
  if (values.size() != width * height) throw IoError("heatmap: size mismatch");
  GrayImage img{width, height, std::vector<std::uint8_t>(values.size(), 0)};
  const double mx = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  if (!(mx > 0.0)) return img;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i] / mx, 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_grid_csv(const std::filesystem::path& path, std::span<const double> values,
                    std::size_t width, std::size_t height) {
  if (values.size() != width * height) throw IoError("grid csv: size mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (x) os << ',';
      os << format_number(values[y * width + x]);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace armlab
