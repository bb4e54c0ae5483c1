#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace orbitforge {

/// 8-bit grey image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // r, g, b interleaved
};

/// Binary PGM (P5, maxval 255). Throws ParseError on malformed input and
/// Error on I/O failure.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace orbitforge
