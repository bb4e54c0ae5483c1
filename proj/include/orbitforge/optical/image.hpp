#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "orbitforge/common/pnm.hpp"

namespace orbitforge::optical {

/// Working resolution of the segmentation stage.
inline constexpr std::size_t kMapWidth = 640;
inline constexpr std::size_t kMapHeight = 480;

template <class T>
struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}

  T& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  const T& at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

using FloatGrid = Grid<float>;
using Mask = Grid<std::uint8_t>;  // 0 or 1

/// Counter-clockwise rotation by `quarter_turns` (as seen on screen, rows down).
GrayImage rotate_quarter(const GrayImage& img, int quarter_turns);

/// Separable Gaussian, kernel radius ceil(3 sigma), edges clamped.
FloatGrid gaussian_blur(const FloatGrid& in, double sigma);

/// Scales [0, 1] to 0..255.
GrayImage to_gray(const FloatGrid& g);
GrayImage mask_to_gray(const Mask& m);

/// Half-open pixel range whose centres fall inside [lo, hi); widened to one
/// pixel around the midpoint when no centre does. Clamped to [0, n).
struct PixelSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};
PixelSpan pixel_span(double lo, double hi, std::size_t n);

}  // namespace orbitforge::optical
