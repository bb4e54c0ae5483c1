#include "orbitforge/optical/image.hpp"

#include <algorithm>
#include <cmath>

#include "orbitforge/common/error.hpp"

namespace orbitforge::optical {

GrayImage rotate_quarter(const GrayImage& img, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  GrayImage cur = img;
  for (int i = 0; i < k; ++i) {
    GrayImage next;
    next.width = cur.height;
    next.height = cur.width;
    next.pixels.resize(cur.pixels.size());
    // new(x', y') = old(W-1-y', x')
    for (std::size_t y = 0; y < next.height; ++y)
      for (std::size_t x = 0; x < next.width; ++x)
        next.at(x, y) = cur.at(cur.width - 1 - y, x);
    cur = std::move(next);
  }
  return cur;
}

FloatGrid gaussian_blur(const FloatGrid& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;

  const auto w = static_cast<long>(in.width), h = static_cast<long>(in.height);
  FloatGrid tmp(in.width, in.height), out(in.width, in.height);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const long xx = std::clamp(x + i, 0L, w - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               in.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(y));
      }
      tmp.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<float>(acc);
    }
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const long yy = std::clamp(y + i, 0L, h - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp.at(static_cast<std::size_t>(x), static_cast<std::size_t>(yy));
      }
      out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<float>(acc);
    }
  return out;
}

GrayImage to_gray(const FloatGrid& g) {
  GrayImage img{g.width, g.height, std::vector<std::uint8_t>(g.data.size())};
  for (std::size_t i = 0; i < g.data.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(g.data[i], 0.0f, 1.0f)));
  return img;
}

GrayImage mask_to_gray(const Mask& m) {
  GrayImage img{m.width, m.height, std::vector<std::uint8_t>(m.data.size())};
  for (std::size_t i = 0; i < m.data.size(); ++i) img.pixels[i] = m.data[i] ? 255 : 0;
  return img;
}

PixelSpan pixel_span(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  const double max = static_cast<double>(n);
  // Pixel i is covered iff lo <= i + 0.5 < hi.
  double b = std::ceil(lo - 0.5), e = std::ceil(hi - 0.5);
  b = std::clamp(b, 0.0, max);
  e = std::clamp(e, 0.0, max);
  if (e <= b) {
    const double mid = std::clamp(std::floor(0.5 * (lo + hi)), 0.0, max - 1.0);
    b = mid;
    e = mid + 1.0;
  }
  return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
}

}  // namespace orbitforge::optical
