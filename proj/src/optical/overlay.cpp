#include "orbitforge/optical/overlay.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "orbitforge/common/error.hpp"

namespace orbitforge::optical {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

std::array<std::uint8_t, 3> colour(cell::SurfaceClass c) {
  switch (c) {
    case cell::SurfaceClass::Component: return {80, 160, 255};
    case cell::SurfaceClass::Solderpad: return {255, 210, 60};
    case cell::SurfaceClass::Solderbridge: return {255, 60, 200};
    case cell::SurfaceClass::Solderball: return {255, 40, 40};
    case cell::SurfaceClass::Tombstone: return {255, 140, 0};
  }
  return {255, 255, 255};
}

void put(RgbImage& img, long x, long y, std::array<std::uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height)) return;
  std::uint8_t* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * 3];
  p[0] = c[0];
  p[1] = c[1];
  p[2] = c[2];
}

}  // namespace

void write_overlay_png(const std::filesystem::path& path, const GrayImage& base,
                       const std::vector<Detection>& detections) {
  RgbImage img{base.width, base.height, std::vector<std::uint8_t>(base.pixels.size() * 3)};
  for (std::size_t i = 0; i < base.pixels.size(); ++i)
    img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = base.pixels[i] / 2;
  for (const auto& d : detections) {
    const auto c = colour(d.surface_class);
    const Rect& b = d.contour.bbox;
    const long x0 = static_cast<long>(b.x) - 1, y0 = static_cast<long>(b.y) - 1;
    const long x1 = static_cast<long>(b.right()), y1 = static_cast<long>(b.bottom());
    for (long x = x0; x <= x1; ++x) {
      put(img, x, y0, c);
      put(img, x, y1, c);
    }
    for (long y = y0; y <= y1; ++y) {
      put(img, x0, y, c);
      put(img, x1, y, c);
    }
    for (const Point& p : d.contour.points) put(img, p.x, p.y, {255, 255, 255});
  }

  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y)
    png_write_row(png, &img.pixels[y * img.width * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ParseError("cannot read PNG " + path.string());
  image.format = PNG_FORMAT_RGB;
  RgbImage out{image.width, image.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ParseError("cannot decode PNG " + path.string());
  }
  return out;
}

}  // namespace orbitforge::optical
