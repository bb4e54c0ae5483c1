#include "orbitforge/common/pnm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "orbitforge/common/error.hpp"

namespace orbitforge {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string token(std::istream& in) {
  std::string t;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    t.push_back(static_cast<char>(c));
    c = in.get();
  }
  return t;
}

void write_raw(const std::filesystem::path& path, const char* magic, std::size_t w,
               std::size_t h, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_raw(path, "P5", img.width, img.height, img.pixels);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  write_raw(path, "P6", img.width, img.height, img.pixels);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  if (token(in) != "P5") throw ParseError(path.string() + ": not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoul(token(in));
    img.height = std::stoul(token(in));
    if (std::stoul(token(in)) != 255) throw ParseError(path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw ParseError(path.string() + ": malformed PGM header");
  }
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw ParseError(path.string() + ": truncated pixel data");
  return img;
}

}  // namespace orbitforge
