#include "orbitforge/optical/identify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "orbitforge/optical/image.hpp"

namespace orbitforge::optical {

namespace {

struct Moments {
  std::int64_t n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
};

Moments moments(const GrayImage& a, const GrayImage& b, std::size_t x0, std::size_t y0,
                std::size_t x1, std::size_t y1) {
  Moments m;
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      const std::int64_t p = a.at(x, y), q = b.at(x, y);
      ++m.n;
      m.sx += p;
      m.sy += q;
      m.sxx += p * p;
      m.syy += q * q;
      m.sxy += p * q;
    }
  return m;
}

// n^2-scaled variances stay exact in int64 for 8-bit images up to the map
// resolution, so only the final ratio rounds.
double score(const Moments& m) {
  const std::int64_t vx = m.n * m.sxx - m.sx * m.sx;
  const std::int64_t vy = m.n * m.syy - m.sy * m.sy;
  if (vx == 0 || vy == 0) return 0.0;
  const std::int64_t cov = m.n * m.sxy - m.sx * m.sy;
  return static_cast<double>(cov) / std::sqrt(static_cast<double>(vx) * static_cast<double>(vy));
}

void require_same_size(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw ValidationError("image", "size " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                       " does not match reference " + std::to_string(b.width) + "x" +
                                       std::to_string(b.height));
}

}  // namespace

const ReferenceEntry* ReferenceLibrary::find(const std::string& board_type) const {
  for (const auto& e : entries)
    if (e.board_type == board_type) return &e;
  return nullptr;
}

double ncc(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b);
  return score(moments(a, b, 0, 0, a.width, a.height));
}

double ncc_region(const GrayImage& a, const GrayImage& b, std::size_t x0, std::size_t y0,
                  std::size_t x1, std::size_t y1) {
  require_same_size(a, b);
  x1 = std::min(x1, a.width);
  y1 = std::min(y1, a.height);
  if (x0 >= x1 || y0 >= y1) return 1.0;
  const Moments m = moments(a, b, x0, y0, x1, y1);
  const std::int64_t vx = m.n * m.sxx - m.sx * m.sx;
  const std::int64_t vy = m.n * m.syy - m.sy * m.sy;
  if (vx == 0 && vy == 0) return m.sx == m.sy ? 1.0 : 0.0;
  return score(m);
}

Identification identify_board(const GrayImage& image, const ReferenceLibrary& library,
                              double match_threshold) {
  if (library.entries.empty()) throw ValidationError("library", "reference library is empty");
  Identification best;
  bool have = false;
  for (const auto& entry : library.entries) {
    for (int k = 0; k < 4; ++k) {
      const GrayImage rotated = rotate_quarter(entry.image, k);
      const double s = ncc(image, rotated);
      if (!have || s > best.score) {
        best = {entry.board_type, cell::orientation_from_quarter_turns(k), s};
        have = true;
      }
    }
  }
  if (best.score < match_threshold) throw LowConfidence(best.score, best);
  return best;
}

ResidualReport stage1_residuals(const GrayImage& aligned, const GrayImage& reference,
                                std::size_t tile_px, const std::vector<Rect>& regions,
                                double threshold) {
  require_same_size(aligned, reference);
  ResidualReport out;
  auto check = [&](std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1) {
    const double r = 1.0 - ncc_region(aligned, reference, x0, y0, x1, y1);
    out.max_residual = std::max(out.max_residual, r);
    if (r > threshold)
      out.flagged.push_back({static_cast<double>(x0), static_cast<double>(y0),
                             static_cast<double>(x1 - x0), static_cast<double>(y1 - y0)});
  };
  if (tile_px > 0)
    for (std::size_t y = 0; y < aligned.height; y += tile_px)
      for (std::size_t x = 0; x < aligned.width; x += tile_px)
        check(x, y, std::min(x + tile_px, aligned.width), std::min(y + tile_px, aligned.height));
  for (const Rect& r : regions) {
    const auto xs = pixel_span(r.x, r.right(), aligned.width);
    const auto ys = pixel_span(r.y, r.bottom(), aligned.height);
    check(xs.begin, ys.begin, xs.end, ys.end);
  }
  return out;
}

}  // namespace orbitforge::optical
