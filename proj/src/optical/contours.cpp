#include "orbitforge/optical/contours.hpp"

#include <algorithm>

#include "orbitforge/common/error.hpp"

namespace orbitforge::optical {

namespace {

// Clockwise neighbour order in image coordinates (y down), starting east.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

int direction(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return -1;
}

// Labelled copy with a one-pixel zero frame.
class Labels {
 public:
  explicit Labels(const Mask& m) : w_(static_cast<int>(m.width) + 2), h_(static_cast<int>(m.height) + 2) {
    f_.assign(static_cast<std::size_t>(w_ * h_), 0);
    for (std::size_t y = 0; y < m.height; ++y)
      for (std::size_t x = 0; x < m.width; ++x)
        at(static_cast<int>(x) + 1, static_cast<int>(y) + 1) = m.at(x, y) ? 1 : 0;
  }
  int& at(int x, int y) { return f_[static_cast<std::size_t>(y * w_ + x)]; }
  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_, h_;
  std::vector<int> f_;
};

// Steps 3.1-3.5 of the border following algorithm. (x, y) is the start
// pixel and (x2, y2) its zero neighbour that defines the entry direction.
std::vector<Point> follow(Labels& f, int x, int y, int x2, int y2, int nbd) {
  std::vector<Point> border;
  // 3.1: clockwise from (x2, y2) around (x, y).
  const int d0 = direction(x2 - x, y2 - y);
  int found = -1;
  for (int k = 0; k < 8; ++k) {
    const int d = (d0 + k) % 8;
    if (f.at(x + kDx[d], y + kDy[d]) != 0) {
      found = d;
      break;
    }
  }
  if (found < 0) {
    f.at(x, y) = -nbd;
    border.push_back({x, y});
    return border;
  }
  const int x1 = x + kDx[found], y1 = y + kDy[found];
  // 3.2
  int px = x1, py = y1;  // (i2, j2)
  int cx = x, cy = y;    // (i3, j3)
  while (true) {
    border.push_back({cx, cy});
    // 3.3: counter-clockwise from the element after (px, py).
    const int dp = direction(px - cx, py - cy);
    bool east_zero_examined = false;
    int nx = 0, ny = 0;
    for (int k = 1; k <= 8; ++k) {
      const int d = ((dp - k) % 8 + 8) % 8;
      const int tx = cx + kDx[d], ty = cy + kDy[d];
      if (f.at(tx, ty) != 0) {
        nx = tx;
        ny = ty;
        break;
      }
      if (d == 0) east_zero_examined = true;
    }
    // 3.4
    if (east_zero_examined) {
      f.at(cx, cy) = -nbd;
    } else if (f.at(cx, cy) == 1) {
      f.at(cx, cy) = nbd;
    }
    // 3.5
    if (nx == x && ny == y && cx == x1 && cy == y1) break;
    px = cx;
    py = cy;
    cx = nx;
    cy = ny;
  }
  return border;
}

std::size_t component_area(const Mask& m, std::size_t sx, std::size_t sy) {
  std::vector<std::uint8_t> seen(m.data.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{sx, sy}};
  seen[sy * m.width + sx] = 1;
  std::size_t n = 0;
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    ++n;
    for (int d = 0; d < 8; ++d) {
      const long nx = static_cast<long>(x) + kDx[d], ny = static_cast<long>(y) + kDy[d];
      if (nx < 0 || ny < 0 || nx >= static_cast<long>(m.width) || ny >= static_cast<long>(m.height))
        continue;
      const std::size_t i = static_cast<std::size_t>(ny) * m.width + static_cast<std::size_t>(nx);
      if (m.data[i] && !seen[i]) {
        seen[i] = 1;
        stack.push_back({static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)});
      }
    }
  }
  return n;
}

}  // namespace

std::vector<Contour> extract_contours(const Mask& mask) {
  Labels f(mask);
  std::vector<Contour> out;
  int nbd = 1;
  for (int y = 1; y < f.height() - 1; ++y) {
    for (int x = 1; x < f.width() - 1; ++x) {
      const int v = f.at(x, y);
      if (v == 0) continue;
      if (v == 1 && f.at(x - 1, y) == 0) {
        ++nbd;
        std::vector<Point> border = follow(f, x, y, x - 1, y, nbd);
        Contour c;
        for (Point& p : border) {
          p.x -= 1;  // undo the frame offset
          p.y -= 1;
        }
        int minx = border[0].x, maxx = minx, miny = border[0].y, maxy = miny;
        for (const Point& p : border) {
          minx = std::min(minx, p.x);
          maxx = std::max(maxx, p.x);
          miny = std::min(miny, p.y);
          maxy = std::max(maxy, p.y);
        }
        c.points = std::move(border);
        c.bbox = {static_cast<double>(minx), static_cast<double>(miny),
                  static_cast<double>(maxx - minx + 1), static_cast<double>(maxy - miny + 1)};
        c.area_px = component_area(mask, static_cast<std::size_t>(x - 1), static_cast<std::size_t>(y - 1));
        out.push_back(std::move(c));
      } else if (v >= 1 && f.at(x + 1, y) == 0) {
        ++nbd;
        follow(f, x, y, x + 1, y, nbd);  // hole border: labels only
      }
    }
  }
  return out;
}

void ClassThresholds::validate() const {
  for (std::size_t i = 0; i < value.size(); ++i)
    if (!(value[i] > 0.0 && value[i] < 1.0))
      throw ValidationError("optical.thresholds." +
                                std::string(cell::to_string(static_cast<cell::SurfaceClass>(i))),
                            "must lie in (0, 1)");
}

Mask binarize(const FloatGrid& map, double threshold) {
  Mask m(map.width, map.height, 0);
  for (std::size_t i = 0; i < map.data.size(); ++i) m.data[i] = map.data[i] >= threshold ? 1 : 0;
  return m;
}

std::array<Mask, cell::kSurfaceClassCount> binarize(const ProbabilityMap& maps,
                                                    const ClassThresholds& t) {
  std::array<Mask, cell::kSurfaceClassCount> out;
  for (cell::SurfaceClass c : cell::kAllSurfaceClasses)
    out[static_cast<std::size_t>(c)] = binarize(maps.of(c), t.of(c));
  return out;
}

DefectReport detect_defects(const ProbabilityMap& maps, const ClassThresholds& thresholds,
                            std::size_t min_area) {
  thresholds.validate();
  DefectReport r;
  const auto masks = binarize(maps, thresholds);
  for (cell::SurfaceClass c : cell::kAllSurfaceClasses) {
    for (auto& contour : extract_contours(masks[static_cast<std::size_t>(c)])) {
      if (!cell::is_defect_class(c)) {
        r.nominal.push_back({c, std::move(contour)});
      } else if (contour.area_px >= min_area) {
        r.defects.push_back({c, std::move(contour)});
      } else {
        ++r.filtered;
      }
    }
  }
  r.pass = r.defects.empty();
  return r;
}

nlohmann::json to_json(const DefectReport& r) {
  auto list = [](const std::vector<Detection>& ds) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& d : ds)
      a.push_back({{"class", cell::to_string(d.surface_class)},
                   {"bbox", {d.contour.bbox.x, d.contour.bbox.y, d.contour.bbox.width, d.contour.bbox.height}},
                   {"area_px", d.contour.area_px}});
    return a;
  };
  return {{"verdict", r.pass ? "Pass" : "Fail"},
          {"defects", list(r.defects)},
          {"nominal_count", r.nominal.size()},
          {"filtered", r.filtered}};
}

double iou(const Rect& a, const Rect& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace orbitforge::optical
