#pragma once

#include <algorithm>

namespace orbitforge {

/// Axis-aligned rectangle: top-left corner plus extent. Units depend on the
/// context (millimetres on a board, pixels in an image).
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  double right() const { return x + width; }
  double bottom() const { return y + height; }

  bool contains(const Rect& inner) const {
    return inner.x >= x && inner.y >= y && inner.right() <= right() &&
           inner.bottom() <= bottom();
  }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

inline double intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace orbitforge
