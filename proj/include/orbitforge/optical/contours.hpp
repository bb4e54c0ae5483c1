#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "json.hpp"
#include "orbitforge/cell/board.hpp"
#include "orbitforge/common/rect.hpp"
#include "orbitforge/optical/image.hpp"
#include "orbitforge/optical/oracle.hpp"

namespace orbitforge::optical {

struct Point {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Point, Point) = default;
};

/// Outer border of one 8-connected foreground component.
struct Contour {
  std::vector<Point> points;  // border pixels in tracing order, first = start pixel
  Rect bbox;                  // tight, in pixels (width = max_x - min_x + 1)
  std::size_t area_px = 0;    // pixel count of the component
};

/// Outer borders by Suzuki-Abe border following, 8-connectivity, in raster
/// order of their start pixels (top row first, then leftmost). Hole borders
/// are traced for labelling but not returned.
std::vector<Contour> extract_contours(const Mask& mask);

struct ClassThresholds {
  std::array<double, cell::kSurfaceClassCount> value{0.5, 0.5, 0.5, 0.5, 0.5};

  double of(cell::SurfaceClass c) const { return value[static_cast<std::size_t>(c)]; }
  void validate() const;
};

/// Pixel is set iff value >= threshold.
Mask binarize(const FloatGrid& map, double threshold);
std::array<Mask, cell::kSurfaceClassCount> binarize(const ProbabilityMap& maps,
                                                    const ClassThresholds& thresholds);

struct Detection {
  cell::SurfaceClass surface_class = cell::SurfaceClass::Component;
  Contour contour;
};

struct DefectReport {
  std::vector<Detection> nominal;  // component, solderpad
  std::vector<Detection> defects;  // solderbridge, solderball, tombstone, at or above the area filter
  std::size_t filtered = 0;        // defect blobs dropped by the area filter
  bool pass = true;
};

DefectReport detect_defects(const ProbabilityMap& maps, const ClassThresholds& thresholds,
                            std::size_t min_defect_area_px = 4);

nlohmann::json to_json(const DefectReport& report);

/// Intersection over union; 0 for disjoint or empty rectangles.
double iou(const Rect& a, const Rect& b);

}  // namespace orbitforge::optical
