#include "orbitforge/optical/pins.hpp"

#include <limits>

#include "orbitforge/common/error.hpp"

namespace orbitforge::optical {

PinGridSpec PinGridSpec::from(const cell::ConnectorPins& p) {
  return {p.rows, p.cols, p.pitch_mm, {}, p.tolerance_mm};
}

Vec2 PinGridSpec::nominal_centroid() const {
  return nominal_offset + Vec2{0.5 * (cols - 1) * pitch, 0.5 * (rows - 1) * pitch};
}

PinReport inspect_pins(std::span<const Vec2> centers, const PinGridSpec& spec) {
  if (spec.rows * spec.cols < 1 || !(spec.pitch > 0))
    throw ValidationError("pins", "grid needs at least one pin and a positive pitch");
  PinReport r;
  r.nominal_centroid = spec.nominal_centroid();
  r.missing = spec.rows * spec.cols - static_cast<int>(centers.size());
  if (centers.empty()) {
    r.deviation = std::numeric_limits<double>::infinity();
    r.pass = false;
    return r;
  }
  Vec2 sum;
  for (const Vec2& c : centers) sum = sum + c;
  r.observed_centroid = (1.0 / static_cast<double>(centers.size())) * sum;
  r.deviation = (r.observed_centroid - r.nominal_centroid).norm();
  r.pass = r.deviation <= spec.tolerance && r.missing == 0;
  return r;
}

nlohmann::json to_json(const PinReport& r) {
  return {{"verdict", r.pass ? "Pass" : "Fail"},
          {"observed_centroid", {r.observed_centroid.x, r.observed_centroid.y}},
          {"nominal_centroid", {r.nominal_centroid.x, r.nominal_centroid.y}},
          {"deviation", r.deviation},
          {"missing", r.missing}};
}

}  // namespace orbitforge::optical
