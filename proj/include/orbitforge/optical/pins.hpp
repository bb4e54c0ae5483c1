#pragma once

#include <span>

#include "json.hpp"
#include "orbitforge/cell/board.hpp"
#include "orbitforge/common/vec.hpp"

namespace orbitforge::optical {

struct PinGridSpec {
  int rows = 2;
  int cols = 5;
  double pitch = 1.0;
  Vec2 nominal_offset;      // casing frame position of pin (0, 0)
  double tolerance = 0.05;  // same unit as pitch

  static PinGridSpec from(const cell::ConnectorPins& pins);
  Vec2 nominal_centroid() const;
};

struct PinReport {
  Vec2 observed_centroid;
  Vec2 nominal_centroid;
  double deviation = 0.0;
  int missing = 0;  // negative when extra centres were seen
  bool pass = true;
};

/// Centre of mass of the visible pin centres against the full-grid centre.
/// An empty observation fails with deviation = +inf.
PinReport inspect_pins(std::span<const Vec2> pin_centers, const PinGridSpec& spec);

nlohmann::json to_json(const PinReport& r);

}  // namespace orbitforge::optical
