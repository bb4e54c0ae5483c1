#include "orbitforge/cell/probe.hpp"

#include <cmath>
#include <string>

namespace orbitforge::cell {

double facing_extent_mm(const BoardType& type, Orientation o) {
  return quarter_turns(o) % 2 == 0 ? type.width_mm : type.height_mm;
}

double facing_connector_mm(const BoardType& type, Orientation o) {
  const Vec2 c = type.connector_offset_mm;
  switch (o) {
    case Orientation::Deg0: return c.x;
    case Orientation::Deg90: return type.height_mm - c.y;
    case Orientation::Deg180: return type.width_mm - c.x;
    case Orientation::Deg270: return c.y;
  }
  return c.x;
}

ProbeResult probe_slot(const CellConfig& cell, std::span<const BoardInstance> inventory,
                       std::size_t tray_slot, const BoardType& expected_type, Rng& rng) {
  if (tray_slot >= cell.tray_slots.size())
    throw ValidationError("tray_slot", "no tray slot " + std::to_string(tray_slot));

  const BoardInstance* board = nullptr;
  for (const auto& b : inventory)
    if (b.tray_slot && *b.tray_slot == tray_slot) board = &b;
  if (board == nullptr) return ProbeAbsent{cell.gripper.max_span_mm};

  const double res = cell.gripper.probe_resolution_mm;
  if (std::abs(expected_type.width_mm - expected_type.height_mm) < 2.0 * res)
    throw AmbiguousProbe("board type '" + expected_type.id +
                         "': side lengths differ by less than two probe resolutions");

  const BoardType& actual = cell.board_type(board->board_type);
  ProbePresent out;
  out.measured_width_mm =
      facing_extent_mm(actual, board->orientation) + rng.uniform(-0.5 * res, 0.5 * res);
  out.measured_connector_mm =
      facing_connector_mm(actual, board->orientation) + rng.uniform(-0.5 * res, 0.5 * res);

  // Side length separates {0, 180} from {90, 270}; the connector position
  // separates the two members of the pair.
  const bool width_faces = std::abs(out.measured_width_mm - expected_type.width_mm) <=
                           std::abs(out.measured_width_mm - expected_type.height_mm);
  const Orientation a = width_faces ? Orientation::Deg0 : Orientation::Deg90;
  const Orientation b = width_faces ? Orientation::Deg180 : Orientation::Deg270;
  const double ca = facing_connector_mm(expected_type, a);
  const double cb = facing_connector_mm(expected_type, b);
  if (std::abs(ca - cb) < 2.0 * res)
    throw AmbiguousProbe("board type '" + expected_type.id +
                         "': connector is centred along the probe axis");
  out.orientation = std::abs(out.measured_connector_mm - ca) <= std::abs(out.measured_connector_mm - cb)
                        ? a
                        : b;
  return out;
}

ProbeResult probe_slot(const CellConfig& cell, std::size_t tray_slot, Rng& rng) {
  if (tray_slot >= cell.tray_slots.size())
    throw ValidationError("tray_slot", "no tray slot " + std::to_string(tray_slot));
  for (const auto& b : cell.inventory)
    if (b.tray_slot && *b.tray_slot == tray_slot)
      return probe_slot(cell, cell.inventory, tray_slot, cell.board_type(b.board_type), rng);
  return ProbeAbsent{cell.gripper.max_span_mm};
}

bool grip_feasible(const BoardType& type, Orientation o, const Gripper& gripper) {
  return facing_extent_mm(type, o) <= gripper.max_span_mm;
}

int flips_required(Orientation o) { return (4 - quarter_turns(o)) % 4; }

}  // namespace orbitforge::cell
