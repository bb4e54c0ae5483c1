#pragma once

#include <cstddef>
#include <span>
#include <variant>

#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/rng.hpp"

namespace orbitforge::cell {

class AmbiguousProbe : public Error {
 public:
  using Error::Error;
};

struct ProbeAbsent {
  double reached_span_mm = 0.0;

  friend bool operator==(const ProbeAbsent&, const ProbeAbsent&) = default;
};

struct ProbePresent {
  Orientation orientation = Orientation::Deg0;
  double measured_width_mm = 0.0;      // board extent along the gripper axis
  double measured_connector_mm = 0.0;  // connector casing position along the same axis

  friend bool operator==(const ProbePresent&, const ProbePresent&) = default;
};

using ProbeResult = std::variant<ProbeAbsent, ProbePresent>;

/// Extent of the board along the gripper opening axis for an orientation.
double facing_extent_mm(const BoardType& type, Orientation o);
/// Connector centre along the gripper axis, measured from the board's near side.
double facing_connector_mm(const BoardType& type, Orientation o);

/// Opens the gripper against the board in `tray_slot` and infers its
/// orientation from the measured side length and connector position, with
/// uniform noise of +-resolution/2 on each measurement.
///
/// `expected_type` names the board type the plan assigned to this slot; it
/// supplies the dimensions compared against. Throws AmbiguousProbe when the
/// type's sides (or its connector positions) differ by less than two probe
/// resolutions.
ProbeResult probe_slot(const CellConfig& cell, std::span<const BoardInstance> inventory,
                       std::size_t tray_slot, const BoardType& expected_type, Rng& rng);

/// Convenience overload: uses `cell.inventory` and the type of the board found
/// in the slot.
ProbeResult probe_slot(const CellConfig& cell, std::size_t tray_slot, Rng& rng);

/// Grip planning abstracted to a feasibility bit: the gripper must span the
/// board extent across its opening axis.
bool grip_feasible(const BoardType& type, Orientation o, const Gripper& gripper);

/// Quarter-turn flips (second arm) needed so the connector points away from
/// the gripper before insertion.
int flips_required(Orientation o);

}  // namespace orbitforge::cell
