#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orbitforge/common/rect.hpp"
#include "orbitforge/common/vec.hpp"

namespace orbitforge::cell {

/// Rotation of a board in its tray pocket, counter-clockwise in quarter turns.
enum class Orientation : int { Deg0 = 0, Deg90 = 1, Deg180 = 2, Deg270 = 3 };

inline constexpr Orientation kAllOrientations[] = {Orientation::Deg0, Orientation::Deg90,
                                                  Orientation::Deg180, Orientation::Deg270};

constexpr int quarter_turns(Orientation o) { return static_cast<int>(o); }
constexpr int degrees(Orientation o) { return 90 * quarter_turns(o); }
constexpr Orientation orientation_from_quarter_turns(int q) {
  return static_cast<Orientation>(((q % 4) + 4) % 4);
}
/// Throws ValidationError unless deg is one of 0/90/180/270.
Orientation orientation_from_degrees(int deg);

/// Pixel classes of the surface segmentation. A location may carry several.
enum class SurfaceClass : int { Component = 0, Solderpad, Solderbridge, Solderball, Tombstone };

inline constexpr std::size_t kSurfaceClassCount = 5;
inline constexpr SurfaceClass kAllSurfaceClasses[] = {
    SurfaceClass::Component, SurfaceClass::Solderpad, SurfaceClass::Solderbridge,
    SurfaceClass::Solderball, SurfaceClass::Tombstone};

std::string_view to_string(SurfaceClass c);
std::optional<SurfaceClass> surface_class_from_string(std::string_view s);
constexpr bool is_defect_class(SurfaceClass c) {
  return c == SurfaceClass::Solderbridge || c == SurfaceClass::Solderball ||
         c == SurfaceClass::Tombstone;
}

/// Operating modes a subsystem can be driven into through the DEVBoard.
enum class SystemState : int {
  Deactivated = 0,
  Idle,
  ComputationActive,
  RadioModuleActive,
  Transmitting
};

std::string_view to_string(SystemState s);
std::optional<SystemState> system_state_from_string(std::string_view s);

struct LayoutItem {
  SurfaceClass surface_class = SurfaceClass::Component;
  Rect rect_mm;
};

/// Pin raster of the board-side connector, in the casing frame.
struct ConnectorPins {
  int rows = 2;
  int cols = 5;
  double pitch_mm = 1.27;
  double tolerance_mm = 0.05;
};

struct BoardType {
  std::string id;
  int module_digit = 1;  // planner digit, 1..9
  int span_slots = 1;
  std::string thermal_tag;
  double width_mm = 0.0;
  double height_mm = 0.0;
  Vec2 connector_offset_mm;  // board corner to connector centre
  std::string reference_image_id;
  std::string reference_image_path;  // optional PGM; rendered from layout if empty
  std::vector<LayoutItem> component_layout;
  std::string electrical_profile_id;
  Vec2 true_bias_mm;  // systematic nominal-to-true connector offset
  ConnectorPins pins;

  double min_dimension() const { return width_mm < height_mm ? width_mm : height_mm; }
};

enum class FaultKind : int {
  Solderball,
  Tombstone,
  Solderbridge,
  MissingPin,
  BentPin,
  ElectricalDrift,
  MisalignmentBias,
  ConnectorFault,
  DeadBoard
};

std::string_view to_string(FaultKind k);
std::optional<FaultKind> fault_kind_from_string(std::string_view s);

/// A scripted defect attached to one board serial. Only the fields relevant
/// to `kind` are read.
struct FaultSpec {
  FaultKind kind = FaultKind::Solderball;
  std::string serial;
  Rect region_mm;                 // surface defects, board frame
  int pin_row = 0;                // pin faults
  int pin_col = 0;
  Vec2 pin_shift_mm;              // bent pin
  SystemState state = SystemState::Idle;  // electrical drift
  double current_factor = 1.0;
  Vec2 bias_mm;                   // misalignment
  bool clears_on_reinsert = true; // connector fault
};

enum class BoardHealth : int { Unknown = 0, Passed, Discarded };

std::string_view to_string(BoardHealth h);

struct BoardInstance {
  std::string serial;
  std::string board_type;
  std::optional<std::size_t> tray_slot;
  Orientation orientation = Orientation::Deg0;
  std::vector<FaultSpec> injected_faults;
  BoardHealth health = BoardHealth::Unknown;

  bool has_fault(FaultKind k) const;
};

}  // namespace orbitforge::cell
