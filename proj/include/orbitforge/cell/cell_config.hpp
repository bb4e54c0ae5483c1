#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "orbitforge/cell/board.hpp"
#include "orbitforge/common/vec.hpp"

namespace orbitforge::cell {

struct TraySlot {
  Vec2 position_mm;
};

struct BackplaneSlot {
  Vec3 nominal_pose_mm;
};

struct Backplane {
  std::vector<BackplaneSlot> slots;
  double clearance_mm = 0.05;
  double lip_mm = 0.08;
  double casing_top_mm = 3.0;  // connector casing height above the seat

  std::size_t slot_count() const { return slots.size(); }
};

struct Gripper {
  double max_span_mm = 150.0;
  double probe_resolution_mm = 0.5;
};

struct Workspace {
  Vec3 min_mm{-1000.0, -1000.0, -1000.0};
  Vec3 max_mm{1000.0, 1000.0, 1000.0};

  bool contains(const Vec3& p) const {
    return p.x >= min_mm.x && p.x <= max_mm.x && p.y >= min_mm.y && p.y <= max_mm.y &&
           p.z >= min_mm.z && p.z <= max_mm.z;
  }
};

/// Per-state supply draw of one subsystem type. The current alternates
/// between the listed levels and fluctuates with `current_sd_a`.
struct StateDraw {
  std::vector<double> current_levels_a;
  double current_sd_a = 0.0;
};

struct ElectricalProfile {
  std::string id;
  double voltage_v = 5.0;
  std::map<SystemState, StateDraw> states;
};

struct CellConfig {
  std::uint64_t rng_seed = 0;
  Workspace workspace;
  Gripper gripper;
  std::vector<TraySlot> tray_slots;
  Backplane backplane;
  std::vector<BoardType> board_types;
  std::map<std::string, ElectricalProfile> electrical_profiles;
  std::vector<BoardInstance> inventory;

  /// Throws ValidationError when the id is unknown.
  const BoardType& board_type(std::string_view id) const;
  const BoardType* find_board_type(std::string_view id) const;
  const BoardType* find_board_type_by_digit(int digit) const;
  const BoardInstance* find_board(std::string_view serial) const;
};

/// Parses and validates. Throws ParseError for malformed text and
/// ValidationError (naming the field) for invariant violations.
CellConfig parse_cell_config(std::string_view yaml_text);
CellConfig load_cell_config(const std::filesystem::path& path);

/// Re-checks every invariant on an already-built config.
void validate(const CellConfig& config);

}  // namespace orbitforge::cell
