#include "orbitforge/cell/cell_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "orbitforge/cell/yaml_io.hpp"
#include "orbitforge/common/yaml_util.hpp"

namespace orbitforge::cell {

namespace {

using yaml::join;
using yaml::optional;
using yaml::required;

Rect parse_rect(const YAML::Node& node, const std::string& path) {
  const auto a = yaml::fixed_vector<4>(node, path);
  return {a[0], a[1], a[2], a[3]};
}

BoardType parse_board_type(const YAML::Node& node, const std::string& path) {
  BoardType t;
  t.id = required<std::string>(node, "id", path);
  t.module_digit = required<int>(node, "module_digit", path);
  t.span_slots = optional<int>(node, "span", path, 1);
  t.thermal_tag = optional<std::string>(node, "thermal_tag", path, "");
  t.width_mm = required<double>(node, "width_mm", path);
  t.height_mm = required<double>(node, "height_mm", path);
  if (!node["connector_offset_mm"])
    throw ValidationError(join(path, "connector_offset_mm"), "required field missing");
  t.connector_offset_mm = yaml::vec2(node["connector_offset_mm"], join(path, "connector_offset_mm"));
  t.reference_image_id = optional<std::string>(node, "reference_image", path, t.id);
  t.reference_image_path = optional<std::string>(node, "reference_image_path", path, "");
  t.electrical_profile_id = required<std::string>(node, "electrical_profile", path);
  t.true_bias_mm = yaml::optional_vec2(node, "true_bias_mm", path, {});
  if (const YAML::Node pins = node["pins"]) {
    const std::string p = join(path, "pins");
    t.pins.rows = optional<int>(pins, "rows", p, t.pins.rows);
    t.pins.cols = optional<int>(pins, "cols", p, t.pins.cols);
    t.pins.pitch_mm = optional<double>(pins, "pitch_mm", p, t.pins.pitch_mm);
    t.pins.tolerance_mm = optional<double>(pins, "tolerance_mm", p, t.pins.tolerance_mm);
  }
  if (const YAML::Node layout = node["layout"]) {
    if (!layout.IsSequence()) throw ParseError(join(path, "layout") + ": expected a sequence");
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const std::string p = join(path, "layout[" + std::to_string(i) + "]");
      LayoutItem item;
      const auto cls = required<std::string>(layout[i], "class", p);
      const auto parsed = surface_class_from_string(cls);
      if (!parsed) throw ValidationError(join(p, "class"), "unknown surface class '" + cls + "'");
      item.surface_class = *parsed;
      if (!layout[i]["rect_mm"]) throw ValidationError(join(p, "rect_mm"), "required field missing");
      item.rect_mm = parse_rect(layout[i]["rect_mm"], join(p, "rect_mm"));
      t.component_layout.push_back(item);
    }
  }
  return t;
}

ElectricalProfile parse_profile(const YAML::Node& node, const std::string& path) {
  ElectricalProfile prof;
  prof.id = required<std::string>(node, "id", path);
  prof.voltage_v = required<double>(node, "voltage_v", path);
  const YAML::Node states = node["states"];
  if (!states || !states.IsMap())
    throw ValidationError(join(path, "states"), "required mapping missing");
  for (const auto& kv : states) {
    const auto name = yaml::as<std::string>(kv.first, join(path, "states"));
    const std::string p = join(path, "states." + name);
    const auto st = system_state_from_string(name);
    if (!st) throw ValidationError(p, "unknown system state");
    StateDraw draw;
    const YAML::Node levels = kv.second["current_a"];
    if (!levels) throw ValidationError(join(p, "current_a"), "required field missing");
    if (levels.IsSequence()) {
      for (const auto& l : levels) draw.current_levels_a.push_back(yaml::as<double>(l, join(p, "current_a")));
    } else {
      draw.current_levels_a.push_back(yaml::as<double>(levels, join(p, "current_a")));
    }
    draw.current_sd_a = optional<double>(kv.second, "sd_a", p, 0.0);
    prof.states[*st] = draw;
  }
  return prof;
}

BoardInstance parse_board(const YAML::Node& node, const std::string& path) {
  BoardInstance b;
  b.serial = required<std::string>(node, "serial", path);
  b.board_type = required<std::string>(node, "board_type", path);
  if (node["tray_slot"] && !node["tray_slot"].IsNull())
    b.tray_slot = yaml::as<std::size_t>(node["tray_slot"], join(path, "tray_slot"));
  b.orientation = orientation_from_degrees(optional<int>(node, "orientation", path, 0));
  if (const YAML::Node faults = node["faults"]) {
    b.injected_faults = parse_fault_script(faults, join(path, "faults"));
    for (auto& f : b.injected_faults) f.serial = b.serial;
  }
  return b;
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

}  // namespace

FaultSpec parse_fault_spec(const YAML::Node& node, const std::string& path) {
  FaultSpec f;
  const auto kind = required<std::string>(node, "kind", path);
  const auto parsed = fault_kind_from_string(kind);
  if (!parsed) throw ValidationError(join(path, "kind"), "unknown fault kind '" + kind + "'");
  f.kind = *parsed;
  f.serial = optional<std::string>(node, "serial", path, "");
  switch (f.kind) {
    case FaultKind::Solderball:
    case FaultKind::Tombstone:
    case FaultKind::Solderbridge:
      if (!node["region_mm"]) throw ValidationError(join(path, "region_mm"), "required field missing");
      f.region_mm = parse_rect(node["region_mm"], join(path, "region_mm"));
      check(f.region_mm.width > 0 && f.region_mm.height > 0, join(path, "region_mm"),
            "extent must be positive");
      break;
    case FaultKind::MissingPin:
    case FaultKind::BentPin:
      f.pin_row = required<int>(node, "row", path);
      f.pin_col = required<int>(node, "col", path);
      f.pin_shift_mm = yaml::optional_vec2(node, "shift_mm", path, {});
      break;
    case FaultKind::ElectricalDrift: {
      const auto st = required<std::string>(node, "state", path);
      const auto s = system_state_from_string(st);
      if (!s) throw ValidationError(join(path, "state"), "unknown system state '" + st + "'");
      f.state = *s;
      f.current_factor = required<double>(node, "current_factor", path);
      check(f.current_factor > 0, join(path, "current_factor"), "must be positive");
      break;
    }
    case FaultKind::MisalignmentBias:
      if (!node["bias_mm"]) throw ValidationError(join(path, "bias_mm"), "required field missing");
      f.bias_mm = yaml::vec2(node["bias_mm"], join(path, "bias_mm"));
      break;
    case FaultKind::ConnectorFault:
      f.clears_on_reinsert = optional<bool>(node, "clears_on_reinsert", path, true);
      break;
    case FaultKind::DeadBoard:
      f.clears_on_reinsert = false;
      break;
  }
  return f;
}

std::vector<FaultSpec> parse_fault_script(const YAML::Node& node, const std::string& path) {
  YAML::Node seq = node;
  std::string p = path;
  if (node.IsMap()) {
    seq = node["faults"];
    p = join(path, "faults");
    if (!seq) return {};
  }
  if (seq.IsNull()) return {};
  if (!seq.IsSequence()) throw ParseError(p + ": expected a sequence of faults");
  std::vector<FaultSpec> out;
  for (std::size_t i = 0; i < seq.size(); ++i)
    out.push_back(parse_fault_spec(seq[i], p + "[" + std::to_string(i) + "]"));
  return out;
}

const BoardType* CellConfig::find_board_type(std::string_view id) const {
  for (const auto& t : board_types)
    if (t.id == id) return &t;
  return nullptr;
}

const BoardType& CellConfig::board_type(std::string_view id) const {
  if (const BoardType* t = find_board_type(id)) return *t;
  throw ValidationError("board_types", "unknown board type '" + std::string(id) + "'");
}

const BoardType* CellConfig::find_board_type_by_digit(int digit) const {
  for (const auto& t : board_types)
    if (t.module_digit == digit) return &t;
  return nullptr;
}

const BoardInstance* CellConfig::find_board(std::string_view serial) const {
  for (const auto& b : inventory)
    if (b.serial == serial) return &b;
  return nullptr;
}

void validate(const CellConfig& c) {
  const auto& bp = c.backplane;
  check(!bp.slots.empty(), "backplane.slots", "at least one backplane slot required");
  check(bp.clearance_mm > 0, "backplane.clearance_mm", "must be positive");
  check(bp.clearance_mm < bp.lip_mm, "backplane.clearance_mm", "clearance must be below lip");
  check(bp.casing_top_mm > 0.5, "backplane.casing_top_mm", "casing must be taller than 0.5 mm");
  check(!c.tray_slots.empty(), "tray_slots", "at least one tray slot required");
  check(c.gripper.probe_resolution_mm > 0, "gripper.probe_resolution_mm", "must be positive");
  check(!c.board_types.empty(), "board_types", "at least one board type required");

  for (std::size_t i = 0; i < c.tray_slots.size(); ++i) {
    const Vec2 p = c.tray_slots[i].position_mm;
    check(c.workspace.contains({p.x, p.y, 0.0}) ||
              c.workspace.contains({p.x, p.y, c.workspace.min_mm.z}),
          "tray_slots[" + std::to_string(i) + "].position_mm", "outside workspace bounds");
  }
  for (std::size_t i = 0; i < bp.slots.size(); ++i)
    check(c.workspace.contains(bp.slots[i].nominal_pose_mm),
          "backplane.slots[" + std::to_string(i) + "].nominal_pose_mm",
          "outside workspace bounds");

  std::set<std::string> ids;
  std::set<int> digits;
  for (std::size_t i = 0; i < c.board_types.size(); ++i) {
    const auto& t = c.board_types[i];
    const std::string p = "board_types[" + std::to_string(i) + "]";
    check(ids.insert(t.id).second, p + ".id", "duplicate board type id '" + t.id + "'");
    check(t.module_digit >= 1 && t.module_digit <= 9, p + ".module_digit", "must be in 1..9");
    check(digits.insert(t.module_digit).second, p + ".module_digit", "duplicate module digit");
    check(t.span_slots >= 1 && static_cast<std::size_t>(t.span_slots) <= bp.slots.size(),
          p + ".span", "must be between 1 and the backplane slot count");
    check(t.width_mm > 0 && t.height_mm > 0, p + ".width_mm", "dimensions must be positive");
    check(t.width_mm != t.height_mm, p + ".height_mm",
          "board must be non-square so the probe can resolve orientation");
    check(t.connector_offset_mm.x >= 0 && t.connector_offset_mm.x <= t.width_mm &&
              t.connector_offset_mm.y >= 0 && t.connector_offset_mm.y <= t.height_mm,
          p + ".connector_offset_mm", "must lie within the board extents");
    check(bp.lip_mm < t.min_dimension(), "backplane.lip_mm",
          "lip must be below the smallest board dimension");
    check(std::max(t.width_mm, t.height_mm) <= c.gripper.max_span_mm, "gripper.max_span_mm",
          "gripper cannot span board type '" + t.id + "'");
    check(c.electrical_profiles.count(t.electrical_profile_id) == 1, p + ".electrical_profile",
          "unknown electrical profile '" + t.electrical_profile_id + "'");
    check(t.pins.rows * t.pins.cols >= 1, p + ".pins", "at least one pin required");
    check(t.pins.pitch_mm > 0, p + ".pins.pitch_mm", "must be positive");
    const Rect board{0, 0, t.width_mm, t.height_mm};
    for (std::size_t j = 0; j < t.component_layout.size(); ++j)
      check(board.contains(t.component_layout[j].rect_mm),
            p + ".layout[" + std::to_string(j) + "].rect_mm", "must lie within the board");
  }

  for (const auto& [id, prof] : c.electrical_profiles) {
    check(prof.voltage_v > 0, "electrical_profiles." + id + ".voltage_v", "must be positive");
    check(!prof.states.empty(), "electrical_profiles." + id + ".states", "no states declared");
    for (const auto& [st, draw] : prof.states) {
      const std::string p = "electrical_profiles." + id + ".states." + std::string(to_string(st));
      check(!draw.current_levels_a.empty(), p + ".current_a", "at least one level required");
      for (double l : draw.current_levels_a) check(l >= 0, p + ".current_a", "must be non-negative");
      check(draw.current_sd_a >= 0, p + ".sd_a", "must be non-negative");
    }
  }

  std::set<std::string> serials;
  std::set<std::size_t> used_slots;
  for (std::size_t i = 0; i < c.inventory.size(); ++i) {
    const auto& b = c.inventory[i];
    const std::string p = "inventory[" + std::to_string(i) + "]";
    check(serials.insert(b.serial).second, p + ".serial", "duplicate serial '" + b.serial + "'");
    check(c.find_board_type(b.board_type) != nullptr, p + ".board_type",
          "unknown board type '" + b.board_type + "'");
    if (b.tray_slot) {
      check(*b.tray_slot < c.tray_slots.size(), p + ".tray_slot", "no such tray slot");
      check(used_slots.insert(*b.tray_slot).second, p + ".tray_slot", "tray slot already occupied");
    }
  }
}

CellConfig cell_config_from_yaml(const YAML::Node& root) {
  if (!root.IsMap()) throw ParseError("cell config: top level must be a mapping");
  CellConfig c;
  c.rng_seed = required<std::uint64_t>(root, "rng_seed", "");

  if (const YAML::Node ws = root["workspace"]) {
    if (ws["min_mm"]) c.workspace.min_mm = yaml::vec3(ws["min_mm"], "workspace.min_mm");
    if (ws["max_mm"]) c.workspace.max_mm = yaml::vec3(ws["max_mm"], "workspace.max_mm");
  }
  if (const YAML::Node g = root["gripper"]) {
    c.gripper.max_span_mm = optional<double>(g, "max_span_mm", "gripper", c.gripper.max_span_mm);
    c.gripper.probe_resolution_mm =
        optional<double>(g, "probe_resolution_mm", "gripper", c.gripper.probe_resolution_mm);
  }

  const YAML::Node trays = root["tray_slots"];
  if (!trays || !trays.IsSequence())
    throw ValidationError("tray_slots", "required sequence missing");
  for (std::size_t i = 0; i < trays.size(); ++i) {
    const std::string p = "tray_slots[" + std::to_string(i) + "]";
    if (!trays[i]["position_mm"]) throw ValidationError(p + ".position_mm", "required field missing");
    c.tray_slots.push_back({yaml::vec2(trays[i]["position_mm"], p + ".position_mm")});
  }

  const YAML::Node bp = root["backplane"];
  if (!bp || !bp.IsMap()) throw ValidationError("backplane", "required section missing");
  c.backplane.clearance_mm = required<double>(bp, "clearance_mm", "backplane");
  c.backplane.lip_mm = required<double>(bp, "lip_mm", "backplane");
  c.backplane.casing_top_mm = optional<double>(bp, "casing_top_mm", "backplane", 3.0);
  const YAML::Node slots = bp["slots"];
  if (!slots || !slots.IsSequence())
    throw ValidationError("backplane.slots", "required sequence missing");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string p = "backplane.slots[" + std::to_string(i) + "]";
    if (!slots[i]["nominal_pose_mm"])
      throw ValidationError(p + ".nominal_pose_mm", "required field missing");
    c.backplane.slots.push_back({yaml::vec3(slots[i]["nominal_pose_mm"], p + ".nominal_pose_mm")});
  }

  const YAML::Node profiles = root["electrical_profiles"];
  if (profiles) {
    if (!profiles.IsSequence()) throw ParseError("electrical_profiles: expected a sequence");
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      auto prof = parse_profile(profiles[i], "electrical_profiles[" + std::to_string(i) + "]");
      const std::string id = prof.id;
      c.electrical_profiles[id] = std::move(prof);
    }
  }

  const YAML::Node types = root["board_types"];
  if (!types || !types.IsSequence())
    throw ValidationError("board_types", "required sequence missing");
  for (std::size_t i = 0; i < types.size(); ++i)
    c.board_types.push_back(parse_board_type(types[i], "board_types[" + std::to_string(i) + "]"));

  if (const YAML::Node inv = root["inventory"]) {
    if (!inv.IsSequence()) throw ParseError("inventory: expected a sequence");
    for (std::size_t i = 0; i < inv.size(); ++i)
      c.inventory.push_back(parse_board(inv[i], "inventory[" + std::to_string(i) + "]"));
  }

  validate(c);
  return c;
}

CellConfig parse_cell_config(std::string_view yaml_text) {
  return cell_config_from_yaml(yaml::parse_text(yaml_text));
}

CellConfig load_cell_config(const std::filesystem::path& path) {
  return cell_config_from_yaml(yaml::parse_file(path.string()));
}

}  // namespace orbitforge::cell
