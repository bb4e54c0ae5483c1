#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/electrical/board_test.hpp"
#include "orbitforge/insertion/insertion.hpp"
#include "orbitforge/optical/contours.hpp"
#include "orbitforge/optical/oracle.hpp"
#include "orbitforge/planner/plan.hpp"
#include "orbitforge/qpolicy/qtable.hpp"
#include "orbitforge/teleop/session.hpp"

namespace orbitforge::twin {

/// Simulated seconds charged per production step.
struct StepDurations {
  double probe_s = 4.0;
  double grip_s = 3.0;
  double flip_s = 6.0;
  double optical_s = 8.0;
  double insertion_attempt_s = 12.0;
  double seat_s = 3.0;
  double remove_s = 15.0;
  double reinsert_s = 20.0;
  double board_estimate_s = 120.0;  // per planned action, for deadline checks
};

struct InsertionSettings {
  double approach_mm = 1.0;
  double test_depth_mm = 0.5;
  double noise_sd_mm = 0.01;
  insertion::InsertionParams params;
  insertion::ContactModel contact;
};

struct QPolicySettings {
  int side = 5;
  double step_mm = 0.25;
  qpolicy::Hyperparams hyper;
  std::size_t pretrain_episodes = 200;
};

struct OpticalSettings {
  double match_threshold = 0.8;
  std::size_t stage1_tile_px = 32;
  double stage1_threshold = 1e-3;
  optical::ClassThresholds thresholds;
  std::size_t min_defect_area_px = 4;
  optical::OracleParams oracle;
  double pin_noise_sd_mm = 0.005;
};

struct TwinConfig {
  std::filesystem::path cell_path;
  std::string cell_sha256;
  cell::CellConfig cell;
  planner::ConstraintSet constraints;
  StepDurations durations;
  int retry_cap = 3;
  InsertionSettings insertion;
  QPolicySettings qpolicy;
  OpticalSettings optical;
  electrical::TestParams electrical;
  teleop::SessionParams teleop;
  std::optional<std::uint64_t> seed;

  /// Throws ValidationError naming the offending field.
  void validate() const;
  insertion::Geometry geometry() const;
};

/// Everything except the cell file path is echoed into the log header.
nlohmann::json to_json(const TwinConfig& c);

/// `base_dir` resolves the relative cell path.
TwinConfig twin_config_from_yaml(const YAML::Node& root, const std::filesystem::path& base_dir);
TwinConfig load_twin_config(const std::filesystem::path& path);

struct Order {
  std::string id;
  planner::GoalSpec goal;
  double deadline_s = 0.0;
  /// Explicit slot assignment requested by the customer; generated when empty.
  std::optional<planner::AssemblyState> layout;
};

nlohmann::json to_json(const Order& o);
/// Throws ValidationError for an empty requirement set, an empty alternative
/// list, a digit outside 1..9 or a duplicate id.
std::vector<Order> orders_from_yaml(const YAML::Node& root, const std::string& path);
std::vector<Order> load_orders(const std::filesystem::path& path);

std::vector<cell::FaultSpec> load_faults(const std::filesystem::path& path);

struct OperatorScript {
  std::optional<std::string> serial;  // unbound scripts serve any session
  std::vector<teleop::TimedCommand> commands;
};

std::vector<OperatorScript> operator_scripts_from_yaml(const YAML::Node& root,
                                                       const std::string& path);
std::vector<OperatorScript> load_operator_scripts(const std::filesystem::path& path);

/// Scalars become numbers or booleans where they parse as such.
nlohmann::json yaml_to_json(const YAML::Node& node);

}  // namespace orbitforge::twin
