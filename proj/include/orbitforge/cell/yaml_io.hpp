#pragma once

#include <yaml-cpp/yaml.h>

#include <string>
#include <vector>

#include "orbitforge/cell/board.hpp"
#include "orbitforge/cell/cell_config.hpp"

namespace orbitforge::cell {

/// Builds and validates a config from an already-parsed document.
CellConfig cell_config_from_yaml(const YAML::Node& root);

FaultSpec parse_fault_spec(const YAML::Node& node, const std::string& path);

/// Accepts either a bare sequence or a mapping with a `faults:` sequence.
std::vector<FaultSpec> parse_fault_script(const YAML::Node& node, const std::string& path);

}  // namespace orbitforge::cell
