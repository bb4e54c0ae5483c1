#include "orbitforge/cell/board.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <utility>

#include "orbitforge/common/error.hpp"

namespace orbitforge::cell {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view s) {
  for (const auto& [value, name] : table)
    if (name == s) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
  for (const auto& [value, name] : table)
    if (value == v) return name;
  return "?";
}

constexpr std::array<std::pair<SurfaceClass, std::string_view>, 5> kSurfaceNames{{
    {SurfaceClass::Component, "component"},
    {SurfaceClass::Solderpad, "solderpad"},
    {SurfaceClass::Solderbridge, "solderbridge"},
    {SurfaceClass::Solderball, "solderball"},
    {SurfaceClass::Tombstone, "tombstone"},
}};

constexpr std::array<std::pair<SystemState, std::string_view>, 5> kStateNames{{
    {SystemState::Deactivated, "Deactivated"},
    {SystemState::Idle, "Idle"},
    {SystemState::ComputationActive, "ComputationActive"},
    {SystemState::RadioModuleActive, "RadioModuleActive"},
    {SystemState::Transmitting, "Transmitting"},
}};

constexpr std::array<std::pair<FaultKind, std::string_view>, 9> kFaultNames{{
    {FaultKind::Solderball, "solderball"},
    {FaultKind::Tombstone, "tombstone"},
    {FaultKind::Solderbridge, "solderbridge"},
    {FaultKind::MissingPin, "missing_pin"},
    {FaultKind::BentPin, "bent_pin"},
    {FaultKind::ElectricalDrift, "electrical_drift"},
    {FaultKind::MisalignmentBias, "misalignment_bias"},
    {FaultKind::ConnectorFault, "connector_fault"},
    {FaultKind::DeadBoard, "dead_board"},
}};

}  // namespace

Orientation orientation_from_degrees(int deg) {
  if (deg % 90 != 0 || deg < 0 || deg >= 360)
    throw ValidationError("orientation", "must be one of 0, 90, 180, 270 (got " +
                                             std::to_string(deg) + ")");
  return static_cast<Orientation>(deg / 90);
}

std::string_view to_string(SurfaceClass c) { return name_of(kSurfaceNames, c); }
std::optional<SurfaceClass> surface_class_from_string(std::string_view s) {
  return lookup(kSurfaceNames, s);
}

std::string_view to_string(SystemState s) { return name_of(kStateNames, s); }
std::optional<SystemState> system_state_from_string(std::string_view s) {
  return lookup(kStateNames, s);
}

std::string_view to_string(FaultKind k) { return name_of(kFaultNames, k); }
std::optional<FaultKind> fault_kind_from_string(std::string_view s) {
  return lookup(kFaultNames, s);
}

std::string_view to_string(BoardHealth h) {
  switch (h) {
    case BoardHealth::Unknown: return "Unknown";
    case BoardHealth::Passed: return "Passed";
    case BoardHealth::Discarded: return "Discarded";
  }
  return "?";
}

bool BoardInstance::has_fault(FaultKind k) const {
  return std::any_of(injected_faults.begin(), injected_faults.end(),
                     [k](const FaultSpec& f) { return f.kind == k; });
}

}  // namespace orbitforge::cell
