#pragma once

#include <string_view>
#include <variant>

#include "json.hpp"

namespace orbitforge::teleop {

/// Length of one nudge step along each axis.
inline constexpr double kNudgeStepM = 5e-5;
inline constexpr int kMaxNudgeSteps = 40;

struct Nudge {
  int dx = 0, dy = 0, dz = 0;  // steps
};
struct RotateSnap {
  int quarter_turns = 1;  // about the tool z axis, -3..3
};
struct Grip {};
struct Release {};
struct ConfirmInsert {};
struct Abort {};

using OperatorCommand = std::variant<Nudge, RotateSnap, Grip, Release, ConfirmInsert, Abort>;

/// "nudge", "rotate_snap", "grip", "release", "confirm_insert", "abort".
std::string_view command_type(const OperatorCommand& c);

/// {"type": ..., plus "dx"/"dy"/"dz" or "quarter_turns"}.
nlohmann::json to_json(const OperatorCommand& c);

/// Throws ParseError on unknown types, missing or non-integer fields, extra
/// fields, or step counts outside ±kMaxNudgeSteps.
OperatorCommand command_from_json(const nlohmann::json& j);

}  // namespace orbitforge::teleop
