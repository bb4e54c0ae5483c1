#include "orbitforge/teleop/commands.hpp"

#include <set>
#include <string>

#include "orbitforge/common/error.hpp"

namespace orbitforge::teleop {

namespace {

struct TypeName {
  std::string_view operator()(const Nudge&) const { return "nudge"; }
  std::string_view operator()(const RotateSnap&) const { return "rotate_snap"; }
  std::string_view operator()(const Grip&) const { return "grip"; }
  std::string_view operator()(const Release&) const { return "release"; }
  std::string_view operator()(const ConfirmInsert&) const { return "confirm_insert"; }
  std::string_view operator()(const Abort&) const { return "abort"; }
};

int int_field(const nlohmann::json& j, const char* key, int lo, int hi) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (!v.is_number_integer())
    throw ParseError(std::string("operator command field ") + key + " must be an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi)
    throw ParseError(std::string("operator command field ") + key + " out of range");
  return static_cast<int>(x);
}

void only_fields(const nlohmann::json& j, std::set<std::string> allowed) {
  allowed.insert("type");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ParseError("unexpected operator command field " + k);
}

}  // namespace

std::string_view command_type(const OperatorCommand& c) { return std::visit(TypeName{}, c); }

nlohmann::json to_json(const OperatorCommand& c) {
  nlohmann::json j = {{"type", std::string(command_type(c))}};
  if (const auto* n = std::get_if<Nudge>(&c)) {
    j["dx"] = n->dx;
    j["dy"] = n->dy;
    j["dz"] = n->dz;
  } else if (const auto* r = std::get_if<RotateSnap>(&c)) {
    j["quarter_turns"] = r->quarter_turns;
  }
  return j;
}

OperatorCommand command_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw ParseError("operator command needs a string \"type\"");
  const std::string type = j.at("type").get<std::string>();
  if (type == "nudge") {
    only_fields(j, {"dx", "dy", "dz"});
    Nudge n{int_field(j, "dx", -kMaxNudgeSteps, kMaxNudgeSteps),
            int_field(j, "dy", -kMaxNudgeSteps, kMaxNudgeSteps),
            int_field(j, "dz", -kMaxNudgeSteps, kMaxNudgeSteps)};
    return n;
  }
  if (type == "rotate_snap") {
    only_fields(j, {"quarter_turns"});
    if (!j.contains("quarter_turns")) throw ParseError("rotate_snap needs quarter_turns");
    const int q = int_field(j, "quarter_turns", -3, 3);
    if (q == 0) throw ParseError("rotate_snap quarter_turns must be nonzero");
    return RotateSnap{q};
  }
  only_fields(j, {});
  if (type == "grip") return Grip{};
  if (type == "release") return Release{};
  if (type == "confirm_insert") return ConfirmInsert{};
  if (type == "abort") return Abort{};
  throw ParseError("unknown operator command type " + type);
}

}  // namespace orbitforge::teleop
