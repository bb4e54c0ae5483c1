#pragma once

#include "json.hpp"
#include <string>

#include "orbitforge/planner/plan.hpp"

namespace orbitforge::planner {

/// Graphviz rendering. Remove edges are dashed.
std::string to_dot(const TransitionGraph& graph);

nlohmann::json plan_to_json(const PlanSequence& plan, const ModuleCatalog& catalog);
PlanSequence plan_from_json(const nlohmann::json& j);

nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

}  // namespace orbitforge::planner
