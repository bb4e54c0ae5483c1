#include "orbitforge/planner/export.hpp"

#include <sstream>

namespace orbitforge::planner {

std::string to_dot(const TransitionGraph& graph) {
  const ModuleCatalog& catalog = graph.catalog();
  std::ostringstream out;
  out << "digraph assembly {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n";
  for (std::size_t i = 0; i < graph.node_count(); ++i)
    out << "  n" << i << " [label=\"" << graph.node(i).canonical(catalog) << "\", rank="
        << graph.layer(i) << "];\n";
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (const Edge& e : graph.edges(i)) {
      out << "  n" << i << " -> n" << e.target << " [label=\"" << e.action.to_string() << "\"";
      if (e.action.kind == ActionKind::Remove) out << ", style=dashed";
      out << "];\n";
    }
  }
  out << "}\n";
  return out.str();
}

nlohmann::json action_to_json(const Action& a) {
  return {{"kind", a.kind == ActionKind::Insert ? "insert" : "remove"},
          {"slot", a.slot + 1},
          {"module", a.module}};
}

Action action_from_json(const nlohmann::json& j) {
  Action a;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "insert") {
    a.kind = ActionKind::Insert;
  } else if (kind == "remove") {
    a.kind = ActionKind::Remove;
  } else {
    throw ParseError("plan action: unknown kind '" + kind + "'");
  }
  const auto slot = j.at("slot").get<std::size_t>();
  if (slot == 0) throw ParseError("plan action: slots are one-based");
  a.slot = slot - 1;
  a.module = j.at("module").get<int>();
  return a;
}

nlohmann::json plan_to_json(const PlanSequence& plan, const ModuleCatalog& catalog) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : plan.actions) actions.push_back(action_to_json(a));
  return {{"start", plan.start.canonical(catalog)},
          {"goal", plan.goal.canonical(catalog)},
          {"length", plan.actions.size()},
          {"actions", std::move(actions)}};
}

PlanSequence plan_from_json(const nlohmann::json& j) {
  PlanSequence p;
  try {
    p.start = AssemblyState::parse(j.at("start").get<std::string>());
    p.goal = AssemblyState::parse(j.at("goal").get<std::string>());
    for (const auto& a : j.at("actions")) p.actions.push_back(action_from_json(a));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
  return p;
}

}  // namespace orbitforge::planner
