#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "orbitforge/planner/transition_graph.hpp"

namespace orbitforge::planner {

struct PlanSequence {
  AssemblyState start;
  AssemblyState goal;
  std::vector<Action> actions;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
};

/// One functional slot of a mission: satisfied by any of the listed types.
struct Requirement {
  std::vector<int> alternatives;
};

struct GoalSpec {
  std::vector<Requirement> requirements;
};

/// True iff the mounted modules match the requirements one-to-one.
bool satisfies_goal(const AssemblyState& state, const GoalSpec& goal,
                    const ModuleCatalog& catalog);

struct ReplanOptions {
  std::set<int> banned_types;
  /// First slots of mounted modules that must come out (defective serials).
  std::vector<std::size_t> must_remove;
  /// Unmounted, usable boards per digit. Digits absent from the map have no
  /// spares; leave the whole map empty for unlimited stock.
  std::optional<std::map<int, int>> spares;
};

/// Shortest action sequence between two graph nodes; ties resolved towards
/// the lexicographically smallest action sequence. Throws Unreachable.
PlanSequence plan_sequence(const TransitionGraph& graph, const AssemblyState& start,
                           const AssemblyState& goal);

/// Shortest sequence from `current` to any state satisfying `goal` that uses
/// no banned module, clears every `must_remove` slot and respects stock.
/// Throws Unreachable.
PlanSequence replan(const TransitionGraph& graph, const AssemblyState& current,
                    const GoalSpec& goal, const ReplanOptions& options = {});

/// Symbolic execution; throws Error when an action is not applicable.
AssemblyState execute(const TransitionGraph& graph, const AssemblyState& start,
                      const std::vector<Action>& actions);

}  // namespace orbitforge::planner
