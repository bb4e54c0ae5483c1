#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "orbitforge/planner/assembly_state.hpp"

namespace orbitforge::planner {

class StateExplosion : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

/// Removals sort first so equal-length plans clear slots before filling them.
enum class ActionKind : int { Remove = 0, Insert = 1 };

/// Slots are zero-based internally and one-based in text.
struct Action {
  ActionKind kind = ActionKind::Insert;
  std::size_t slot = 0;
  int module = 0;

  std::string to_string() const;

  friend auto operator<=>(const Action&, const Action&) = default;
  friend bool operator==(const Action&, const Action&) = default;
};

struct Edge {
  Action action;
  std::size_t target = 0;
};

/// Closure of the empty state under every feasible insert and remove.
/// Nodes are stored in BFS discovery order; edges are sorted by action.
class TransitionGraph {
 public:
  std::size_t slot_count() const { return slot_count_; }
  const ModuleCatalog& catalog() const { return catalog_; }
  const ConstraintSet& constraints() const { return constraints_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const;
  const AssemblyState& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t layer(std::size_t i) const { return layers_.at(i); }
  std::span<const Edge> edges(std::size_t i) const { return edges_.at(i); }
  std::optional<std::size_t> find(const AssemblyState& state) const;

 private:
  friend TransitionGraph enumerate_states(std::size_t, std::span<const ModuleType>,
                                          const ConstraintSet&);

  std::size_t slot_count_ = 0;
  ModuleCatalog catalog_;
  ConstraintSet constraints_;
  std::vector<AssemblyState> nodes_;
  std::vector<std::size_t> layers_;
  std::vector<std::vector<Edge>> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Breadth-first enumeration of all assembly states reachable from the empty
/// backplane. Throws StateExplosion when the digit-string bound (m+1)^n or the
/// discovered node count exceeds `constraints.state_cap`.
TransitionGraph enumerate_states(std::size_t slots, std::span<const ModuleType> module_types,
                                 const ConstraintSet& constraints);

/// Applies one action; nullopt if it is not an edge of the graph's rules.
std::optional<AssemblyState> apply_action(const TransitionGraph& graph,
                                          const AssemblyState& state, const Action& action);

}  // namespace orbitforge::planner
