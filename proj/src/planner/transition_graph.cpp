#include "orbitforge/planner/transition_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace orbitforge::planner {

std::string Action::to_string() const {
  if (kind == ActionKind::Insert)
    return "insert " + std::to_string(module) + " @" + std::to_string(slot + 1);
  return "remove @" + std::to_string(slot + 1);
}

std::size_t TransitionGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += e.size();
  return n;
}

std::optional<std::size_t> TransitionGraph::find(const AssemblyState& state) const {
  const auto it = index_.find(state.key());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::optional<AssemblyState> try_insert(const AssemblyState& s, std::size_t slot,
                                        const ModuleType& type, const ModuleCatalog& catalog,
                                        const ConstraintSet& constraints) {
  const auto span = static_cast<std::size_t>(type.span);
  if (slot + span > s.size()) return std::nullopt;
  for (std::size_t k = 0; k < span; ++k)
    if (!s.empty_at(slot + k)) return std::nullopt;
  AssemblyState next = s;
  for (std::size_t k = 0; k < span; ++k) next.set(slot + k, type.digit);
  // A span module placed next to an equal-digit run would be read back as a
  // different grouping; reject to keep the encoding unambiguous.
  const auto groups = groups_of(next, catalog);
  if (!groups) return std::nullopt;
  bool found = false;
  for (const auto& g : *groups) found = found || (g.start == slot && g.digit == type.digit);
  if (!found) return std::nullopt;
  if (!satisfies_constraints(next, catalog, constraints)) return std::nullopt;
  return next;
}

std::optional<AssemblyState> try_remove(const AssemblyState& s, std::size_t slot,
                                        const ModuleCatalog& catalog) {
  const auto groups = groups_of(s, catalog);
  if (!groups) return std::nullopt;
  for (const auto& g : *groups) {
    if (g.start != slot) continue;
    AssemblyState next = s;
    for (int k = 0; k < g.span; ++k) next.set(slot + static_cast<std::size_t>(k), 0);
    return next;
  }
  return std::nullopt;
}

std::vector<std::pair<Action, AssemblyState>> successors(const AssemblyState& s,
                                                         const ModuleCatalog& catalog,
                                                         const ConstraintSet& constraints) {
  std::vector<std::pair<Action, AssemblyState>> out;
  for (std::size_t slot = 0; slot < s.size(); ++slot)
    for (const auto& type : catalog.types())
      if (auto next = try_insert(s, slot, type, catalog, constraints))
        out.emplace_back(Action{ActionKind::Insert, slot, type.digit}, std::move(*next));
  for (std::size_t slot = 0; slot < s.size(); ++slot)
    if (auto next = try_remove(s, slot, catalog))
      out.emplace_back(Action{ActionKind::Remove, slot, s.digit(slot)}, std::move(*next));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace

std::optional<AssemblyState> apply_action(const TransitionGraph& graph,
                                          const AssemblyState& state, const Action& action) {
  if (action.kind == ActionKind::Insert) {
    const ModuleType* t = graph.catalog().find(action.module);
    if (t == nullptr) return std::nullopt;
    return try_insert(state, action.slot, *t, graph.catalog(), graph.constraints());
  }
  return try_remove(state, action.slot, graph.catalog());
}

TransitionGraph enumerate_states(std::size_t slots, std::span<const ModuleType> module_types,
                                 const ConstraintSet& constraints) {
  TransitionGraph g;
  g.slot_count_ = slots;
  g.catalog_ = ModuleCatalog(module_types);
  g.constraints_ = constraints;

  const double projected =
      std::pow(static_cast<double>(module_types.size() + 1), static_cast<double>(slots));
  if (projected > static_cast<double>(constraints.state_cap))
    throw StateExplosion("projected " + std::to_string(projected) + " states for " +
                         std::to_string(slots) + " slots exceeds cap " +
                         std::to_string(constraints.state_cap));

  const AssemblyState empty(slots);
  g.nodes_.push_back(empty);
  g.layers_.push_back(0);
  g.index_.emplace(empty.key(), 0);

  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    const AssemblyState state = g.nodes_[cur];
    const std::size_t layer = g.layers_[cur];
    std::vector<Edge> out;
    for (auto& [action, next] : successors(state, g.catalog_, g.constraints_)) {
      auto [it, inserted] = g.index_.try_emplace(next.key(), g.nodes_.size());
      if (inserted) {
        if (g.nodes_.size() >= constraints.state_cap)
          throw StateExplosion("state cap " + std::to_string(constraints.state_cap) + " reached");
        g.nodes_.push_back(std::move(next));
        g.layers_.push_back(layer + 1);
        queue.push_back(it->second);
      }
      out.push_back({action, it->second});
    }
    if (g.edges_.size() <= cur) g.edges_.resize(cur + 1);
    g.edges_[cur] = std::move(out);
  }
  g.edges_.resize(g.nodes_.size());
  return g;
}

}  // namespace orbitforge::planner
