#include "orbitforge/planner/plan.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>

namespace orbitforge::planner {

namespace {

// Kuhn's augmenting-path matching of requirements onto mounted modules.
bool augment(std::size_t req, const GoalSpec& goal, const std::vector<Group>& groups,
             std::vector<int>& group_owner, std::vector<bool>& seen) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (seen[g]) continue;
    const auto& alts = goal.requirements[req].alternatives;
    if (std::find(alts.begin(), alts.end(), groups[g].digit) == alts.end()) continue;
    seen[g] = true;
    if (group_owner[g] < 0 ||
        augment(static_cast<std::size_t>(group_owner[g]), goal, groups, group_owner, seen)) {
      group_owner[g] = static_cast<int>(req);
      return true;
    }
  }
  return false;
}

struct SearchNode {
  std::size_t node;
  std::uint64_t pending;  // bit i set: must_remove[i] still mounted
};

// Breadth-first search with actions expanded in sorted order. The first goal
// node dequeued is reached by the lexicographically smallest shortest path.
PlanSequence search(const TransitionGraph& graph, std::size_t start, std::uint64_t start_mask,
                    const std::vector<std::size_t>& must_remove,
                    const std::function<bool(const Action&, std::size_t, std::uint64_t)>& allowed,
                    const std::function<bool(std::size_t, std::uint64_t)>& is_goal) {
  struct Parent {
    std::size_t from;
    Action action;
  };
  using Key = std::pair<std::size_t, std::uint64_t>;
  std::map<Key, std::size_t> key_index{{{start, start_mask}, 0}};
  std::vector<Key> keys{{start, start_mask}};
  std::vector<std::optional<Parent>> parents{std::nullopt};
  std::deque<SearchNode> queue{{start, start_mask}};

  std::optional<std::size_t> found;
  while (!queue.empty()) {
    const SearchNode cur = queue.front();
    queue.pop_front();
    const std::size_t cur_idx = key_index.at({cur.node, cur.pending});
    if (is_goal(cur.node, cur.pending)) {
      found = cur_idx;
      break;
    }
    for (const Edge& e : graph.edges(cur.node)) {
      std::uint64_t mask = cur.pending;
      if (e.action.kind == ActionKind::Remove) {
        for (std::size_t i = 0; i < must_remove.size(); ++i)
          if (must_remove[i] == e.action.slot) mask &= ~(std::uint64_t{1} << i);
      }
      if (!allowed(e.action, e.target, mask)) continue;
      const auto key = std::make_pair(e.target, mask);
      if (key_index.count(key)) continue;
      key_index.emplace(key, keys.size());
      keys.push_back(key);
      parents.push_back(Parent{cur_idx, e.action});
      queue.push_back({e.target, mask});
    }
  }
  if (!found) throw Unreachable("no action sequence reaches a goal state");

  PlanSequence plan;
  plan.start = graph.node(start);
  plan.goal = graph.node(keys[*found].first);
  for (std::size_t i = *found; parents[i]; i = parents[i]->from)
    plan.actions.push_back(parents[i]->action);
  std::reverse(plan.actions.begin(), plan.actions.end());
  return plan;
}

std::size_t require_node(const TransitionGraph& graph, const AssemblyState& s,
                         const char* role) {
  const auto idx = graph.find(s);
  if (!idx)
    throw ValidationError(role, "state '" + s.to_string() + "' is not a node of the graph");
  return *idx;
}

}  // namespace

bool satisfies_goal(const AssemblyState& state, const GoalSpec& goal,
                    const ModuleCatalog& catalog) {
  const auto groups = groups_of(state, catalog);
  if (!groups || groups->size() != goal.requirements.size()) return false;
  std::vector<int> owner(groups->size(), -1);
  for (std::size_t r = 0; r < goal.requirements.size(); ++r) {
    std::vector<bool> seen(groups->size(), false);
    if (!augment(r, goal, *groups, owner, seen)) return false;
  }
  return true;
}

PlanSequence plan_sequence(const TransitionGraph& graph, const AssemblyState& start,
                           const AssemblyState& goal) {
  const std::size_t s = require_node(graph, start, "start");
  const std::size_t g = require_node(graph, goal, "goal");
  return search(
      graph, s, 0, {}, [](const Action&, std::size_t, std::uint64_t) { return true; },
      [g](std::size_t node, std::uint64_t) { return node == g; });
}

PlanSequence replan(const TransitionGraph& graph, const AssemblyState& current,
                    const GoalSpec& goal, const ReplanOptions& options) {
  const std::size_t s = require_node(graph, current, "current");
  const ModuleCatalog& catalog = graph.catalog();
  if (options.must_remove.size() > 64)
    throw ValidationError("must_remove", "at most 64 slots can be scheduled for removal");

  const auto current_groups = groups_of(current, catalog).value_or(std::vector<Group>{});
  std::uint64_t start_mask = 0;
  std::vector<int> bit_digit(options.must_remove.size(), 0);
  for (std::size_t i = 0; i < options.must_remove.size(); ++i) {
    const auto it = std::find_if(current_groups.begin(), current_groups.end(), [&](const Group& g) {
      return g.start == options.must_remove[i];
    });
    if (it == current_groups.end())
      throw ValidationError("must_remove", "slot " + std::to_string(options.must_remove[i] + 1) +
                                               " holds no module");
    start_mask |= std::uint64_t{1} << i;
    bit_digit[i] = it->digit;
  }

  // Boards that are mounted and sound can be taken out and reused, so a
  // state is feasible iff its per-type count fits mounted-good + spares,
  // plus any doomed board that is still physically in place.
  std::map<int, int> usable;
  if (options.spares) {
    usable = *options.spares;
    for (const auto& g : current_groups) ++usable[g.digit];
    for (int d : bit_digit) --usable[d];
  }

  auto allowed = [&](const Action& a, std::size_t target, std::uint64_t mask) {
    if (a.kind == ActionKind::Insert && options.banned_types.count(a.module)) return false;
    if (!options.spares) return true;
    std::map<int, int> budget = usable;
    for (std::size_t i = 0; i < bit_digit.size(); ++i)
      if (mask & (std::uint64_t{1} << i)) ++budget[bit_digit[i]];
    for (const auto& [digit, count] : module_counts(graph.node(target), catalog)) {
      const auto it = budget.find(digit);
      if (count > (it == budget.end() ? 0 : it->second)) return false;
    }
    return true;
  };

  auto is_goal = [&](std::size_t node, std::uint64_t mask) {
    if (mask != 0) return false;
    const AssemblyState& st = graph.node(node);
    for (std::size_t i = 0; i < st.size(); ++i)
      if (options.banned_types.count(st.digit(i))) return false;
    return satisfies_goal(st, goal, catalog);
  };

  return search(graph, s, start_mask, options.must_remove, allowed, is_goal);
}

AssemblyState execute(const TransitionGraph& graph, const AssemblyState& start,
                      const std::vector<Action>& actions) {
  AssemblyState cur = start;
  for (const auto& a : actions) {
    auto next = apply_action(graph, cur, a);
    if (!next)
      throw Error("action '" + a.to_string() + "' not applicable to state " + cur.to_string());
    cur = std::move(*next);
  }
  return cur;
}

}  // namespace orbitforge::planner
