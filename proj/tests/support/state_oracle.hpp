#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "orbitforge/planner/plan.hpp"

namespace oracle {

// Independent filter over every digit string: spans, stock, thermal pairs.
inline bool valid_digits(const std::vector<int>& s, const std::vector<orbitforge::planner::ModuleType>& types,
                  const orbitforge::planner::ConstraintSet& cs) {
  auto type_of = [&](int d) -> const orbitforge::planner::ModuleType* {
    for (const auto& t : types)
      if (t.digit == d) return &t;
    return nullptr;
  };
  struct G {
    std::size_t start, end;
    int digit;
  };
  std::vector<G> groups;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == 0) {
      ++i;
      continue;
    }
    const orbitforge::planner::ModuleType* t = type_of(s[i]);
    if (!t) return false;
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::size_t run = j - i;
    if (run % static_cast<std::size_t>(t->span) != 0) return false;
    for (std::size_t k = i; k < j; k += t->span) groups.push_back({k, k + t->span, s[i]});
    i = j;
  }
  std::map<int, int> count;
  for (const auto& g : groups) ++count[g.digit];
  for (const auto& [d, c] : count)
    if (type_of(d)->max_count && c > *type_of(d)->max_count) return false;
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    if (groups[g].end != groups[g + 1].start) continue;
    const auto& a = type_of(groups[g].digit)->thermal_tag;
    const auto& b = type_of(groups[g + 1].digit)->thermal_tag;
    if (a.empty() || b.empty()) continue;
    for (const auto& [x, y] : cs.forbidden_adjacent)
      if ((x == a && y == b) || (x == b && y == a)) return false;
  }
  return true;
}

inline std::size_t count_states(std::size_t n, const std::vector<orbitforge::planner::ModuleType>& types,
                         const orbitforge::planner::ConstraintSet& cs) {
  int maxd = 0;
  for (const auto& t : types) maxd = std::max(maxd, t.digit);
  std::vector<int> s(n, 0);
  std::size_t count = 0;
  while (true) {
    bool ok = true;
    for (int d : s) ok = ok && (d == 0 || std::any_of(types.begin(), types.end(),
                                                      [d](const orbitforge::planner::ModuleType& t) { return t.digit == d; }));
    if (ok && valid_digits(s, types, cs)) ++count;
    std::size_t k = 0;
    while (k < n && s[k] == maxd) s[k++] = 0;
    if (k == n) break;
    ++s[k];
  }
  return count;
}

}  // namespace oracle
