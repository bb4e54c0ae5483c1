#include "orbitforge/planner/assembly_state.hpp"

#include <algorithm>
#include <charconv>

namespace orbitforge::planner {

ModuleCatalog::ModuleCatalog(std::span<const ModuleType> types)
    : types_(types.begin(), types.end()) {
  std::sort(types_.begin(), types_.end(),
            [](const ModuleType& a, const ModuleType& b) { return a.digit < b.digit; });
  for (std::size_t i = 0; i < types_.size(); ++i) {
    const auto& t = types_[i];
    if (t.digit < 1 || t.digit > 9)
      throw ValidationError("module_types", "digit must be in 1..9");
    if (t.span < 1) throw ValidationError("module_types", "span must be at least 1");
    if (i > 0 && types_[i - 1].digit == t.digit)
      throw ValidationError("module_types", "duplicate digit " + std::to_string(t.digit));
  }
}

const ModuleType* ModuleCatalog::find(int digit) const {
  const auto it = std::lower_bound(types_.begin(), types_.end(), digit,
                                   [](const ModuleType& t, int d) { return t.digit < d; });
  return (it != types_.end() && it->digit == digit) ? &*it : nullptr;
}

const ModuleType& ModuleCatalog::at(int digit) const {
  if (const ModuleType* t = find(digit)) return *t;
  throw ValidationError("module_types", "unknown module digit " + std::to_string(digit));
}

bool ConstraintSet::forbids(std::string_view a, std::string_view b) const {
  if (a.empty() || b.empty()) return false;
  return std::any_of(forbidden_adjacent.begin(), forbidden_adjacent.end(), [&](const auto& p) {
    return (p.first == a && p.second == b) || (p.first == b && p.second == a);
  });
}

AssemblyState AssemblyState::parse(std::string_view text) {
  std::vector<std::uint8_t> digits;
  if (text.empty()) return AssemblyState(std::move(digits));
  std::size_t pos = 0;
  while (true) {
    const std::size_t dash = text.find('-', pos);
    std::string_view tok = text.substr(pos, dash == std::string_view::npos ? text.npos : dash - pos);
    const std::size_t caret = tok.find('^');
    std::string_view digit_part = tok.substr(0, caret);
    int d = -1;
    const auto [ptr, ec] = std::from_chars(digit_part.data(), digit_part.data() + digit_part.size(), d);
    if (ec != std::errc() || ptr != digit_part.data() + digit_part.size() || d < 0 || d > 9)
      throw ParseError("assembly state '" + std::string(text) + "': bad slot token '" +
                       std::string(tok) + "'");
    digits.push_back(static_cast<std::uint8_t>(d));
    if (dash == std::string_view::npos) break;
    pos = dash + 1;
  }
  return AssemblyState(std::move(digits));
}

std::size_t AssemblyState::occupied_slots() const {
  return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(),
                                                [](std::uint8_t d) { return d != 0; }));
}

std::string AssemblyState::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (i) out.push_back('-');
    out.push_back(static_cast<char>('0' + slots_[i]));
  }
  return out;
}

std::string AssemblyState::canonical(const ModuleCatalog& catalog) const {
  const auto groups = groups_of(*this, catalog);
  std::string out;
  std::size_t g = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (i) out.push_back('-');
    out.push_back(static_cast<char>('0' + slots_[i]));
    if (groups) {
      while (g < groups->size() && (*groups)[g].start < i) ++g;
      if (g < groups->size() && (*groups)[g].start == i && (*groups)[g].span > 1)
        out += "^" + std::to_string((*groups)[g].span);
    }
  }
  return out;
}

std::optional<std::vector<Group>> groups_of(const AssemblyState& state,
                                            const ModuleCatalog& catalog) {
  std::vector<Group> out;
  std::size_t i = 0;
  const std::size_t n = state.size();
  while (i < n) {
    const int d = state.digit(i);
    if (d == 0) {
      ++i;
      continue;
    }
    const ModuleType* t = catalog.find(d);
    if (t == nullptr) return std::nullopt;
    std::size_t run = 0;
    while (i + run < n && state.digit(i + run) == d) ++run;
    if (run % static_cast<std::size_t>(t->span) != 0) return std::nullopt;
    for (std::size_t s = 0; s < run; s += static_cast<std::size_t>(t->span))
      out.push_back({i + s, d, t->span});
    i += run;
  }
  return out;
}

bool satisfies_constraints(const AssemblyState& state, const ModuleCatalog& catalog,
                           const ConstraintSet& constraints) {
  const auto groups = groups_of(state, catalog);
  if (!groups) return false;
  std::map<int, int> counts;
  for (const auto& g : *groups) ++counts[g.digit];
  for (const auto& [digit, count] : counts) {
    const auto& limit = catalog.at(digit).max_count;
    if (limit && count > *limit) return false;
  }
  for (std::size_t k = 1; k < groups->size(); ++k) {
    const Group& a = (*groups)[k - 1];
    const Group& b = (*groups)[k];
    if (a.start + static_cast<std::size_t>(a.span) != b.start) continue;  // not adjacent
    if (constraints.forbids(catalog.at(a.digit).thermal_tag, catalog.at(b.digit).thermal_tag))
      return false;
  }
  return true;
}

std::map<int, int> module_counts(const AssemblyState& state, const ModuleCatalog& catalog) {
  std::map<int, int> counts;
  if (const auto groups = groups_of(state, catalog))
    for (const auto& g : *groups) ++counts[g.digit];
  return counts;
}

}  // namespace orbitforge::planner
