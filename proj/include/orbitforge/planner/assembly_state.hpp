#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "orbitforge/common/error.hpp"

namespace orbitforge::planner {

/// A kind of module that can occupy the backplane. `digit` is the number
/// written into the assembly state; multi-slot modules repeat it.
struct ModuleType {
  int digit = 1;
  int span = 1;
  std::string thermal_tag;
  std::optional<int> max_count;  // stock limit; unlimited when empty
};

/// Lookup by digit. Digits are 1..9.
class ModuleCatalog {
 public:
  ModuleCatalog() = default;
  explicit ModuleCatalog(std::span<const ModuleType> types);

  const ModuleType* find(int digit) const;
  const ModuleType& at(int digit) const;
  std::span<const ModuleType> types() const { return types_; }
  std::size_t size() const { return types_.size(); }

 private:
  std::vector<ModuleType> types_;  // sorted by digit
};

/// Pairs of thermal tags that must not sit in adjacent slots.
struct ConstraintSet {
  std::vector<std::pair<std::string, std::string>> forbidden_adjacent;
  std::size_t state_cap = 1'000'000;

  bool forbids(std::string_view a, std::string_view b) const;
};

/// One mounted module: its first slot, digit and slot count.
struct Group {
  std::size_t start = 0;
  int digit = 0;
  int span = 1;

  friend bool operator==(const Group&, const Group&) = default;
};

/// Occupancy of the backplane, one digit per slot (0 = empty). Display form
/// joins digits with '-', e.g. "2-0". The canonical form additionally marks
/// the first slot of each multi-slot module with "^span", e.g. "3^2-3-0".
class AssemblyState {
 public:
  AssemblyState() = default;
  explicit AssemblyState(std::size_t slots) : slots_(slots, 0) {}
  explicit AssemblyState(std::vector<std::uint8_t> digits) : slots_(std::move(digits)) {}

  /// Accepts the display or the canonical form. The empty string is the
  /// zero-slot state. Throws ParseError.
  static AssemblyState parse(std::string_view text);

  std::size_t size() const { return slots_.size(); }
  int digit(std::size_t slot) const { return slots_.at(slot); }
  bool empty_at(std::size_t slot) const { return slots_.at(slot) == 0; }
  std::span<const std::uint8_t> digits() const { return slots_; }
  std::size_t occupied_slots() const;

  void set(std::size_t slot, int digit) { slots_.at(slot) = static_cast<std::uint8_t>(digit); }

  std::string to_string() const;
  std::string canonical(const ModuleCatalog& catalog) const;
  /// Compact lookup key (digits only).
  std::string key() const { return std::string(slots_.begin(), slots_.end()); }

  friend auto operator<=>(const AssemblyState&, const AssemblyState&) = default;
  friend bool operator==(const AssemblyState&, const AssemblyState&) = default;

 private:
  std::vector<std::uint8_t> slots_;
};

/// Splits runs of equal digits into module groups using the catalog spans.
/// Returns nullopt when a run length is not a multiple of the span or a digit
/// is unknown.
std::optional<std::vector<Group>> groups_of(const AssemblyState& state,
                                            const ModuleCatalog& catalog);

/// Span layout, stock and thermal adjacency.
bool satisfies_constraints(const AssemblyState& state, const ModuleCatalog& catalog,
                           const ConstraintSet& constraints);

/// Module counts per digit (each multi-slot group counted once).
std::map<int, int> module_counts(const AssemblyState& state, const ModuleCatalog& catalog);

}  // namespace orbitforge::planner
