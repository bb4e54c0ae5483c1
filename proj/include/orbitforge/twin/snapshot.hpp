#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/twin/event.hpp"

namespace orbitforge::twin {

class GapDetected : public Error {
 public:
  GapDetected(std::size_t index, std::uint64_t expected, std::uint64_t found)
      : Error("sequence gap at index " + std::to_string(index) + ": expected " +
              std::to_string(expected) + ", found " + std::to_string(found)),
        index_(index),
        expected_(expected),
        found_(found) {}
  std::size_t index() const { return index_; }
  std::uint64_t expected() const { return expected_; }
  std::uint64_t found() const { return found_; }

 private:
  std::size_t index_;
  std::uint64_t expected_;
  std::uint64_t found_;
};

class CorruptEvent : public Error {
 public:
  CorruptEvent(std::uint64_t seq, const std::string& what)
      : Error("corrupt event " + std::to_string(seq) + ": " + what), seq_(seq) {}
  std::uint64_t seq() const { return seq_; }

 private:
  std::uint64_t seq_;
};

/// Twin state before any event.
nlohmann::json initial_state();

/// Folds one event into the state. The live twin and replay share this
/// function, so their states agree by construction. Throws CorruptEvent for
/// unknown types, missing payload fields, references to unknown orders,
/// products or boards, time running backwards, and a mount without passed
/// optical and electrical records.
void apply_event(nlohmann::json& state, const TwinEvent& e);

/// Requires seq numbers 1, 2, 3, ... (GapDetected otherwise).
nlohmann::json replay_log(std::span<const TwinEvent> events);

/// SHA-256 of the canonical serialization.
std::string state_hash(const nlohmann::json& state);

}  // namespace orbitforge::twin
