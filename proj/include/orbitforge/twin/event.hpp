#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "orbitforge/common/error.hpp"

namespace orbitforge::twin {

inline constexpr std::string_view kEventSchema = "orbitforge.events/1";

struct TwinEvent {
  std::uint64_t seq = 0;
  double timestamp_s = 0.0;  // simulated clock
  std::string source;        // endpoint id of the emitting module
  std::string type;
  nlohmann::json payload = nlohmann::json::object();
  std::optional<std::uint64_t> parent;

  friend bool operator==(const TwinEvent&, const TwinEvent&) = default;
};

nlohmann::json to_json(const TwinEvent& e);
/// Throws ParseError on missing or mistyped fields.
TwinEvent event_from_json(const nlohmann::json& j);

/// One line of canonical JSON (sorted keys, no spaces).
std::string canonical_line(const nlohmann::json& j);

/// Where the digital shadow keeps an event.
enum class ShadowStore { Archive, ProcessAnalysis, ProductShadow };

std::string_view to_string(ShadowStore s);
/// Every type maps to exactly one store; unknown types go to the archive.
ShadowStore route_event(std::string_view type);

struct LogHeader {
  std::string schema = std::string(kEventSchema);
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json to_json(const LogHeader& h);

/// Writes the header then each event as one line.
void write_log(std::ostream& out, const LogHeader& header, const std::vector<TwinEvent>& events);
void write_log(const std::filesystem::path& path, const LogHeader& header,
               const std::vector<TwinEvent>& events);

struct LogFile {
  LogHeader header;
  std::vector<TwinEvent> events;
};

/// Throws ParseError on malformed lines or a missing or foreign header.
LogFile read_log(std::istream& in);
LogFile read_log(const std::filesystem::path& path);

}  // namespace orbitforge::twin
