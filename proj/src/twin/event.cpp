#include "orbitforge/twin/event.hpp"

#include <fstream>
#include <map>

namespace orbitforge::twin {

nlohmann::json to_json(const TwinEvent& e) {
  nlohmann::json j = {{"seq", e.seq},
                      {"timestamp_s", e.timestamp_s},
                      {"source", e.source},
                      {"type", e.type},
                      {"payload", e.payload}};
  j["parent"] = e.parent ? nlohmann::json(*e.parent) : nlohmann::json(nullptr);
  return j;
}

TwinEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("event is not an object");
  const auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ParseError(std::string("event lacks field ") + key);
    return j.at(key);
  };
  TwinEvent e;
  const auto& seq = need("seq");
  if (!seq.is_number_unsigned()) throw ParseError("event seq must be a non-negative integer");
  e.seq = seq.get<std::uint64_t>();
  const auto& ts = need("timestamp_s");
  if (!ts.is_number()) throw ParseError("event timestamp_s must be a number");
  e.timestamp_s = ts.get<double>();
  const auto& src = need("source");
  const auto& type = need("type");
  if (!src.is_string() || !type.is_string()) throw ParseError("event source/type must be strings");
  e.source = src.get<std::string>();
  e.type = type.get<std::string>();
  e.payload = need("payload");
  if (!e.payload.is_object()) throw ParseError("event payload must be an object");
  const auto& parent = need("parent");
  if (parent.is_null()) e.parent.reset();
  else if (parent.is_number_unsigned()) e.parent = parent.get<std::uint64_t>();
  else throw ParseError("event parent must be null or an integer");
  return e;
}

std::string canonical_line(const nlohmann::json& j) { return j.dump(); }

std::string_view to_string(ShadowStore s) {
  switch (s) {
    case ShadowStore::Archive: return "archive";
    case ShadowStore::ProcessAnalysis: return "process_analysis";
    case ShadowStore::ProductShadow: return "product_shadow";
  }
  return "archive";
}

ShadowStore route_event(std::string_view type) {
  static const std::map<std::string_view, ShadowStore> table = {
      {"campaign_started", ShadowStore::Archive},
      {"endpoint_registered", ShadowStore::Archive},
      {"commissioning_started", ShadowStore::Archive},
      {"reference_library_built", ShadowStore::Archive},
      {"lof_profile_trained", ShadowStore::Archive},
      {"qtable_pretrained", ShadowStore::Archive},
      {"campaign_finished", ShadowStore::Archive},
      {"order_received", ShadowStore::ProcessAnalysis},
      {"order_accepted", ShadowStore::ProcessAnalysis},
      {"order_rejected", ShadowStore::ProcessAnalysis},
      {"plan_computed", ShadowStore::ProcessAnalysis},
      {"qtable_committed", ShadowStore::ProcessAnalysis},
      {"qtable_discarded", ShadowStore::ProcessAnalysis},
      {"intervention_requested", ShadowStore::ProcessAnalysis},
      {"operator_command", ShadowStore::ProcessAnalysis},
      {"intervention_resolved", ShadowStore::ProcessAnalysis},
      {"product_instantiated", ShadowStore::ProductShadow},
      {"product_prechecked", ShadowStore::ProductShadow},
      {"precheck_failed", ShadowStore::ProductShadow},
      {"production_started", ShadowStore::ProductShadow},
      {"board_selected", ShadowStore::ProductShadow},
      {"probe_result", ShadowStore::ProductShadow},
      {"board_flipped", ShadowStore::ProductShadow},
      {"optical_result", ShadowStore::ProductShadow},
      {"insertion_attempt", ShadowStore::ProductShadow},
      {"insertion_success", ShadowStore::ProductShadow},
      {"electrical_no_response", ShadowStore::ProductShadow},
      {"board_reinserted", ShadowStore::ProductShadow},
      {"electrical_result", ShadowStore::ProductShadow},
      {"board_mounted", ShadowStore::ProductShadow},
      {"board_removed", ShadowStore::ProductShadow},
      {"board_discarded", ShadowStore::ProductShadow},
      {"product_completed", ShadowStore::ProductShadow},
      {"product_failed", ShadowStore::ProductShadow},
  };
  const auto it = table.find(type);
  return it == table.end() ? ShadowStore::Archive : it->second;
}

nlohmann::json to_json(const LogHeader& h) {
  return {{"record", "header"}, {"schema", h.schema}, {"seed", h.seed}, {"config", h.config}};
}

void write_log(std::ostream& out, const LogHeader& header, const std::vector<TwinEvent>& events) {
  out << canonical_line(to_json(header)) << '\n';
  for (const auto& e : events) out << canonical_line(to_json(e)) << '\n';
}

void write_log(const std::filesystem::path& path, const LogHeader& header,
               const std::vector<TwinEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_log(out, header, events);
}

LogFile read_log(std::istream& in) {
  LogFile f;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("event log line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || j.value("record", "") != "header")
        throw ParseError("event log must start with a header record");
      f.header.schema = j.value("schema", "");
      if (f.header.schema != kEventSchema)
        throw ParseError("unsupported event log schema " + f.header.schema);
      f.header.seed = j.value("seed", std::uint64_t{0});
      f.header.config = j.value("config", nlohmann::json::object());
      have_header = true;
      continue;
    }
    try {
      f.events.push_back(event_from_json(j));
    } catch (const ParseError& e) {
      throw ParseError("event log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("event log is empty");
  return f;
}

LogFile read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return read_log(in);
}

}  // namespace orbitforge::twin
