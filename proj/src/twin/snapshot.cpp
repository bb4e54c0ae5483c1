#include "orbitforge/twin/snapshot.hpp"

#include "orbitforge/common/hash.hpp"

namespace orbitforge::twin {

using nlohmann::json;

json initial_state() {
  return {{"last_seq", 0},
          {"clock_s", 0.0},
          {"stores", {{"archive", 0}, {"process_analysis", 0}, {"product_shadow", 0}}},
          {"endpoints", json::object()},
          {"orders", json::object()},
          {"products", json::object()},
          {"inventory", json::object()},
          {"technical",
           {{"qtables", json::object()},
            {"lof_profiles", json::object()},
            {"reference_library", json::array()}}},
          {"operation", {{"completed", 0}, {"scheduled", json::array()}}},
          {"campaign", json::object()}};
}

namespace {

struct Reducer {
  json& s;
  const TwinEvent& e;

  [[noreturn]] void corrupt(const std::string& what) const { throw CorruptEvent(e.seq, what); }

  const json& field(const char* key) const {
    if (!e.payload.contains(key)) corrupt(e.type + " lacks payload field " + key);
    return e.payload.at(key);
  }

  std::string str(const char* key) const {
    const auto& v = field(key);
    if (!v.is_string()) corrupt(std::string("payload field ") + key + " must be a string");
    return v.get<std::string>();
  }

  json& entry(const char* table, const std::string& id) const {
    auto& t = s[table];
    if (!t.contains(id)) corrupt(std::string("unknown ") + table + " entry " + id);
    return t[id];
  }

  json& order() const { return entry("orders", str("order_id")); }
  json& product() const { return entry("products", str("product_id")); }
  json& board_record() const {
    auto& p = product();
    const auto serial = str("serial");
    if (!p["boards"].contains(serial)) corrupt("board " + serial + " not selected for product");
    return p["boards"][serial];
  }
  json& stock(const std::string& serial) const { return entry("inventory", serial); }

  void release(const json& serials) const {
    if (!serials.is_array()) corrupt("released must be a list");
    for (const auto& sr : serials) {
      if (!sr.is_string()) corrupt("released entries must be serials");
      stock(sr.get<std::string>())["reserved_by"] = nullptr;
    }
  }

  void unschedule(const std::string& order_id) const {
    auto& sched = s["operation"]["scheduled"];
    json kept = json::array();
    for (const auto& id : sched)
      if (id != order_id) kept.push_back(id);
    sched = kept;
  }

  void set_product_status(const char* status) const { product()["status"] = status; }

  void apply() const {
    const auto& t = e.type;
    if (t == "endpoint_registered") {
      s["endpoints"][str("id")] = {{"address", str("address")}, {"name", str("name")}};
    } else if (t == "campaign_started") {
      const auto& inv = field("inventory");
      if (!inv.is_array()) corrupt("inventory must be a list");
      for (const auto& b : inv) {
        if (!b.is_object() || !b.contains("serial") || !b.contains("board_type"))
          corrupt("inventory entries need serial and board_type");
        const auto serial = b["serial"].get<std::string>();
        s["inventory"][serial] = {{"board_type", b["board_type"]},
                                  {"location", b.value("location", "tray")},
                                  {"health", "Unknown"},
                                  {"reserved_by", nullptr}};
      }
      s["campaign"] = {{"seed", field("seed")}, {"boards", inv.size()}};
    } else if (t == "commissioning_started" || t == "campaign_finished" ||
               t == "qtable_discarded" || t == "board_flipped" ||
               t == "electrical_no_response" || t == "operator_command") {
      // recorded for analysis; no state beyond the counters
    } else if (t == "reference_library_built") {
      s["technical"]["reference_library"] = field("board_types");
    } else if (t == "lof_profile_trained") {
      s["technical"]["lof_profiles"][str("board_type")] = {{"sha256", str("sha256")},
                                                           {"states", field("states")}};
    } else if (t == "qtable_pretrained" || t == "qtable_committed") {
      s["technical"]["qtables"][str("board_type")] = field("table");
    } else if (t == "order_received") {
      const auto id = str("order_id");
      if (s["orders"].contains(id)) corrupt("duplicate order " + id);
      s["orders"][id] = {{"status", "Received"}, {"order", field("order")}, {"reason", nullptr},
                         {"config", nullptr}, {"reserved", json::array()}, {"product_id", nullptr}};
    } else if (t == "order_accepted") {
      auto& o = order();
      o["status"] = "Accepted";
      o["config"] = field("config");
      o["reserved"] = field("reserved");
      o["estimate_s"] = field("estimate_s");
      for (const auto& sr : o["reserved"]) stock(sr.get<std::string>())["reserved_by"] = str("order_id");
      s["operation"]["scheduled"].push_back(str("order_id"));
    } else if (t == "order_rejected") {
      auto& o = order();
      o["status"] = "Rejected";
      o["reason"] = field("reason");
    } else if (t == "product_instantiated") {
      const auto id = str("product_id");
      if (s["products"].contains(id)) corrupt("duplicate product " + id);
      auto& o = order();
      if (o["status"] != "Accepted") corrupt("product for an order that is not accepted");
      o["product_id"] = id;
      s["products"][id] = {{"order_id", str("order_id")}, {"status", "Instantiated"},
                           {"target", field("target")}, {"state", field("state")},
                           {"boards", json::object()}, {"plan", json::array()},
                           {"interventions", 0}, {"paused", false}, {"reason", nullptr}};
    } else if (t == "product_prechecked") {
      set_product_status("PreChecked");
    } else if (t == "precheck_failed") {
      auto& p = product();
      p["status"] = "Failed";
      p["reason"] = field("reason");
      auto& o = entry("orders", p["order_id"].get<std::string>());
      o["status"] = "Returned";
      o["reason"] = field("reason");
      release(field("released"));
      unschedule(p["order_id"].get<std::string>());
    } else if (t == "production_started") {
      auto& p = product();
      if (p["status"] != "PreChecked") corrupt("production started before the pre-check");
      p["status"] = "InProduction";
      entry("orders", p["order_id"].get<std::string>())["status"] = "InProduction";
    } else if (t == "plan_computed") {
      product()["plan"] = field("actions");
      product()["target"] = field("goal");
    } else if (t == "board_selected") {
      auto& p = product();
      const auto serial = str("serial");
      auto& b = stock(serial);
      b["reserved_by"] = p["order_id"];
      b["location"] = "handling";
      p["boards"][serial] = {{"slot", field("slot")}, {"board_type", b["board_type"]},
                             {"probe", nullptr}, {"optical", nullptr}, {"insertion", nullptr},
                             {"electrical", nullptr}, {"attempts", 0}, {"outcome", nullptr}};
    } else if (t == "probe_result") {
      board_record()["probe"] = field("result");
    } else if (t == "optical_result") {
      board_record()["optical"] = field("verdict");
    } else if (t == "insertion_attempt") {
      auto& b = board_record();
      b["attempts"] = b["attempts"].get<int>() + 1;
    } else if (t == "insertion_success") {
      auto& b = board_record();
      b["insertion"] = field("mode");
      stock(str("serial"))["location"] = "slot:" + std::to_string(field("slot").get<int>());
    } else if (t == "board_reinserted") {
      board_record();
    } else if (t == "electrical_result") {
      board_record()["electrical"] = field("verdict");
    } else if (t == "board_mounted") {
      auto& b = board_record();
      if (b["optical"] != "Pass" || b["electrical"] != "Pass")
        corrupt("board " + str("serial") + " mounted without passed optical and electrical records");
      b["outcome"] = "Mounted";
      product()["state"] = field("state");
      auto& st = stock(str("serial"));
      st["health"] = "Passed";
      st["location"] = str("product_id") + ":slot:" + std::to_string(field("slot").get<int>());
    } else if (t == "board_removed") {
      auto& b = board_record();
      b["outcome"] = "Removed";
      product()["state"] = field("state");
      stock(str("serial"))["location"] = "tray";
    } else if (t == "board_discarded") {
      auto& b = board_record();
      b["outcome"] = "Discarded";
      b["discard_reason"] = field("reason");
      auto& st = stock(str("serial"));
      st["health"] = "Discarded";
      st["location"] = "discarded";
      st["reserved_by"] = nullptr;
    } else if (t == "intervention_requested") {
      auto& p = product();
      p["interventions"] = p["interventions"].get<int>() + 1;
      p["paused"] = true;
      board_record();
    } else if (t == "intervention_resolved") {
      product()["paused"] = false;
      board_record()["intervention"] = field("outcome");
    } else if (t == "product_completed" || t == "product_failed") {
      auto& p = product();
      const bool ok = t == "product_completed";
      p["status"] = ok ? "Completed" : "Failed";
      p["paused"] = false;
      if (!ok) p["reason"] = field("reason");
      auto& o = entry("orders", p["order_id"].get<std::string>());
      o["status"] = ok ? "Completed" : "Failed";
      if (!ok) o["reason"] = field("reason");
      release(field("released"));
      unschedule(p["order_id"].get<std::string>());
      s["operation"]["completed"] = s["operation"]["completed"].get<int>() + 1;
    } else {
      corrupt("unknown event type " + t);
    }
  }
};

}  // namespace

void apply_event(json& state, const TwinEvent& e) {
  if (e.seq <= state["last_seq"].get<std::uint64_t>()) throw CorruptEvent(e.seq, "sequence number not increasing");
  if (e.timestamp_s < state["clock_s"].get<double>()) throw CorruptEvent(e.seq, "timestamp runs backwards");
  if (e.parent && *e.parent >= e.seq) throw CorruptEvent(e.seq, "parent does not precede the event");
  if (!e.payload.is_object()) throw CorruptEvent(e.seq, "payload must be an object");
  if (e.type != "endpoint_registered" && !state["endpoints"].contains(e.source))
    throw CorruptEvent(e.seq, "source " + e.source + " is not a registered endpoint");
  Reducer{state, e}.apply();
  state["last_seq"] = e.seq;
  state["clock_s"] = e.timestamp_s;
  auto& counter = state["stores"][std::string(to_string(route_event(e.type)))];
  counter = counter.get<std::uint64_t>() + 1;
}

json replay_log(std::span<const TwinEvent> events) {
  json state = initial_state();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::uint64_t expected = i + 1;
    if (events[i].seq > expected) throw GapDetected(i, expected, events[i].seq);
    if (events[i].seq < expected) throw CorruptEvent(events[i].seq, "sequence number not increasing");
    apply_event(state, events[i]);
  }
  return state;
}

std::string state_hash(const json& state) { return sha256_hex(state.dump()); }

}  // namespace orbitforge::twin
