#include <map>
#include <set>

#include "orbitforge/twin/twin.hpp"

namespace orbitforge::twin {

using nlohmann::json;

namespace {

struct Truth {
  bool optical = false;
  bool electrical = false;
};

Truth ground_truth(const json& faults) {
  Truth t;
  for (const auto& f : faults) {
    const auto kind = f.at("kind").get<std::string>();
    if (kind == "solderball" || kind == "tombstone" || kind == "solderbridge" || kind == "missing_pin" ||
        kind == "bent_pin")
      t.optical = true;
    if (kind == "electrical_drift" || kind == "dead_board") t.electrical = true;
    if (kind == "connector_fault" && !f.value("clears_on_reinsert", true)) t.electrical = true;
  }
  return t;
}

struct Confusion {
  int tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool truth, bool flagged) {
    if (truth && flagged) ++tp;
    else if (!truth && flagged) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  json to_json() const {
    json j = {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}, {"recall", nullptr}, {"precision", nullptr}};
    if (tp + fn > 0) j["recall"] = static_cast<double>(tp) / (tp + fn);
    if (tp + fp > 0) j["precision"] = static_cast<double>(tp) / (tp + fp);
    return j;
  }
};

std::string stage_of(const std::string& type) {
  static const std::map<std::string, std::string> kStages = {
      {"probe_result", "probe"},          {"board_flipped", "flip"},
      {"optical_result", "optical"},      {"insertion_attempt", "insertion"},
      {"insertion_success", "insertion"}, {"board_reinserted", "electrical"},
      {"electrical_result", "electrical"}, {"board_removed", "removal"},
      {"board_discarded", "removal"},     {"intervention_resolved", "teleop"},
  };
  const auto it = kStages.find(type);
  return it == kStages.end() ? "" : it->second;
}

}  // namespace

json compute_metrics(const std::vector<TwinEvent>& events) {
  std::map<std::string, Truth> truth;
  std::set<std::string> entered, inserted;
  int attempts = 0, autonomous = 0, teleoperated = 0, interventions = 0;
  int first_try = 0;
  std::map<std::string, bool> optical_flag;  // serial -> failed optical
  std::map<std::string, bool> electrical_flag;
  std::map<std::string, double> durations;
  json discards = json::array();
  std::map<std::string, int> orders;
  double end_s = 0.0;

  for (const auto& e : events) {
    const auto& p = e.payload;
    end_s = e.timestamp_s;
    if (e.type == "campaign_started") {
      for (const auto& b : p.at("inventory"))
        truth[b.at("serial").get<std::string>()] = ground_truth(b.value("faults", json::array()));
    } else if (e.type == "insertion_attempt") {
      entered.insert(p.at("serial").get<std::string>());
      ++attempts;
    } else if (e.type == "insertion_success") {
      inserted.insert(p.at("serial").get<std::string>());
      if (p.at("mode") == "autonomous") {
        ++autonomous;
        if (p.value("attempts", 0) == 1) ++first_try;
      } else {
        ++teleoperated;
      }
    } else if (e.type == "intervention_requested") {
      ++interventions;
    } else if (e.type == "optical_result") {
      optical_flag[p.at("serial").get<std::string>()] = p.at("verdict") != "Pass";
    } else if (e.type == "electrical_result") {
      electrical_flag[p.at("serial").get<std::string>()] = p.at("verdict") != "Pass";
    } else if (e.type == "board_discarded") {
      const auto serial = p.at("serial").get<std::string>();
      if (p.value("stage", "") == "electrical" && p.value("reason", "") == "no response")
        electrical_flag[serial] = true;
      discards.push_back({{"serial", serial}, {"stage", p.value("stage", "")}, {"reason", p.value("reason", "")}});
    } else if (e.type == "order_accepted") {
      ++orders["accepted"];
    } else if (e.type == "order_rejected") {
      ++orders["rejected"];
    } else if (e.type == "product_completed") {
      ++orders["completed"];
    } else if (e.type == "product_failed") {
      ++orders["failed"];
    } else if (e.type == "precheck_failed") {
      ++orders["returned"];
    }
    const auto stage = stage_of(e.type);
    if (!stage.empty() && p.contains("duration_s")) durations[stage] += p["duration_s"].get<double>();
  }

  Confusion optical, electrical;
  for (const auto& [serial, flagged] : optical_flag) optical.add(truth[serial].optical, flagged);
  for (const auto& [serial, flagged] : electrical_flag) electrical.add(truth[serial].electrical, flagged);

  json ins = {{"boards_entered", entered.size()},
              {"boards_inserted", inserted.size()},
              {"attempts", attempts},
              {"autonomous_successes", autonomous},
              {"first_attempt_successes", first_try},
              {"teleoperated_successes", teleoperated},
              {"interventions", interventions},
              {"success_rate", nullptr}};
  if (!entered.empty()) ins["success_rate"] = static_cast<double>(inserted.size()) / entered.size();

  json dur = json::object();
  for (const auto& [k, v] : durations) dur[k] = v;
  json ord = {{"accepted", 0}, {"rejected", 0}, {"completed", 0}, {"failed", 0}, {"returned", 0}};
  for (const auto& [k, v] : orders) ord[k] = v;
  return {{"insertion", ins},
          {"optical", optical.to_json()},
          {"electrical", electrical.to_json()},
          {"stage_durations_s", dur},
          {"campaign_duration_s", end_s},
          {"discards", discards},
          {"orders", ord}};
}

}  // namespace orbitforge::twin
