#include "orbitforge/twin/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "orbitforge/cell/yaml_io.hpp"
#include "orbitforge/common/hash.hpp"
#include "orbitforge/common/yaml_util.hpp"

namespace orbitforge::twin {

using yaml::join;
using yaml::optional;

namespace {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void positive(double v, const char* field) {
  if (!(v > 0.0)) throw ValidationError(field, "must be positive");
}

void non_negative(double v, const char* field) {
  if (!(v >= 0.0)) throw ValidationError(field, "must not be negative");
}

}  // namespace

void TwinConfig::validate() const {
  cell::validate(cell);
  const auto& d = durations;
  non_negative(d.probe_s, "schedule.durations_s.probe");
  non_negative(d.grip_s, "schedule.durations_s.grip");
  non_negative(d.flip_s, "schedule.durations_s.flip");
  non_negative(d.optical_s, "schedule.durations_s.optical");
  non_negative(d.insertion_attempt_s, "schedule.durations_s.insertion_attempt");
  non_negative(d.seat_s, "schedule.durations_s.seat");
  non_negative(d.remove_s, "schedule.durations_s.remove");
  non_negative(d.reinsert_s, "schedule.durations_s.reinsert");
  positive(d.board_estimate_s, "schedule.board_estimate_s");
  if (retry_cap < 0) throw ValidationError("schedule.retry_cap", "must not be negative");
  positive(insertion.approach_mm, "insertion.approach_mm");
  if (!(insertion.test_depth_mm > 0.0 && insertion.test_depth_mm < cell.backplane.casing_top_mm))
    throw ValidationError("insertion.test_depth_mm", "must lie within the casing height");
  non_negative(insertion.noise_sd_mm, "insertion.noise_sd_mm");
  insertion.params.validate();
  if (qpolicy.side < 1 || qpolicy.side % 2 == 0)
    throw ValidationError("qpolicy.side", "must be a positive odd number");
  positive(qpolicy.step_mm, "qpolicy.step_mm");
  qpolicy.hyper.validate();
  if (!(optical.match_threshold > 0.0 && optical.match_threshold <= 1.0))
    throw ValidationError("optical.match_threshold", "must lie in (0, 1]");
  if (optical.stage1_tile_px == 0) throw ValidationError("optical.stage1_tile_px", "must be positive");
  non_negative(optical.stage1_threshold, "optical.stage1_threshold");
  optical.thresholds.validate();
  non_negative(optical.pin_noise_sd_mm, "optical.pin_noise_sd_mm");
  electrical.validate();
  teleop.validate();
}

insertion::Geometry TwinConfig::geometry() const {
  insertion::Geometry g;
  g.clearance_mm = cell.backplane.clearance_mm;
  g.lip_mm = cell.backplane.lip_mm;
  g.casing_top_mm = cell.backplane.casing_top_mm;
  g.approach_mm = insertion.approach_mm;
  g.test_depth_mm = insertion.test_depth_mm;
  return g;
}

nlohmann::json to_json(const TwinConfig& c) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : c.constraints.forbidden_adjacent) pairs.push_back({a, b});
  const auto& d = c.durations;
  const auto& ip = c.insertion.params;
  const auto& h = c.qpolicy.hyper;
  const auto& e = c.electrical;
  const auto& t = c.teleop;
  nlohmann::json thresholds = nlohmann::json::object();
  for (auto cls : cell::kAllSurfaceClasses)
    thresholds[std::string(cell::to_string(cls))] = c.optical.thresholds.of(cls);
  return {
      {"cell", {{"file", c.cell_path.filename().string()}, {"sha256", c.cell_sha256}}},
      {"planner", {{"forbidden_adjacent", pairs}, {"state_cap", c.constraints.state_cap}}},
      {"schedule",
       {{"retry_cap", c.retry_cap},
        {"board_estimate_s", d.board_estimate_s},
        {"durations_s",
         {{"probe", d.probe_s}, {"grip", d.grip_s}, {"flip", d.flip_s}, {"optical", d.optical_s},
          {"insertion_attempt", d.insertion_attempt_s}, {"seat", d.seat_s},
          {"remove", d.remove_s}, {"reinsert", d.reinsert_s}}}}},
      {"insertion",
       {{"approach_mm", c.insertion.approach_mm},
        {"test_depth_mm", c.insertion.test_depth_mm},
        {"noise_sd_mm", c.insertion.noise_sd_mm},
        {"free_threshold_n", ip.free_threshold_n},
        {"wedge_threshold_n", ip.wedge_threshold_n},
        {"spike_tolerance_n", ip.spike_tolerance_n},
        {"collision_threshold_n", ip.collision_threshold_n},
        {"descent_step_mm", ip.descent_step_mm}}},
      {"qpolicy",
       {{"side", c.qpolicy.side}, {"step_mm", c.qpolicy.step_mm}, {"epsilon", h.epsilon},
        {"alpha", h.alpha}, {"q_init", h.q_init}, {"success_bonus", h.success_bonus},
        {"force_weight", h.force_weight}, {"pretrain_episodes", c.qpolicy.pretrain_episodes}}},
      {"optical",
       {{"match_threshold", c.optical.match_threshold},
        {"stage1_tile_px", c.optical.stage1_tile_px},
        {"stage1_threshold", c.optical.stage1_threshold},
        {"class_thresholds", thresholds},
        {"min_defect_area_px", c.optical.min_defect_area_px},
        {"oracle",
         {{"amplitude", c.optical.oracle.amplitude},
          {"blur_sigma_px", c.optical.oracle.blur_sigma_px},
          {"noise_sd", c.optical.oracle.noise_sd}}},
        {"pin_noise_sd_mm", c.optical.pin_noise_sd_mm}}},
      {"electrical",
       {{"k", e.k}, {"threshold", e.threshold}, {"fail_fraction", e.fail_fraction},
        {"clean_cutoff", e.clean_cutoff}, {"training_samples", e.training_samples},
        {"samples_per_state", e.samples_per_state}, {"sample_period_s", e.sample_period_s},
        {"voltage_tolerance_frac", e.voltage_tolerance_frac}}},
      {"teleop",
       {{"control_rate_hz", t.control_rate_hz}, {"telemetry_rate_hz", t.telemetry_rate_hz},
        {"vision_rate_hz", t.vision_rate_hz}, {"vision_noise_m", t.vision_noise_m},
        {"camera_range_m", t.camera_range_m}, {"timeout_s", t.timeout_s},
        {"tool_speed_m_s", t.tool_speed_m_s}, {"precision_m", t.precision_m}}},
  };
}

TwinConfig twin_config_from_yaml(const YAML::Node& root, const std::filesystem::path& base_dir) {
  if (!root.IsMap()) throw ParseError("twin config: expected a mapping");
  TwinConfig c;
  const auto cell_rel = yaml::required<std::string>(root, "cell", "");
  c.cell_path = std::filesystem::path(cell_rel).is_absolute() ? std::filesystem::path(cell_rel)
                                                               : base_dir / cell_rel;
  const std::string cell_text = read_text(c.cell_path);
  c.cell_sha256 = sha256_hex(cell_text);
  c.cell = cell::parse_cell_config(cell_text);
  if (root["seed"]) c.seed = yaml::as<std::uint64_t>(root["seed"], "seed");

  if (const auto p = root["planner"]) {
    if (const auto fa = p["forbidden_adjacent"]) {
      if (!fa.IsSequence()) throw ParseError("planner.forbidden_adjacent: expected a sequence");
      for (std::size_t i = 0; i < fa.size(); ++i) {
        const auto pair = fa[i];
        const std::string path = "planner.forbidden_adjacent[" + std::to_string(i) + "]";
        if (!pair.IsSequence() || pair.size() != 2)
          throw ParseError(path + ": expected a pair of thermal tags");
        c.constraints.forbidden_adjacent.emplace_back(yaml::as<std::string>(pair[0], path),
                                                      yaml::as<std::string>(pair[1], path));
      }
    }
    c.constraints.state_cap = optional<std::size_t>(p, "state_cap", "planner", c.constraints.state_cap);
  }
  if (const auto s = root["schedule"]) {
    c.retry_cap = optional<int>(s, "retry_cap", "schedule", c.retry_cap);
    auto& d = c.durations;
    d.board_estimate_s = optional<double>(s, "board_estimate_s", "schedule", d.board_estimate_s);
    if (const auto ds = s["durations_s"]) {
      const std::string path = "schedule.durations_s";
      d.probe_s = optional<double>(ds, "probe", path, d.probe_s);
      d.grip_s = optional<double>(ds, "grip", path, d.grip_s);
      d.flip_s = optional<double>(ds, "flip", path, d.flip_s);
      d.optical_s = optional<double>(ds, "optical", path, d.optical_s);
      d.insertion_attempt_s = optional<double>(ds, "insertion_attempt", path, d.insertion_attempt_s);
      d.seat_s = optional<double>(ds, "seat", path, d.seat_s);
      d.remove_s = optional<double>(ds, "remove", path, d.remove_s);
      d.reinsert_s = optional<double>(ds, "reinsert", path, d.reinsert_s);
    }
  }
  if (const auto n = root["insertion"]) {
    auto& s = c.insertion;
    s.approach_mm = optional<double>(n, "approach_mm", "insertion", s.approach_mm);
    s.test_depth_mm = optional<double>(n, "test_depth_mm", "insertion", s.test_depth_mm);
    s.noise_sd_mm = optional<double>(n, "noise_sd_mm", "insertion", s.noise_sd_mm);
    auto& p = s.params;
    p.free_threshold_n = optional<double>(n, "free_threshold_n", "insertion", p.free_threshold_n);
    p.wedge_threshold_n = optional<double>(n, "wedge_threshold_n", "insertion", p.wedge_threshold_n);
    p.spike_tolerance_n = optional<double>(n, "spike_tolerance_n", "insertion", p.spike_tolerance_n);
    p.collision_threshold_n =
        optional<double>(n, "collision_threshold_n", "insertion", p.collision_threshold_n);
    p.descent_step_mm = optional<double>(n, "descent_step_mm", "insertion", p.descent_step_mm);
  }
  if (const auto q = root["qpolicy"]) {
    auto& s = c.qpolicy;
    s.side = optional<int>(q, "side", "qpolicy", s.side);
    s.step_mm = optional<double>(q, "step_mm", "qpolicy", s.step_mm);
    s.pretrain_episodes = optional<std::size_t>(q, "pretrain_episodes", "qpolicy", s.pretrain_episodes);
    auto& h = s.hyper;
    h.epsilon = optional<double>(q, "epsilon", "qpolicy", h.epsilon);
    h.alpha = optional<double>(q, "alpha", "qpolicy", h.alpha);
    h.q_init = optional<double>(q, "q_init", "qpolicy", h.q_init);
    h.success_bonus = optional<double>(q, "success_bonus", "qpolicy", h.success_bonus);
    h.force_weight = optional<double>(q, "force_weight", "qpolicy", h.force_weight);
  }
  if (const auto o = root["optical"]) {
    auto& s = c.optical;
    s.match_threshold = optional<double>(o, "match_threshold", "optical", s.match_threshold);
    s.stage1_tile_px = optional<std::size_t>(o, "stage1_tile_px", "optical", s.stage1_tile_px);
    s.stage1_threshold = optional<double>(o, "stage1_threshold", "optical", s.stage1_threshold);
    s.min_defect_area_px = optional<std::size_t>(o, "min_defect_area_px", "optical", s.min_defect_area_px);
    s.pin_noise_sd_mm = optional<double>(o, "pin_noise_sd_mm", "optical", s.pin_noise_sd_mm);
    if (const auto ct = o["class_thresholds"]) {
      if (!ct.IsMap()) throw ParseError("optical.class_thresholds: expected a mapping");
      for (const auto& kv : ct) {
        const auto name = yaml::as<std::string>(kv.first, "optical.class_thresholds");
        const auto cls = cell::surface_class_from_string(name);
        if (!cls) throw ValidationError("optical.class_thresholds." + name, "unknown surface class");
        s.thresholds.value[static_cast<std::size_t>(*cls)] =
            yaml::as<double>(kv.second, "optical.class_thresholds." + name);
      }
    }
    if (const auto orc = o["oracle"]) {
      s.oracle.amplitude = optional<double>(orc, "amplitude", "optical.oracle", s.oracle.amplitude);
      s.oracle.blur_sigma_px = optional<double>(orc, "blur_sigma_px", "optical.oracle", s.oracle.blur_sigma_px);
      s.oracle.noise_sd = optional<double>(orc, "noise_sd", "optical.oracle", s.oracle.noise_sd);
    }
  }
  if (const auto e = root["electrical"]) {
    auto& p = c.electrical;
    p.k = optional<std::size_t>(e, "k", "electrical", p.k);
    p.threshold = optional<double>(e, "threshold", "electrical", p.threshold);
    p.fail_fraction = optional<double>(e, "fail_fraction", "electrical", p.fail_fraction);
    p.clean_cutoff = optional<double>(e, "clean_cutoff", "electrical", p.clean_cutoff);
    p.training_samples = optional<std::size_t>(e, "training_samples", "electrical", p.training_samples);
    p.samples_per_state = optional<std::size_t>(e, "samples_per_state", "electrical", p.samples_per_state);
    p.sample_period_s = optional<double>(e, "sample_period_s", "electrical", p.sample_period_s);
    p.voltage_tolerance_frac =
        optional<double>(e, "voltage_tolerance_frac", "electrical", p.voltage_tolerance_frac);
  }
  if (const auto t = root["teleop"]) {
    auto& p = c.teleop;
    p.control_rate_hz = optional<double>(t, "control_rate_hz", "teleop", p.control_rate_hz);
    p.telemetry_rate_hz = optional<double>(t, "telemetry_rate_hz", "teleop", p.telemetry_rate_hz);
    p.vision_rate_hz = optional<double>(t, "vision_rate_hz", "teleop", p.vision_rate_hz);
    p.vision_noise_m = optional<double>(t, "vision_noise_m", "teleop", p.vision_noise_m);
    p.camera_range_m = optional<double>(t, "camera_range_m", "teleop", p.camera_range_m);
    p.timeout_s = optional<double>(t, "timeout_s", "teleop", p.timeout_s);
    p.tool_speed_m_s = optional<double>(t, "tool_speed_m_s", "teleop", p.tool_speed_m_s);
    p.precision_m = optional<double>(t, "precision_m", "teleop", p.precision_m);
  }
  c.validate();
  return c;
}

TwinConfig load_twin_config(const std::filesystem::path& path) {
  return twin_config_from_yaml(yaml::parse_file(path.string()), path.parent_path());
}

nlohmann::json to_json(const Order& o) {
  nlohmann::json reqs = nlohmann::json::array();
  for (const auto& r : o.goal.requirements) reqs.push_back(r.alternatives);
  nlohmann::json j = {{"id", o.id}, {"requirements", reqs}, {"deadline_s", o.deadline_s}};
  j["layout"] = o.layout ? nlohmann::json(o.layout->to_string()) : nlohmann::json(nullptr);
  return j;
}

std::vector<Order> orders_from_yaml(const YAML::Node& root, const std::string& path) {
  const YAML::Node list = root.IsMap() ? root["orders"] : root;
  if (!list || !list.IsSequence()) throw ParseError(path + ": expected a list of orders");
  std::vector<Order> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto n = list[i];
    const std::string p = join(path, "orders[" + std::to_string(i) + "]");
    Order o;
    o.id = yaml::required<std::string>(n, "id", p);
    if (o.id.empty()) throw ValidationError(join(p, "id"), "must not be empty");
    if (!ids.insert(o.id).second) throw ValidationError(join(p, "id"), "duplicate order id " + o.id);
    o.deadline_s = yaml::required<double>(n, "deadline_s", p);
    const auto reqs = n["requirements"];
    if (!reqs || !reqs.IsSequence() || reqs.size() == 0)
      throw ValidationError(join(p, "requirements"), "must be a non-empty list");
    for (std::size_t r = 0; r < reqs.size(); ++r) {
      const std::string rp = join(p, "requirements[" + std::to_string(r) + "]");
      planner::Requirement req;
      if (reqs[r].IsSequence()) {
        for (std::size_t a = 0; a < reqs[r].size(); ++a) req.alternatives.push_back(yaml::as<int>(reqs[r][a], rp));
      } else {
        req.alternatives.push_back(yaml::as<int>(reqs[r], rp));
      }
      if (req.alternatives.empty()) throw ValidationError(rp, "needs at least one module type");
      for (int d : req.alternatives)
        if (d < 1 || d > 9) throw ValidationError(rp, "module digits are 1..9");
      o.goal.requirements.push_back(std::move(req));
    }
    if (n["layout"]) o.layout = planner::AssemblyState::parse(yaml::as<std::string>(n["layout"], join(p, "layout")));
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Order> load_orders(const std::filesystem::path& path) {
  return orders_from_yaml(yaml::parse_file(path.string()), path.filename().string());
}

std::vector<cell::FaultSpec> load_faults(const std::filesystem::path& path) {
  return cell::parse_fault_script(yaml::parse_file(path.string()), path.filename().string());
}

nlohmann::json yaml_to_json(const YAML::Node& node) {
  if (!node || node.IsNull()) return nullptr;
  if (node.IsSequence()) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& item : node) a.push_back(yaml_to_json(item));
    return a;
  }
  if (node.IsMap()) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& kv : node) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
    return o;
  }
  const std::string s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return s;
}

std::vector<OperatorScript> operator_scripts_from_yaml(const YAML::Node& root, const std::string& path) {
  const YAML::Node list = root.IsMap() ? root["sessions"] : root;
  if (!list || !list.IsSequence()) throw ParseError(path + ": expected a list of sessions");
  std::vector<OperatorScript> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto n = list[i];
    const std::string p = join(path, "sessions[" + std::to_string(i) + "]");
    if (!n.IsMap()) throw ParseError(p + ": expected a mapping");
    OperatorScript s;
    if (n["serial"]) s.serial = yaml::as<std::string>(n["serial"], join(p, "serial"));
    const auto cmds = n["commands"];
    if (!cmds || !cmds.IsSequence()) throw ParseError(join(p, "commands") + ": expected a list");
    try {
      s.commands = teleop::operator_script_from_json(yaml_to_json(cmds));
    } catch (const ParseError& e) {
      throw ParseError(join(p, "commands") + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<OperatorScript> load_operator_scripts(const std::filesystem::path& path) {
  return operator_scripts_from_yaml(yaml::parse_file(path.string()), path.filename().string());
}

}  // namespace orbitforge::twin
