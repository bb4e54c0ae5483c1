#include "orbitforge/electrical/devboard.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace orbitforge::electrical {

using cell::FaultKind;
using cell::SystemState;

DevBoardSim::DevBoardSim(cell::ElectricalProfile profile, std::vector<cell::FaultSpec> faults,
                         Rng rng)
    : profile_(std::move(profile)), faults_(std::move(faults)), rng_(rng) {}

std::vector<SystemState> DevBoardSim::declared_states() const {
  std::vector<SystemState> out;
  for (const auto& [s, draw] : profile_.states) out.push_back(s);
  return out;
}

bool DevBoardSim::responsive() const {
  return std::none_of(faults_.begin(), faults_.end(), [](const cell::FaultSpec& f) {
    return f.kind == FaultKind::ConnectorFault || f.kind == FaultKind::DeadBoard;
  });
}

void DevBoardSim::set_state(SystemState s) {
  if (!responsive())
    throw NoResponse("DEVBoard gave no acknowledgement for state " + std::string(to_string(s)));
  if (!profile_.states.count(s))
    throw ValidationError("state", "profile " + profile_.id + " does not declare " +
                                       std::string(to_string(s)));
  if (s == state_) return;
  transient_from_ = profile_.states.count(state_) ? std::optional(nominal_level()) : std::nullopt;
  state_ = s;
  level_index_ = 0;
}

double DevBoardSim::nominal_level() const {
  const auto& draw = profile_.states.at(state_);
  double level = draw.current_levels_a[level_index_ % draw.current_levels_a.size()];
  for (const auto& f : faults_)
    if (f.kind == FaultKind::ElectricalDrift && f.state == state_) level *= f.current_factor;
  return level;
}

double DevBoardSim::draw_current_a() {
  if (!responsive() || !profile_.states.count(state_)) return 0.0;
  const auto& draw = profile_.states.at(state_);
  double level = nominal_level();
  if (transient_from_) {
    level = 0.5 * (level + *transient_from_);
    transient_from_.reset();
  } else {
    ++level_index_;
  }
  return std::max(0.0, rng_.normal(level, draw.current_sd_a));
}

void DevBoardSim::reinsert() {
  std::erase_if(faults_, [](const cell::FaultSpec& f) {
    return f.kind == FaultKind::ConnectorFault && f.clears_on_reinsert;
  });
  state_ = SystemState::Deactivated;
  transient_from_.reset();
  level_index_ = 0;
}

PsuSim::PsuSim(DevBoardSim& load, Rng rng, Params params)
    : load_(&load), rng_(rng), params_(params) {}

std::string format_scpi_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void PsuSim::acquire() {
  if (!output_) {
    volt_ = 0.0;
    curr_ = 0.0;
    return;
  }
  volt_ = std::max(0.0, setpoint_v_ * (1.0 + rng_.normal(0.0, params_.voltage_noise_frac)));
  curr_ = load_->draw_current_a();
}

namespace {

std::string upper_trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

const std::string kUndefinedHeader = "ERR -113,\"Undefined header\"";
const std::string kDataOutOfRange = "ERR -222,\"Data out of range\"";

}  // namespace

std::string PsuSim::command(std::string_view raw) {
  const std::string line = upper_trimmed(raw);
  const auto space = line.find(' ');
  const std::string head = line.substr(0, space);
  const std::string arg = space == std::string::npos ? "" : upper_trimmed(line.substr(space + 1));

  if (head == "*IDN?") return "ORBITFORGE,PSU-SIM,0,1.0";
  if (head == ":SOUR:VOLT?") return format_scpi_number(setpoint_v_);
  if (head == ":SOUR:VOLT") {
    char* end = nullptr;
    const double v = std::strtod(arg.c_str(), &end);
    if (arg.empty() || *end != '\0' || !(v >= 0.0 && v <= 60.0)) return kDataOutOfRange;
    setpoint_v_ = v;
    return "OK";
  }
  if (head == ":OUTP?") return output_ ? "1" : "0";
  if (head == ":OUTP") {
    if (arg == "ON" || arg == "1") output_ = true;
    else if (arg == "OFF" || arg == "0") output_ = false;
    else return kDataOutOfRange;
    return "OK";
  }
  if (head == ":INIT") {
    acquire();
    return "OK";
  }
  const bool meas = head.rfind(":MEAS:", 0) == 0;
  const bool fetc = head.rfind(":FETC:", 0) == 0;
  if (meas || fetc) {
    if (meas) acquire();
    const std::string what = head.substr(6);
    if (what == "VOLT?") return format_scpi_number(volt_);
    if (what == "CURR?") return format_scpi_number(curr_);
    if (what == "POWE?") return format_scpi_number(volt_ * curr_);
  }
  return kUndefinedHeader;
}

}  // namespace orbitforge::electrical
