#include "orbitforge/teleop/session.hpp"

#include <cmath>

namespace orbitforge::teleop {

namespace {

std::vector<Pose> approach_path(const InterventionContext& c) {
  const Vec3 up = Vec3::UnitZ();
  const Quat q = c.expected_connector.orientation;
  const Vec3 seat = c.expected_connector.position;
  return {Pose(seat + up * (c.approach_height_m + 0.02), q),
          Pose(seat + up * c.approach_height_m, q), Pose(seat, q)};
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Quat quarter_turn_z(int q) { return Quat(Eigen::AngleAxisd(q * M_PI / 2.0, Vec3::UnitZ())); }

}  // namespace

nlohmann::json to_json(const InterventionContext& c) {
  return {{"serial", c.serial},
          {"board_type", c.board_type},
          {"slot", c.slot},
          {"expected_connector", to_json(c.expected_connector)},
          {"approach_height_m", c.approach_height_m},
          {"details", c.details}};
}

void SessionParams::validate() const {
  if (!(control_rate_hz > 0.0)) throw ValidationError("teleop.control_rate_hz", "must be positive");
  if (!(telemetry_rate_hz > 0.0 && telemetry_rate_hz <= control_rate_hz))
    throw ValidationError("teleop.telemetry_rate_hz", "must lie in (0, control rate]");
  if (!(vision_rate_hz > 0.0 && vision_rate_hz <= control_rate_hz))
    throw ValidationError("teleop.vision_rate_hz", "must lie in (0, control rate]");
  if (!(vision_noise_m >= 0.0)) throw ValidationError("teleop.vision_noise_m", "must be >= 0");
  if (!(timeout_s > 0.0)) throw ValidationError("teleop.timeout_s", "must be positive");
  if (!(tool_speed_m_s > 0.0)) throw ValidationError("teleop.tool_speed_m_s", "must be positive");
  if (!(precision_m > 0.0)) throw ValidationError("teleop.precision_m", "must be positive");
  fixtures.validate();
}

nlohmann::json to_json(const CommandAck& a) {
  return {{"index", a.index},
          {"command", to_json(a.command)},
          {"accepted", a.accepted},
          {"reason", a.reason},
          {"t_s", a.t_s}};
}

nlohmann::json to_json(const Telemetry& t) {
  return {{"t_s", t.t_s},
          {"tool", to_json(t.tool)},
          {"target", to_json(t.target)},
          {"alpha", t.alpha},
          {"visibility", t.visibility},
          {"force_n", vec_json(t.wrench.head<3>())},
          {"torque_nm", vec_json(t.wrench.tail<3>())},
          {"gripped", t.gripped}};
}

nlohmann::json to_json(const SessionResult& r) {
  return {{"outcome", r.outcome == SessionOutcome::Confirmed ? "confirmed" : "aborted"},
          {"duration_s", r.duration_s},
          {"tool_offset_m", vec_json(r.tool_offset_m)},
          {"quarter_turns", r.quarter_turns},
          {"fixture_residual_m", r.fixture_residual_m},
          {"within_precision", r.within_precision},
          {"commands", r.commands}};
}

std::vector<TimedCommand> operator_script_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("operator script must be a list");
  std::vector<TimedCommand> out;
  double last = 0.0;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("at_s") || !item.at("at_s").is_number())
      throw ParseError("operator script entries need a numeric at_s");
    TimedCommand tc;
    tc.at_s = item.at("at_s").get<double>();
    if (!(tc.at_s >= last)) throw ParseError("operator script times must be non-decreasing");
    last = tc.at_s;
    nlohmann::json cmd = item;
    cmd.erase("at_s");
    tc.command = command_from_json(cmd);
    out.push_back(tc);
  }
  return out;
}

TeleopSession::TeleopSession(InterventionContext context, Pose true_connector,
                             SessionParams params, Rng rng)
    : context_(std::move(context)),
      true_connector_(true_connector),
      params_((params.validate(), std::move(params))),
      rng_(rng),
      fixtures_(approach_path(context_), params_.fixtures) {
  tool_ = approach_path(context_)[1];
  setpoint_ = tool_;
}

bool TeleopSession::post(const OperatorCommand& c) {
  if (result_ || expired_) return false;
  return commands_.push(c);
}

void TeleopSession::finish(SessionOutcome o) {
  SessionResult r;
  r.outcome = o;
  r.duration_s = now();
  r.tool_offset_m = tool_.position - context_.expected_connector.position;
  r.quarter_turns = quarter_turns_;
  if (const auto& t = fixtures_.state().target) {
    const Vec3 d = t->position - tool_.position;
    r.fixture_residual_m = std::hypot(d.x(), d.y());
  }
  r.within_precision = r.fixture_residual_m <= params_.precision_m;
  r.commands = received_;
  result_ = r;
}

void TeleopSession::handle(const OperatorCommand& c) {
  CommandAck ack;
  ack.index = ++received_;
  ack.command = c;
  ack.t_s = now();
  ack.accepted = true;
  if (const auto* n = std::get_if<Nudge>(&c)) {
    setpoint_.position += kNudgeStepM * Vec3(n->dx, n->dy, n->dz);
  } else if (const auto* r = std::get_if<RotateSnap>(&c)) {
    quarter_turns_ = ((quarter_turns_ + r->quarter_turns) % 4 + 4) % 4;
    setpoint_.orientation = canonical(quarter_turn_z(r->quarter_turns) * setpoint_.orientation);
  } else if (std::holds_alternative<Grip>(c)) {
    if (gripped_) {
      ack.accepted = false;
      ack.reason = "already gripped";
    }
    gripped_ = true;
  } else if (std::holds_alternative<Release>(c)) {
    if (!gripped_) {
      ack.accepted = false;
      ack.reason = "not gripped";
    }
    gripped_ = false;
  } else if (std::holds_alternative<ConfirmInsert>(c)) {
    if (!gripped_) {
      ack.accepted = false;
      ack.reason = "board not gripped";
    } else if (confirm_pending_) {
      ack.accepted = false;
      ack.reason = "confirm already pending";
    } else {
      confirm_pending_ = true;
    }
  } else if (std::holds_alternative<Abort>(c)) {
    if (on_ack_) on_ack_(ack);
    finish(SessionOutcome::Aborted);
    return;
  }
  if (on_ack_) on_ack_(ack);
}

void TeleopSession::simulate_vision() {
  const double rate_ratio = params_.vision_rate_hz / params_.control_rate_hz;
  const auto frame = [&](std::uint64_t t) {
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(t) * rate_ratio));
  };
  if (ticks_ != 0 && frame(ticks_) == frame(ticks_ - 1)) return;
  if ((tool_.position - true_connector_.position).norm() > params_.camera_range_m) return;
  VisionDetection d;
  d.target = true_connector_;
  d.target.position += Vec3(rng_.normal(0.0, params_.vision_noise_m),
                            rng_.normal(0.0, params_.vision_noise_m),
                            rng_.normal(0.0, params_.vision_noise_m));
  d.confidence = 1.0;
  d.timestamp_s = now();
  detections_.publish(d);
}

bool TeleopSession::settled() const {
  return (tool_.position - setpoint_.position).norm() == 0.0 &&
         angle_between(tool_.orientation, setpoint_.orientation) == 0.0;
}

void TeleopSession::tick() {
  if (result_ || expired_) return;
  const double dt = 1.0 / params_.control_rate_hz;
  while (auto c = commands_.pop()) {
    handle(*c);
    if (result_) return;
  }
  simulate_vision();
  if (auto d = detections_.take()) latest_ = *d;

  // Tool tracks the operator setpoint at bounded speed.
  const Pose prev = tool_;
  const Vec3 dp = setpoint_.position - tool_.position;
  const double max_dp = params_.tool_speed_m_s * dt;
  tool_.position = dp.norm() > max_dp ? Vec3(tool_.position + dp * (max_dp / dp.norm()))
                                      : setpoint_.position;
  const double ang = angle_between(tool_.orientation, setpoint_.orientation);
  const double max_ang = params_.fixtures.omega_max_rad_s * dt;
  tool_.orientation = ang > max_ang
                          ? slerp_shortest(tool_.orientation, setpoint_.orientation, max_ang / ang)
                          : setpoint_.orientation;
  velocity_.head<3>() = (tool_.position - prev.position) / dt;
  velocity_.tail<3>() = rotation_vector(tool_.orientation * prev.orientation.conjugate()) / dt;

  fixtures_.tick(tool_, latest_, now(), dt);

  const double tel_ratio = params_.telemetry_rate_hz / params_.control_rate_hz;
  const auto frame = [&](std::uint64_t t) {
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(t) * tel_ratio));
  };
  if (on_telemetry_ && (ticks_ == 0 || frame(ticks_) != frame(ticks_ - 1))) {
    Telemetry t;
    t.t_s = now();
    t.tool = tool_;
    t.target = *fixtures_.state().target;
    t.alpha = fixtures_.state().alpha;
    t.visibility = fixtures_.state().visibility;
    t.wrench = fixtures_.wrench(tool_, velocity_);
    t.gripped = gripped_;
    on_telemetry_(t);
  }
  ++ticks_;
  if (confirm_pending_ && settled()) finish(SessionOutcome::Confirmed);
}

SessionResult TeleopSession::run_script(const std::vector<TimedCommand>& script) {
  std::size_t next = 0;
  while (!result_) {
    if (now() >= params_.timeout_s) {
      expired_ = true;
      throw SessionTimeout(now());
    }
    while (next < script.size() && script[next].at_s <= now()) post(script[next++].command);
    tick();
  }
  return *result_;
}

SessionResult TeleopSession::run_until_resolved() { return run_script({}); }

}  // namespace orbitforge::teleop
