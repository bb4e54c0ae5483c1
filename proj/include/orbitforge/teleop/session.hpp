#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/rng.hpp"
#include "orbitforge/teleop/commands.hpp"
#include "orbitforge/teleop/fixtures.hpp"
#include "orbitforge/teleop/mailbox.hpp"

namespace orbitforge::teleop {

class SessionTimeout : public Error {
 public:
  explicit SessionTimeout(double elapsed_s)
      : Error("no operator resolution within " + std::to_string(elapsed_s) + " s"),
        elapsed_s_(elapsed_s) {}
  double elapsed_s() const { return elapsed_s_; }

 private:
  double elapsed_s_;
};

/// What the twin hands the operator when it escalates.
struct InterventionContext {
  std::string serial;
  std::string board_type;
  std::size_t slot = 0;
  Pose expected_connector;        // nominal seat pose, metres
  double approach_height_m = 0.001;
  nlohmann::json details = nlohmann::json::object();  // traces, prior attempts
};

nlohmann::json to_json(const InterventionContext& c);

struct SessionParams {
  double control_rate_hz = 1000.0;
  double telemetry_rate_hz = 30.0;
  double vision_rate_hz = 30.0;
  double vision_noise_m = 1e-5;
  double camera_range_m = 0.05;
  double timeout_s = 60.0;
  double tool_speed_m_s = 0.01;   // operator setpoint tracking
  double precision_m = 7e-4;      // success bound on the lateral fixture residual
  FixtureParams fixtures;

  void validate() const;
};

struct CommandAck {
  std::uint64_t index = 0;  // 1-based order of receipt
  OperatorCommand command;
  bool accepted = false;
  std::string reason;
  double t_s = 0.0;
};

nlohmann::json to_json(const CommandAck& a);

struct Telemetry {
  double t_s = 0.0;
  Pose tool;
  Pose target;
  double alpha = 0.0;
  double visibility = 0.0;
  Vec6 wrench = Vec6::Zero();
  bool gripped = true;
};

nlohmann::json to_json(const Telemetry& t);

enum class SessionOutcome { Confirmed, Aborted };

struct SessionResult {
  SessionOutcome outcome = SessionOutcome::Aborted;
  double duration_s = 0.0;
  Vec3 tool_offset_m = Vec3::Zero();  // final tool minus expected connector
  int quarter_turns = 0;
  double fixture_residual_m = 0.0;    // lateral |fixture target - tool|
  bool within_precision = false;
  std::size_t commands = 0;
};

nlohmann::json to_json(const SessionResult& r);

struct TimedCommand {
  double at_s = 0.0;  // relative to session start
  OperatorCommand command;
};

/// Parses [{"at_s": t, "type": ..., ...}, ...]; throws ParseError.
std::vector<TimedCommand> operator_script_from_json(const nlohmann::json& j);

/// Virtual gripper driven by operator increments with fixture guidance.
/// The control tick owns all state; commands come in through a FIFO ring and
/// detections through a latest-wins mailbox, so producers on other threads
/// never block it.
class TeleopSession {
 public:
  /// `true_connector` is simulation truth used to synthesise detections.
  TeleopSession(InterventionContext context, Pose true_connector, SessionParams params, Rng rng);

  /// Producer side. False once the session has ended or the ring is full.
  bool post(const OperatorCommand& c);
  void post_detection(const VisionDetection& d) { detections_.publish(d); }

  void on_ack(std::function<void(const CommandAck&)> f) { on_ack_ = std::move(f); }
  void on_telemetry(std::function<void(const Telemetry&)> f) { on_telemetry_ = std::move(f); }

  /// One control period.
  void tick();

  double now() const { return static_cast<double>(ticks_) / params_.control_rate_hz; }
  std::uint64_t ticks() const { return ticks_; }
  const std::optional<SessionResult>& result() const { return result_; }
  const Pose& tool() const { return tool_; }
  const VirtualFixtures& fixtures() const { return fixtures_; }
  const InterventionContext& context() const { return context_; }
  bool expired() const { return expired_; }

  /// Feeds the script at its timestamps and ticks until confirm or abort.
  /// Throws SessionTimeout once timeout_s passes without either.
  SessionResult run_script(const std::vector<TimedCommand>& script);

  /// Ticks until resolved; throws SessionTimeout.
  SessionResult run_until_resolved();

 private:
  void handle(const OperatorCommand& c);
  void simulate_vision();
  bool settled() const;
  void finish(SessionOutcome o);

  InterventionContext context_;
  Pose true_connector_;
  SessionParams params_;
  Rng rng_;
  VirtualFixtures fixtures_;
  SpscRing<OperatorCommand, 64> commands_;
  LatestMailbox<VisionDetection> detections_;
  std::optional<VisionDetection> latest_;
  std::function<void(const CommandAck&)> on_ack_;
  std::function<void(const Telemetry&)> on_telemetry_;

  Pose tool_;
  Pose setpoint_;
  Vec6 velocity_ = Vec6::Zero();
  bool gripped_ = true;
  bool confirm_pending_ = false;
  int quarter_turns_ = 0;
  std::uint64_t ticks_ = 0;
  std::uint64_t received_ = 0;
  bool expired_ = false;
  std::optional<SessionResult> result_;
};

}  // namespace orbitforge::teleop
