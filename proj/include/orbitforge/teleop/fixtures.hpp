#pragma once

#include <optional>
#include <vector>

#include "orbitforge/common/error.hpp"
#include "orbitforge/teleop/pose.hpp"

namespace orbitforge::teleop {

class StaleDetection : public Error {
 public:
  using Error::Error;
};

struct VisionDetection {
  Pose target;
  double confidence = 0.0;
  double timestamp_s = 0.0;
};

struct ServoFilterParams {
  double time_constant_s = 0.05;
  double stale_timeout_s = 0.2;
};

struct ServoFilterState {
  std::optional<Pose> target;
};

/// Per-tick gain of the first-order filter.
inline double servo_gain(double dt, double time_constant) {
  return 1.0 - std::exp(-dt / time_constant);
}

/// One control tick of the detection filter: position moves by gain g toward
/// the detection, orientation by a slerp step of g. The first detection
/// initialises the state. Throws StaleDetection (state untouched) when the
/// detection is older than the timeout at `now`; ValidationError if dt <= 0.
Pose servo_filter(ServoFilterState& state, const VisionDetection& detection, double dt, double now,
                  const ServoFilterParams& p);

struct FixtureParams {
  ArbitrationParams arbitration;
  ServoFilterParams servo;
  double lookahead_m = 0.005;
  double alpha_rate_per_s = 2.0;  // slew limit of the blend schedule
  double v_max_m_s = 0.05;        // limit on target motion per tick
  double omega_max_rad_s = 1.0;
  Vec6 stiffness = (Vec6() << 500, 500, 500, 2, 2, 2).finished();
  Vec6 damping = (Vec6() << 20, 20, 20, 0.05, 0.05, 0.05).finished();

  void validate() const;
};

struct FixtureState {
  std::vector<Pose> path;
  std::optional<Pose> servo_target;
  Vec3 vision_offset = Vec3::Zero();  // servo target minus path end
  double alpha = 0.0;
  double visibility = 0.0;
  bool stale = false;
  std::optional<Pose> target;  // last emitted blended target
};

/// Position-based guide along a path blended with a visual-servoing target.
/// The emitted target is slew-limited, so it never moves faster than
/// v_max / omega_max whatever the inputs do.
class VirtualFixtures {
 public:
  VirtualFixtures(std::vector<Pose> path, FixtureParams params);

  /// `latest` is the newest detection received so far, if any.
  const Pose& tick(const Pose& tool, const std::optional<VisionDetection>& latest, double now,
                   double dt);

  Vec6 wrench(const Pose& tool, const Vec6& velocity) const;

  const FixtureState& state() const { return state_; }
  const FixtureParams& params() const { return params_; }

 private:
  FixtureParams params_;
  FixtureState state_;
  ServoFilterState filter_;
};

}  // namespace orbitforge::teleop
