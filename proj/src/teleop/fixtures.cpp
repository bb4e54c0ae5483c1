#include "orbitforge/teleop/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace orbitforge::teleop {

Pose servo_filter(ServoFilterState& state, const VisionDetection& d, double dt, double now,
                  const ServoFilterParams& p) {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  const double age = now - d.timestamp_s;
  if (age > p.stale_timeout_s)
    throw StaleDetection("latest detection is " + std::to_string(age) + " s old");
  if (!state.target) {
    state.target = d.target;
    return *state.target;
  }
  const double g = servo_gain(dt, p.time_constant_s);
  Pose& t = *state.target;
  t.position += g * (d.target.position - t.position);
  t.orientation = slerp_shortest(t.orientation, d.target.orientation, g);
  return t;
}

void FixtureParams::validate() const {
  if (!(arbitration.full_authority_radius_m >= 0.0 &&
        arbitration.activation_radius_m > arbitration.full_authority_radius_m))
    throw ValidationError("teleop.activation_radius_m", "must exceed the full-authority radius");
  if (!(servo.time_constant_s > 0.0))
    throw ValidationError("teleop.filter_time_constant_s", "must be positive");
  if (!(servo.stale_timeout_s > 0.0))
    throw ValidationError("teleop.stale_timeout_s", "must be positive");
  if (!(lookahead_m >= 0.0)) throw ValidationError("teleop.lookahead_m", "must be non-negative");
  if (!(alpha_rate_per_s > 0.0))
    throw ValidationError("teleop.alpha_rate_per_s", "must be positive");
  if (!(v_max_m_s > 0.0)) throw ValidationError("teleop.v_max_m_s", "must be positive");
  if (!(omega_max_rad_s > 0.0))
    throw ValidationError("teleop.omega_max_rad_s", "must be positive");
  if ((stiffness.array() < 0.0).any()) throw ValidationError("teleop.stiffness", "must be >= 0");
  if ((damping.array() < 0.0).any()) throw ValidationError("teleop.damping", "must be >= 0");
}

VirtualFixtures::VirtualFixtures(std::vector<Pose> path, FixtureParams params)
    : params_(std::move(params)) {
  params_.validate();
  if (path.size() < 2) throw ValidationError("path", "needs at least two waypoints");
  state_.path = std::move(path);
}

const Pose& VirtualFixtures::tick(const Pose& tool, const std::optional<VisionDetection>& latest,
                                  double now, double dt) {
  const Pose guide = project_to_path(state_.path, tool, params_.lookahead_m);

  state_.visibility = 0.0;
  state_.stale = false;
  if (latest) {
    try {
      state_.servo_target = servo_filter(filter_, *latest, dt, now, params_.servo);
      state_.visibility = latest->confidence;
    } catch (const StaleDetection&) {
      state_.stale = true;
    }
  }
  double goal = 0.0;
  if (state_.servo_target) {
    state_.vision_offset = state_.servo_target->position - state_.path.back().position;
    goal = arbitration((state_.servo_target->position - tool.position).norm(), state_.visibility,
                       params_.arbitration);
  }
  const double max_da = params_.alpha_rate_per_s * dt;
  state_.alpha = std::clamp(state_.alpha + std::clamp(goal - state_.alpha, -max_da, max_da), 0.0, 1.0);

  const Pose raw = blend_fixtures(guide, state_.servo_target.value_or(guide), state_.alpha);
  if (!state_.target) {
    state_.target = raw;
    return *state_.target;
  }
  Pose& t = *state_.target;
  const Vec3 dp = raw.position - t.position;
  const double max_dp = params_.v_max_m_s * dt;
  // Shrink the step a hair below the limit so rounding cannot overshoot it.
  t.position += dp.norm() > max_dp ? Vec3(dp * (max_dp * (1.0 - 1e-12) / dp.norm())) : dp;
  const double ang = angle_between(t.orientation, raw.orientation);
  const double max_ang = params_.omega_max_rad_s * dt;
  t.orientation = ang > max_ang ? slerp_shortest(t.orientation, raw.orientation, max_ang / ang)
                                : raw.orientation;
  return t;
}

Vec6 VirtualFixtures::wrench(const Pose& tool, const Vec6& velocity) const {
  if (!state_.target) return Vec6::Zero();
  return impedance_wrench(*state_.target, tool, velocity, params_.stiffness, params_.damping);
}

}  // namespace orbitforge::teleop
