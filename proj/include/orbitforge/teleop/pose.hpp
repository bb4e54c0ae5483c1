#pragma once

#include <Eigen/Geometry>
#include <vector>

#include "json.hpp"

namespace orbitforge::teleop {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Quat = Eigen::Quaterniond;

/// Unit quaternion with non-negative scalar part.
Quat canonical(const Quat& q);

struct Pose {
  Vec3 position = Vec3::Zero();  // metres
  Quat orientation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : position(p), orientation(canonical(q)) {}
};

/// Shortest-arc interpolation, result canonicalised.
Quat slerp_shortest(const Quat& a, const Quat& b, double t);

/// Rotation vector theta * axis of q with theta in [0, pi]. At theta = pi the
/// axis sign is fixed so that its first component of magnitude > 1e-9 is
/// positive.
Vec3 rotation_vector(const Quat& q);

double angle_between(const Quat& a, const Quat& b);

nlohmann::json to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

/// Path point at (closest arclength + lookahead), clamped to [0, length].
/// Orientation interpolated between the bracketing waypoints. Throws
/// ValidationError for fewer than two waypoints.
Pose project_to_path(const std::vector<Pose>& path, const Pose& current, double lookahead);

/// Position lerp, orientation shortest-arc slerp. alpha in [0, 1].
Pose blend_fixtures(const Pose& a, const Pose& b, double alpha);

struct ArbitrationParams {
  double full_authority_radius_m = 0.005;
  double activation_radius_m = 0.03;
};

/// visibility * ramp(distance); ramp is 1 inside the full-authority radius,
/// 0 beyond the activation radius and linear between.
double arbitration(double distance, double visibility, const ArbitrationParams& p);

/// K∘e − D∘v with e = (target.p − current.p, rotation_vector(target.q ⊗ current.q⁻¹)).
/// Force first, torque second.
Vec6 impedance_wrench(const Pose& target, const Pose& current, const Vec6& velocity,
                      const Vec6& stiffness, const Vec6& damping);

}  // namespace orbitforge::teleop
