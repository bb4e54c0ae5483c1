#include "orbitforge/teleop/pose.hpp"

#include <algorithm>
#include <cmath>

#include "orbitforge/common/error.hpp"

namespace orbitforge::teleop {

Quat canonical(const Quat& q) {
  Quat out = q;
  const double n = out.norm();
  if (std::abs(n - 1.0) > 1e-12) out.coeffs() /= n;
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Quat slerp_shortest(const Quat& a, const Quat& b, double t) { return canonical(a.slerp(t, b)); }

Vec3 rotation_vector(const Quat& q_in) {
  const Quat q = canonical(q_in);
  Vec3 v = q.vec();
  const double s = v.norm();
  if (s == 0.0) return Vec3::Zero();
  const double theta = 2.0 * std::atan2(s, q.w());
  if (q.w() == 0.0) {
    for (int i = 0; i < 3; ++i)
      if (std::abs(v[i]) > 1e-9) {
        if (v[i] < 0.0) v = -v;
        break;
      }
  }
  return v * (theta / s);
}

double angle_between(const Quat& a, const Quat& b) {
  return rotation_vector(b * a.conjugate()).norm();
}

nlohmann::json to_json(const Pose& p) {
  return {{"position", {p.position.x(), p.position.y(), p.position.z()}},
          {"orientation",
           {p.orientation.w(), p.orientation.x(), p.orientation.y(), p.orientation.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  try {
    const auto& pj = j.at("position");
    const auto& oj = j.at("orientation");
    return Pose(Vec3(pj.at(0).get<double>(), pj.at(1).get<double>(), pj.at(2).get<double>()),
                Quat(oj.at(0).get<double>(), oj.at(1).get<double>(), oj.at(2).get<double>(),
                     oj.at(3).get<double>()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pose: ") + e.what());
  }
}

Pose project_to_path(const std::vector<Pose>& path, const Pose& current, double lookahead) {
  if (path.size() < 2) throw ValidationError("path", "needs at least two waypoints");
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i)
    cum[i] = cum[i - 1] + (path[i].position - path[i - 1].position).norm();

  double best_d = INFINITY, best_s = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec3 a = path[i].position, ab = path[i + 1].position - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((current.position - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + t * ab - current.position).norm();
    if (d < best_d) {
      best_d = d;
      best_s = cum[i] + t * (cum[i + 1] - cum[i]);
    }
  }
  const double s = std::clamp(best_s + lookahead, 0.0, cum.back());
  std::size_t seg = 0;
  while (seg + 2 < path.size() && s > cum[seg + 1]) ++seg;
  const double len = cum[seg + 1] - cum[seg];
  const double t = len > 0.0 ? (s - cum[seg]) / len : 1.0;
  if (t == 0.0) return path[seg];
  if (t == 1.0) return path[seg + 1];
  return Pose(path[seg].position + t * (path[seg + 1].position - path[seg].position),
              slerp_shortest(path[seg].orientation, path[seg + 1].orientation, t));
}

Pose blend_fixtures(const Pose& a, const Pose& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha", "must lie in [0, 1]");
  Pose out;
  out.position = (1.0 - alpha) * a.position + alpha * b.position;
  out.orientation = slerp_shortest(a.orientation, b.orientation, alpha);
  return out;
}

double arbitration(double distance, double visibility, const ArbitrationParams& p) {
  const double vis = std::clamp(visibility, 0.0, 1.0);
  double ramp;
  if (distance <= p.full_authority_radius_m) ramp = 1.0;
  else if (distance >= p.activation_radius_m) ramp = 0.0;
  else
    ramp = (p.activation_radius_m - distance) / (p.activation_radius_m - p.full_authority_radius_m);
  return vis * ramp;
}

Vec6 impedance_wrench(const Pose& target, const Pose& current, const Vec6& velocity,
                      const Vec6& stiffness, const Vec6& damping) {
  Vec6 err;
  err.head<3>() = target.position - current.position;
  err.tail<3>() = rotation_vector(target.orientation * current.orientation.conjugate());
  return stiffness.cwiseProduct(err) - damping.cwiseProduct(velocity);
}

}  // namespace orbitforge::teleop
