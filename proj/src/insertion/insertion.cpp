#include "orbitforge/insertion/insertion.hpp"

#include <algorithm>
#include <cmath>

namespace orbitforge::insertion {

namespace {

double clipped_noise(Rng& rng, double sd) {
  return std::clamp(rng.normal(), -4.0, 4.0) * sd;
}

Vec3 sensor(Vec3 f, const ContactModel& c, Rng& rng) {
  f.x += clipped_noise(rng, c.sensor_sd_n);
  f.y += clipped_noise(rng, c.sensor_sd_n);
  f.z += clipped_noise(rng, c.sensor_sd_n);
  return f;
}

}  // namespace

double MisalignmentModel::slip_probability(double r, const Geometry& g) {
  if (r <= g.clearance_mm) return 1.0;
  if (r > g.lip_mm) return 0.0;
  return std::max(0.0, 1.0 - (r - g.clearance_mm) / (g.lip_mm - g.clearance_mm));
}

void InsertionParams::validate() const {
  if (!(free_threshold_n > 0)) throw ValidationError("insertion.free_threshold_n", "must be positive");
  if (!(free_threshold_n < wedge_threshold_n))
    throw ValidationError("insertion.wedge_threshold_n", "must exceed the free threshold");
  if (!(wedge_threshold_n <= spike_tolerance_n))
    throw ValidationError("insertion.spike_tolerance_n", "must not be below the wedge threshold");
  if (!(spike_tolerance_n < collision_threshold_n))
    throw ValidationError("insertion.collision_threshold_n", "must exceed the spike tolerance");
  if (!(descent_step_mm > 0)) throw ValidationError("insertion.descent_step_mm", "must be positive");
}

double ForceTrace::peak_force_n() const {
  double peak = 0.0;
  for (const auto& s : samples) peak = std::max(peak, s.force_n.norm());
  return peak;
}

std::string_view to_string(Contact c) {
  switch (c) {
    case Contact::FreeFloat: return "FreeFloat";
    case Contact::SpikeThenFree: return "SpikeThenFree";
    case Contact::Wedged: return "Wedged";
    case Contact::Collision: return "Collision";
  }
  return "?";
}

std::string_view to_string(Recommendation r) {
  switch (r) {
    case Recommendation::Continue: return "Continue";
    case Recommendation::RetractFallback: return "RetractFallback";
    case Recommendation::Abort: return "Abort";
  }
  return "?";
}

ForceTrace simulate_descent(Vec2 commanded, const MisalignmentModel& model, const Geometry& g,
                            const InsertionParams& params, Rng& rng, const ContactModel& c) {
  ForceTrace trace;
  trace.test_height_mm = g.test_height_mm();
  trace.commanded_offset_mm = commanded;

  const Vec2 noise{rng.normal(0.0, model.noise_sd_mm), rng.normal(0.0, model.noise_sd_mm)};
  const Vec2 err = commanded - model.true_bias_mm + noise;
  const double r = err.norm();
  trace.radial_misalignment_mm = r;

  enum class Regime { Clear, Wedge, Collide } regime =
      r <= g.clearance_mm ? Regime::Clear : (r <= g.lip_mm ? Regime::Wedge : Regime::Collide);

  double slip_depth = 0.0;
  bool will_slip = false;
  if (regime == Regime::Wedge) {
    will_slip = rng.bernoulli(MisalignmentModel::slip_probability(r, g));
    if (will_slip) slip_depth = rng.uniform(0.0, g.test_depth_mm);
  }

  // Lateral reaction points back along the misalignment direction.
  const Vec2 dir = r > 0 ? (1.0 / r) * err : Vec2{};
  const double overlap = std::max(0.0, r - g.clearance_mm);
  const double severity = g.lip_mm > g.clearance_mm ? overlap / (g.lip_mm - g.clearance_mm) : 0.0;

  const int steps =
      static_cast<int>(std::lround((g.start_height_mm() - g.test_height_mm()) / params.descent_step_mm));
  for (int i = 0; i <= steps; ++i) {
    const double h = i == steps ? g.test_height_mm()
                                : g.start_height_mm() - params.descent_step_mm * i;
    const double depth = g.casing_top_mm - h;
    Vec3 f;
    if (depth > 0.0) {
      if (regime == Regime::Wedge && !(will_slip && depth > slip_depth)) {
        const double lateral = c.k_wedge_n_per_mm * overlap;
        f = {-lateral * dir.x, -lateral * dir.y, c.k_z_n_per_mm * depth * (1.0 + severity)};
      } else if (regime == Regime::Collide) {
        const double lateral = c.k_wedge_n_per_mm * overlap;
        f = {-lateral * dir.x, -lateral * dir.y, c.k_collision_n_per_mm * depth};
      }
    }
    if (regime == Regime::Wedge && will_slip && depth > slip_depth) trace.slipped = true;
    const ForceSample s{h, sensor(f, c, rng)};
    trace.samples.push_back(s);
    if (s.force_n.norm() > params.collision_threshold_n) break;
  }
  return trace;
}

ContactOutcome classify_trace(const ForceTrace& trace, const InsertionParams& params) {
  if (trace.samples.empty()) throw MalformedTrace("empty force trace");
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    if (!(trace.samples[i].height_mm < trace.samples[i - 1].height_mm))
      throw MalformedTrace("heights not strictly decreasing at sample " + std::to_string(i));

  for (const auto& s : trace.samples)
    if (s.force_n.norm() > params.collision_threshold_n)
      return {Contact::Collision, Recommendation::Abort};

  const ForceSample& last = trace.samples.back();
  if (last.height_mm > trace.test_height_mm + 1e-9)
    throw MalformedTrace("trace ends above the test height without a collision");

  if (last.force_n.norm() > params.wedge_threshold_n)
    return {Contact::Wedged, Recommendation::RetractFallback};

  double spike = 0.0;
  for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i)
    spike = std::max(spike, trace.samples[i].force_n.norm());
  // A spike beyond tolerance means the slip may have damaged pins: fall back.
  if (spike > params.spike_tolerance_n) return {Contact::Wedged, Recommendation::RetractFallback};
  if (spike > params.wedge_threshold_n) return {Contact::SpikeThenFree, Recommendation::Continue};
  return {Contact::FreeFloat, Recommendation::Continue};
}

double seat(const ContactModel& c, Rng& rng) {
  return c.seating_force_n + clipped_noise(rng, c.seating_sd_n);
}

nlohmann::json to_json(const ForceTrace& trace) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : trace.samples)
    samples.push_back({s.height_mm, s.force_n.x, s.force_n.y, s.force_n.z});
  return {{"test_height_mm", trace.test_height_mm},
          {"commanded_offset_mm", {trace.commanded_offset_mm.x, trace.commanded_offset_mm.y}},
          {"peak_force_n", trace.peak_force_n()},
          {"samples", std::move(samples)}};
}

ForceTrace trace_from_json(const nlohmann::json& j) {
  ForceTrace t;
  try {
    t.test_height_mm = j.at("test_height_mm").get<double>();
    const auto& off = j.at("commanded_offset_mm");
    t.commanded_offset_mm = {off.at(0).get<double>(), off.at(1).get<double>()};
    for (const auto& s : j.at("samples"))
      t.samples.push_back({s.at(0).get<double>(),
                           {s.at(1).get<double>(), s.at(2).get<double>(), s.at(3).get<double>()}});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("force trace: ") + e.what());
  }
  return t;
}

}  // namespace orbitforge::insertion
