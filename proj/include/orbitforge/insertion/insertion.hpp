#pragma once

#include <string_view>
#include <vector>

#include "json.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/rng.hpp"
#include "orbitforge/common/vec.hpp"

namespace orbitforge::insertion {

class MalformedTrace : public Error {
 public:
  using Error::Error;
};

/// Receiving connector geometry. Heights are measured above the seat.
struct Geometry {
  double clearance_mm = 0.05;   // radial play that still mates freely
  double lip_mm = 0.08;         // beyond this the tip lands on the casing
  double casing_top_mm = 3.0;
  double approach_mm = 1.0;     // descent starts this far above the casing
  double test_depth_mm = 0.5;   // test height sits this far below the casing top

  double start_height_mm() const { return casing_top_mm + approach_mm; }
  double test_height_mm() const { return casing_top_mm - test_depth_mm; }
};

struct MisalignmentModel {
  Vec2 true_bias_mm;
  double noise_sd_mm = 0.01;

  /// Chance that a wedged tip slides into the opening during descent.
  static double slip_probability(double radial_mm, const Geometry& g);
};

/// Spring constants of the contact model and the force sensor noise.
struct ContactModel {
  double k_z_n_per_mm = 6.0;          // axial, while wedged on the chamfer
  double k_wedge_n_per_mm = 4.0;      // lateral, per mm of overlap
  double k_collision_n_per_mm = 100.0;
  double sensor_sd_n = 0.05;          // per axis, clipped at 4 sd
  double seating_force_n = 10.0;
  double seating_sd_n = 0.2;
};

struct InsertionParams {
  double free_threshold_n = 0.5;
  double wedge_threshold_n = 2.0;
  double spike_tolerance_n = 5.0;
  double collision_threshold_n = 15.0;
  double descent_step_mm = 0.05;

  /// Throws ValidationError unless 0 < free < wedge <= spike < collision and step > 0.
  void validate() const;
};

struct ForceSample {
  double height_mm = 0.0;
  Vec3 force_n;
};

struct ForceTrace {
  std::vector<ForceSample> samples;
  double test_height_mm = 0.0;
  Vec2 commanded_offset_mm;
  double radial_misalignment_mm = 0.0;  // simulator ground truth, not seen by the classifier
  bool slipped = false;

  double peak_force_n() const;
};

enum class Contact { FreeFloat, SpikeThenFree, Wedged, Collision };
enum class Recommendation { Continue, RetractFallback, Abort };

struct ContactOutcome {
  Contact contact = Contact::FreeFloat;
  Recommendation action = Recommendation::Continue;

  bool success() const { return action == Recommendation::Continue; }
  friend bool operator==(const ContactOutcome&, const ContactOutcome&) = default;
};

std::string_view to_string(Contact c);
std::string_view to_string(Recommendation r);

/// Straight-down descent from the approach height to the test height at the
/// commanded shift. Stops early once the force exceeds the collision
/// threshold.
ForceTrace simulate_descent(Vec2 commanded_offset_mm, const MisalignmentModel& model,
                            const Geometry& geometry, const InsertionParams& params, Rng& rng,
                            const ContactModel& contact = {});

/// Throws MalformedTrace for an empty trace, non-decreasing heights, or a
/// trace that stops above the test height without a collision.
ContactOutcome classify_trace(const ForceTrace& trace, const InsertionParams& params);

/// Final push into the mating connector; always succeeds. Returns the force.
double seat(const ContactModel& contact, Rng& rng);

nlohmann::json to_json(const ForceTrace& trace);
ForceTrace trace_from_json(const nlohmann::json& j);

}  // namespace orbitforge::insertion
