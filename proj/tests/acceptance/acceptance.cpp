// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "label_oracle.hpp"
#include "lof_oracle.hpp"
#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/electrical/board_test.hpp"
#include "orbitforge/electrical/devboard.hpp"
#include "orbitforge/electrical/lof.hpp"
#include "orbitforge/optical/contours.hpp"
#include "orbitforge/optical/oracle.hpp"
#include "orbitforge/optical/pins.hpp"
#include "orbitforge/planner/transition_graph.hpp"
#include "orbitforge/qpolicy/training.hpp"
#include "orbitforge/teleop/fixtures.hpp"
#include "orbitforge/teleop/pose.hpp"
#include "orbitforge/twin/config.hpp"
#include "orbitforge/twin/snapshot.hpp"
#include "orbitforge/twin/twin.hpp"
#include "state_oracle.hpp"

using namespace orbitforge;

namespace {

using Clock = std::chrono::steady_clock;

std::string fixture(const std::string& name) { return std::string(ORBITFORGE_FIXTURES) + "/" + name; }

const cell::CellConfig& cell3() {
  static const cell::CellConfig c = cell::load_cell_config(fixture("cell_3slot.yaml"));
  return c;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

// ---------------------------------------------------------------------------

void state_space(Outcome& o) {
  using namespace planner;
  const auto t0 = Clock::now();
  const std::vector<ModuleType> two{{1, 1, "", std::nullopt}, {2, 1, "", std::nullopt}};
  o.expect(enumerate_states(2, two, {}).node_count() == 9, "2x2 != 9");

  std::mt19937 gen(97);
  const std::vector<std::string> tags{"", "hot", "cold"};
  int mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = gen() % 5;
    const int m = 1 + static_cast<int>(gen() % 3);
    std::vector<ModuleType> types;
    for (int d = 1; d <= m; ++d) {
      ModuleType t{d, 1 + static_cast<int>(gen() % 2), tags[gen() % tags.size()], std::nullopt};
      if (gen() % 3 == 0) t.max_count = static_cast<int>(gen() % 3);
      types.push_back(t);
    }
    ConstraintSet cs;
    if (gen() % 2) cs.forbidden_adjacent.push_back({"hot", "hot"});
    mismatches += enumerate_states(n, types, cs).node_count() != oracle::count_states(n, types, cs);
  }
  const double dt = seconds_since(t0);
  o.expect(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  o.expect(dt < 1.0, "took " + std::to_string(dt) + " s");
  o.detail << " 300 random instances, " << dt << " s";
}

void insertion_robustness(Outcome& o) {
  const auto t0 = Clock::now();
  int good_runs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    qpolicy::QTable table("acc");
    qpolicy::InsertionScenario s;
    s.misalignment.true_bias_mm = table.shift_mm(table.cell(rng.index(table.size())));
    qpolicy::train(table, s, 200, rng);
    good_runs += qpolicy::evaluate_greedy(table, s, 100, rng) == 100;
  }
  const double dt = seconds_since(t0);
  o.expect(good_runs >= 95, std::to_string(good_runs) + "/100 runs perfect");
  o.expect(dt < 30.0, "took " + std::to_string(dt) + " s");
  o.detail << " " << good_runs << "/100 runs at 100/100, " << dt << " s";
}

void q_recurrence(Outcome& o) {
  double worst = 0.0;
  for (double alpha : {0.01, 0.1, 0.5, 0.9}) {
    for (double r : {-1.3, 0.0, 0.42, 1.0}) {
      qpolicy::QTable t("acc", 5, 0.25, qpolicy::Hyperparams{0.1, alpha, 1.0});
      for (int step = 1; step <= 500; ++step) {
        qpolicy::update_value(t, {1, 3}, r);
        const double closed = r + std::pow(1.0 - alpha, step) * (1.0 - r);
        worst = std::max(worst, std::abs(t.stats({1, 3}).value - closed));
      }
    }
  }
  o.expect(worst <= 1e-12, "worst " + std::to_string(worst));
  o.detail << " worst deviation " << worst;
}

void lof_checks(Outcome& o) {
  using namespace electrical;
  Rng rng(777);
  double worst = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t k = 1 + rng.index(10);
    const std::size_t n = k + 1 + rng.index(100 - k);
    std::vector<Feature> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    const LofModel m = lof_fit(pts, k);
    const Feature q{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5)};
    worst = std::max(worst, std::abs(lof_score(m, q) - oracle::lof_query(pts, q, k)));
    const std::size_t i = rng.index(n);
    worst = std::max(worst, std::abs(m.training_score(i) - oracle::lof_training(pts, i, k)));
  }
  o.expect(worst <= 1e-9, "oracle worst " + std::to_string(worst));

  TestParams p;
  p.k = 10;
  std::size_t readings = 0, fp_total = 0, missed = 0, worst_fp = 0;
  for (const auto& t : cell3().board_types) {
    const auto& ep = cell3().electrical_profiles.at(t.electrical_profile_id);
    const BoardProfile prof = train_profile(t, ep, p, Rng(500));
    for (const auto& [state, model] : prof.states) {
      for (double factor : {1.25, 1.5}) {
        cell::FaultSpec drift;
        drift.kind = cell::FaultKind::ElectricalDrift;
        drift.state = state;
        drift.current_factor = factor;
        DevBoardSim nominal_board(ep, {}, Rng(600)), drifted_board(ep, {drift}, Rng(700));
        PsuSim nominal_psu(nominal_board, Rng(601)), drifted_psu(drifted_board, Rng(701));
        for (PsuSim* psu : {&nominal_psu, &drifted_psu}) {
          psu->command(":SOUR:VOLT " + format_scpi_number(prof.voltage_v));
          psu->command(":OUTP ON");
        }
        ScpiChannel nominal = [&](std::string_view l) { return nominal_psu.command(l); };
        ScpiChannel drifted = [&](std::string_view l) { return drifted_psu.command(l); };
        double clock = 0.0;
        std::size_t fp = 0;
        for (const auto& r : sample_state(nominal, nominal_board, state, 1000, clock, 0.01))
          fp += lof_score(model.lof, model.features(r)) > p.threshold;
        for (const auto& r : sample_state(drifted, drifted_board, state, 1000, clock, 0.01))
          missed += lof_score(model.lof, model.features(r)) <= p.threshold;
        readings += 1000;
        fp_total += fp;
        worst_fp = std::max(worst_fp, fp);
      }
    }
  }
  o.expect(missed == 0, std::to_string(missed) + " drifted readings missed");
  o.expect(worst_fp <= 50, "worst FPR " + std::to_string(worst_fp / 10.0) + "%");
  o.detail << " oracle worst " << worst << ", recall " << 1.0 - static_cast<double>(missed) / readings
           << ", worst FPR " << worst_fp / 10.0 << "%";
}

void contour_checks(Outcome& o) {
  using namespace optical;
  Rng rng(31337);
  int mask_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Mask m(64, 64, 0);
    const int blobs = 1 + static_cast<int>(rng.index(8));
    for (int b = 0; b < blobs; ++b) {
      const std::size_t x0 = rng.index(64), y0 = rng.index(64);
      const std::size_t bw = 1 + rng.index(12), bh = 1 + rng.index(12);
      for (std::size_t y = y0; y < std::min<std::size_t>(64, y0 + bh); ++y)
        for (std::size_t x = x0; x < std::min<std::size_t>(64, x0 + bw); ++x) m.at(x, y) = 1;
    }
    const double density = 0.03 + 0.1 * rng.uniform();
    for (auto& v : m.data)
      if (rng.bernoulli(density)) v = static_cast<std::uint8_t>(1 - v);
    const auto got = extract_contours(m);
    const auto want = oracle::label_components(m);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].bbox == Rect{static_cast<double>(want[i].min_x), static_cast<double>(want[i].min_y),
                                 static_cast<double>(want[i].max_x - want[i].min_x + 1),
                                 static_cast<double>(want[i].max_y - want[i].min_y + 1)};
    mask_mismatch += !same;
  }
  o.expect(mask_mismatch == 0, std::to_string(mask_mismatch) + " masks disagree");

  const cell::FaultKind kinds[] = {cell::FaultKind::Solderball, cell::FaultKind::Tombstone,
                                   cell::FaultKind::Solderbridge};
  const cell::SurfaceClass classes[] = {cell::SurfaceClass::Solderball, cell::SurfaceClass::Tombstone,
                                        cell::SurfaceClass::Solderbridge};
  int found = 0;
  for (int board = 0; board < 200; ++board) {
    const auto& t = cell3().board_types[rng.index(cell3().board_types.size())];
    const std::size_t k = rng.index(3);
    cell::FaultSpec f;
    f.kind = kinds[k];
    const double w = rng.uniform(1.5, 5.0), h = rng.uniform(1.0, 3.0);
    f.region_mm = {rng.uniform(2.0, t.width_mm - w - 2.0), rng.uniform(2.0, t.height_mm - h - 2.0), w, h};
    const std::vector<cell::FaultSpec> faults{f};
    const auto out = generate_probability_maps(t, faults, OracleParams{}, rng);
    const DefectReport r = detect_defects(out.maps, ClassThresholds{});
    bool hit = false;
    for (const auto& d : r.defects)
      for (const auto& g : out.defects)
        hit = hit || (d.surface_class == classes[k] && g.surface_class == classes[k] &&
                      iou(d.contour.bbox, g.bbox_px) >= 0.25);
    found += hit;
  }
  o.expect(found >= 190, std::to_string(found) + "/200 defects found");
  o.detail << " " << 100 - mask_mismatch << "/100 masks match, " << found << "/200 defects found";
}

void pin_checks(Outcome& o) {
  using namespace optical;
  const PinGridSpec spec{2, 5, 1.0, {}, 0.05};
  std::vector<Vec2> grid;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 5; ++c) grid.push_back({static_cast<double>(c), static_cast<double>(r)});
  const PinReport full = inspect_pins(grid, spec);
  o.expect(full.deviation == 0.0 && full.pass, "complete grid");
  const std::vector<Vec2> missing(grid.begin() + 1, grid.end());
  const PinReport m = inspect_pins(missing, spec);
  o.expect(std::abs(m.deviation - 0.229) <= 0.001 && !m.pass, "missing corner");
  o.detail << " missing-corner deviation " << m.deviation;
}

void fixture_identities(Outcome& o) {
  using namespace teleop;
  Rng rng(11);
  const auto random_quat = [&] {
    const teleop::Vec3 axis = teleop::Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    return teleop::Quat(Eigen::AngleAxisd(rng.uniform(0, M_PI), axis));
  };
  bool blend_ok = true;
  for (int i = 0; i < 100; ++i) {
    const Pose a(teleop::Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), random_quat());
    const Pose b(teleop::Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), random_quat());
    const Pose p0 = blend_fixtures(a, b, 0.0), p1 = blend_fixtures(a, b, 1.0);
    blend_ok = blend_ok && p0.position == a.position && p0.orientation.coeffs() == a.orientation.coeffs() &&
               p1.position == b.position && p1.orientation.coeffs() == b.orientation.coeffs();
  }
  o.expect(blend_ok, "blend endpoints");

  // Ramp alpha in while the tool approaches an offset seat.
  const Pose seat(teleop::Vec3(0.2, 0.0, 0.04), teleop::Quat::Identity());
  const std::vector<Pose> path = {Pose(seat.position + teleop::Vec3(0, 0, 0.1), teleop::Quat::Identity()),
                                  Pose(seat.position + teleop::Vec3(0, 0, 0.001), teleop::Quat::Identity()), seat};
  FixtureParams fp;
  VirtualFixtures vf(path, fp);
  const Pose truth(seat.position + teleop::Vec3(0.0015, -0.001, 0), teleop::Quat(Eigen::AngleAxisd(0.04, teleop::Vec3::UnitZ())));
  Pose tool = path[0];
  const double dt = 1e-3;
  std::optional<VisionDetection> latest;
  std::optional<Pose> prev;
  bool speed_ok = true, ramped = false;
  for (int tick = 0; tick < 4000; ++tick) {
    const double now = tick * dt;
    tool.position += (seat.position - tool.position) * 0.002;
    if (tick % 33 == 0 && (tool.position - truth.position).norm() < 0.05)
      latest = VisionDetection{truth, 1.0, now};
    const Pose t = vf.tick(tool, latest, now, dt);
    if (prev) {
      speed_ok = speed_ok && (t.position - prev->position).norm() <= fp.v_max_m_s * dt &&
                 angle_between(t.orientation, prev->orientation) <= fp.omega_max_rad_s * dt + 1e-12;
    }
    ramped = ramped || (vf.state().alpha > 0.0 && vf.state().alpha < 1.0);
    prev = t;
  }
  o.expect(speed_ok, "speed limit");
  o.expect(ramped, "alpha never ramped");

  const Pose id(teleop::Vec3::Zero(), teleop::Quat::Identity());
  teleop::Vec6 k = teleop::Vec6::Zero();
  k[5] = 2.0;
  const teleop::Vec6 w = impedance_wrench(Pose(teleop::Vec3::Zero(), teleop::Quat(Eigen::AngleAxisd(M_PI / 2, teleop::Vec3::UnitZ()))), id,
                                  teleop::Vec6::Zero(), k, teleop::Vec6::Zero());
  o.expect(std::abs(w[5] - M_PI) <= 1e-12, "impedance torque " + std::to_string(w[5]));

  const double kr = 2.0;
  teleop::Vec6 kk;
  kk << 0, 0, 0, kr, kr, kr;
  const auto potential = [&](const Pose& target, const Pose& current) {
    const double th = rotation_vector(target.orientation * current.orientation.conjugate()).norm();
    return 0.5 * kr * th * th;
  };
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pose current(teleop::Vec3::Zero(), random_quat());
    const teleop::Vec3 axis = teleop::Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Pose target(teleop::Vec3::Zero(), teleop::Quat(Eigen::AngleAxisd(rng.uniform(0.0, 0.01), axis)) * current.orientation);
    const teleop::Vec6 tw = impedance_wrench(target, current, teleop::Vec6::Zero(), kk, teleop::Vec6::Zero());
    const double h = 1e-5;
    for (int ax = 0; ax < 3; ++ax) {
      const Pose plus(teleop::Vec3::Zero(), teleop::Quat(Eigen::AngleAxisd(h, teleop::Vec3::Unit(ax))) * current.orientation);
      const Pose minus(teleop::Vec3::Zero(), teleop::Quat(Eigen::AngleAxisd(-h, teleop::Vec3::Unit(ax))) * current.orientation);
      const double grad = (potential(target, plus) - potential(target, minus)) / (2 * h);
      worst = std::max(worst, std::abs(tw[3 + ax] + grad));
    }
  }
  o.expect(worst <= 1e-6, "finite difference " + std::to_string(worst));
  o.detail << " torque " << w[5] << ", finite-difference worst " << worst;
}

void determinism(Outcome& o) {
  const auto t0 = Clock::now();
  const auto run = [] {
    twin::ProcessTwin t(twin::load_twin_config(fixture("campaign.yaml")), 4242,
                        twin::load_faults(fixture("faults_campaign.yaml")));
    twin::ScriptedOperator op(twin::load_operator_scripts(fixture("operator_campaign.yaml")));
    const auto res = t.run_campaign(twin::load_orders(fixture("orders_campaign.yaml")), op);
    std::stringstream ss;
    twin::write_log(ss, t.header(), t.events());
    return std::make_pair(ss.str(), res);
  };
  const auto [a, ra] = run();
  const auto [b, rb] = run();
  o.expect(a == b, "logs differ");
  o.expect(ra.all_completed, "campaign incomplete");
  std::stringstream ss(a);
  const auto parsed = twin::read_log(ss);
  const auto replayed = twin::state_hash(twin::replay_log(parsed.events));
  o.expect(replayed == ra.final_hash, "replay hash differs");
  const double dt = seconds_since(t0);
  o.expect(dt < 60.0, "took " + std::to_string(dt) + " s");
  o.detail << " " << parsed.events.size() << " events, hash " << ra.final_hash.substr(0, 12) << ", " << dt
           << " s";
}

void escalation(Outcome& o) {
  auto cfg = twin::load_twin_config(fixture("campaign.yaml"));
  const int cap = cfg.retry_cap;
  twin::ProcessTwin t(std::move(cfg), 5, twin::load_faults(fixture("faults_escalation.yaml")));
  twin::Order order;
  order.id = "E";
  order.goal.requirements.push_back({{3}});
  order.deadline_s = 1e6;
  t.accept_order(order);
  auto& p = t.instantiate_product_twin(order);
  const auto r = t.run_production(p);
  if (!std::holds_alternative<twin::InterventionRequested>(r)) {
    o.expect(false, "no intervention");
    return;
  }
  int attempts = 0, fallbacks = 0;
  for (const auto& e : t.events())
    if (e.type == "insertion_attempt") {
      ++attempts;
      fallbacks += e.payload.at("fallback").get<bool>();
    }
  o.expect(fallbacks == cap && attempts == cap + 1, std::to_string(attempts) + " attempts");
  auto session = t.request_intervention(p, std::get<twin::InterventionRequested>(r));
  twin::ScriptedOperator op(twin::load_operator_scripts(fixture("operator_escalation.yaml")));
  t.resolve_intervention(p, op.drive(*session));
  o.expect(std::holds_alternative<twin::Completed>(t.run_production(p)), "order not completed");
  o.expect(t.snapshot()["orders"]["E"]["status"] == "Completed", "snapshot status");
  o.detail << " intervention after " << fallbacks << " fallbacks, order completed by nudges";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"state-space-count", state_space},
      {"insertion-robustness", insertion_robustness},
      {"q-recurrence", q_recurrence},
      {"lof-oracle-and-drift", lof_checks},
      {"contours-and-defects", contour_checks},
      {"pin-inspection", pin_checks},
      {"fixture-identities", fixture_identities},
      {"end-to-end-determinism", determinism},
      {"escalation", escalation},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("threw: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s %s:%s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
