#include "orbitforge/twin/twin.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <stdexcept>
#include <thread>

#include "orbitforge/cell/probe.hpp"
#include "orbitforge/common/hash.hpp"
#include "orbitforge/insertion/insertion.hpp"
#include "orbitforge/optical/contours.hpp"
#include "orbitforge/optical/image.hpp"
#include "orbitforge/optical/oracle.hpp"
#include "orbitforge/optical/pins.hpp"
#include "orbitforge/planner/export.hpp"
#include "orbitforge/qpolicy/training.hpp"
#include "orbitforge/twin/snapshot.hpp"

namespace orbitforge::twin {

using nlohmann::json;

std::string_view to_string(ProductStatus s) {
  switch (s) {
    case ProductStatus::Instantiated: return "Instantiated";
    case ProductStatus::PreChecked: return "PreChecked";
    case ProductStatus::InProduction: return "InProduction";
    case ProductStatus::Completed: return "Completed";
    case ProductStatus::Failed: return "Failed";
  }
  return "Failed";
}

namespace {

const Endpoint kEndpoints[] = {
    {"twin", "inproc://twin", "process twin"},
    {"planner", "inproc://planner", "assembly planner"},
    {"cell", "inproc://cell", "robot cell"},
    {"optical", "inproc://optical", "optical inspection"},
    {"qpolicy", "inproc://qpolicy", "insertion policy"},
    {"insertion", "inproc://insertion", "insertion controller"},
    {"electrical", "inproc://electrical", "electrical test"},
    {"psu", "inproc://psu", "power supply"},
    {"teleop", "inproc://teleop", "teleoperation"},
};

std::vector<planner::ModuleType> module_types(const cell::CellConfig& c) {
  std::vector<planner::ModuleType> out;
  for (const auto& t : c.board_types) out.push_back({t.module_digit, t.span_slots, t.thermal_tag, std::nullopt});
  return out;
}

bool match_requirements(const std::vector<planner::Requirement>& reqs, std::size_t i,
                        std::map<int, int>& avail) {
  if (i == reqs.size()) return true;
  for (int d : reqs[i].alternatives) {
    auto it = avail.find(d);
    if (it == avail.end() || it->second == 0) continue;
    --it->second;
    if (match_requirements(reqs, i + 1, avail)) return true;
    ++it->second;
  }
  return false;
}

// Same tie rule as QTable::greedy, skipping cells already tried.
std::optional<qpolicy::CellIndex> best_untried(const qpolicy::QTable& t,
                                               const std::set<qpolicy::CellIndex>& tried) {
  std::optional<qpolicy::CellIndex> best;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto c = t.cell(i);
    if (tried.count(c)) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double v = t.stats(c).value, bv = t.stats(*best).value;
    const int ra = t.radial2(c), rb = t.radial2(*best);
    if (v > bv || (v == bv && (ra < rb || (ra == rb && c < *best)))) best = c;
  }
  return best;
}

json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

json probe_json(const cell::ProbePresent& p) {
  return {{"orientation_deg", cell::degrees(p.orientation)},
          {"measured_width_mm", p.measured_width_mm},
          {"measured_connector_mm", p.measured_connector_mm}};
}

json attempt_summary(const json& attempt) {
  json s = attempt;
  s.erase("trace");
  return s;
}

}  // namespace

ScriptedOperator::ScriptedOperator(std::vector<OperatorScript> scripts)
    : scripts_(std::move(scripts)), used_(scripts_.size(), false) {}

teleop::SessionResult ScriptedOperator::drive(teleop::TeleopSession& session) {
  const auto& serial = session.context().serial;
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < scripts_.size() && !pick; ++i)
    if (!used_[i] && scripts_[i].serial == serial) pick = i;
  for (std::size_t i = 0; i < scripts_.size() && !pick; ++i)
    if (!used_[i] && !scripts_[i].serial) pick = i;
  if (!pick) return session.run_script({});
  used_[*pick] = true;
  return session.run_script(scripts_[*pick].commands);
}

InboxOperator::InboxOperator(ProcessTwin& twin, bool realtime, std::function<bool()> cancelled)
    : twin_(twin), realtime_(realtime), cancelled_(std::move(cancelled)) {}

teleop::SessionResult InboxOperator::drive(teleop::TeleopSession& session) {
  const double timeout = twin_.config().teleop.timeout_s;
  const double rate = twin_.config().teleop.control_rate_hz;
  const auto started = std::chrono::steady_clock::now();
  bool aborted = false;
  while (!session.result()) {
    if (session.now() >= timeout) throw teleop::SessionTimeout(session.now());
    if (!aborted && cancelled_ && cancelled_()) {
      session.post(teleop::Abort{});
      aborted = true;
    }
    while (auto c = twin_.take_operator_command()) session.post(*c);
    session.tick();
    // Sleep in 10 ms slices rather than per tick.
    if (realtime_ && session.ticks() % static_cast<std::uint64_t>(std::max(1.0, rate / 100.0)) == 0) {
      const auto due = started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(session.now()));
      std::this_thread::sleep_until(due);
    }
  }
  return *session.result();
}

json to_json(const OrderOutcome& o) {
  return {{"order_id", o.order_id}, {"status", o.status}, {"reason", o.reason}, {"product_id", o.product_id}};
}

json to_json(const CampaignResult& r) {
  json orders = json::array();
  for (const auto& o : r.orders) orders.push_back(to_json(o));
  return {{"orders", orders}, {"all_completed", r.all_completed}, {"final_state_hash", r.final_hash}};
}

ProcessTwin::ProcessTwin(TwinConfig config, std::uint64_t seed, std::vector<cell::FaultSpec> faults)
    : config_((config.validate(), std::move(config))), seed_(seed), root_(seed), state_(initial_state()) {
  const auto types = module_types(config_.cell);
  graph_ = planner::enumerate_states(config_.cell.backplane.slot_count(), types, config_.constraints);

  inventory_ = config_.cell.inventory;
  for (auto& f : faults) {
    auto it = std::find_if(inventory_.begin(), inventory_.end(),
                           [&](const cell::BoardInstance& b) { return b.serial == f.serial; });
    if (it == inventory_.end()) throw ValidationError("faults.serial", "no board with serial " + f.serial);
    it->injected_faults.push_back(f);
  }
  for (std::size_t i = 0; i < inventory_.size(); ++i) {
    const auto& b = inventory_[i];
    Stock s;
    s.index = i;
    s.in_tray = b.tray_slot.has_value();
    s.home_tray = b.tray_slot.value_or(0);
    stock_.emplace(b.serial, s);
  }

  bus_.set_retention("events", 0);
  for (const auto& e : kEndpoints) {
    bus_.register_endpoint(e);
    emit("twin", "endpoint_registered", to_json(e));
  }
  bus_.serve("psu", [this](const Message& m) -> json {
    if (!psu_) return {{"reply", "ERR -240,\"No load attached\""}};
    return {{"reply", psu_->command(m.body.at("line").get<std::string>())}};
  });
  bus_.serve("twin", [this](const Message& m) -> json {
    const std::string topic = m.body.value("topic", "");
    const json body = m.body.value("body", json::object());
    if (topic == "operator") {
      json cmd = body.is_object() ? body : json::object();
      cmd["type"] = m.type;
      try {
        return post_operator_command(teleop::command_from_json(cmd));
      } catch (const ParseError& e) {
        return {{"accepted", false}, {"reason", e.what()}};
      }
    }
    if (topic == "query") return query(m.type, body);
    return {{"error", "unsupported topic " + topic}};
  });

  json inv = json::array();
  for (const auto& b : inventory_) {
    json faults_j = json::array();
    for (const auto& f : b.injected_faults) {
      json fj = {{"kind", std::string(cell::to_string(f.kind))}};
      if (f.kind == cell::FaultKind::ConnectorFault) fj["clears_on_reinsert"] = f.clears_on_reinsert;
      if (f.kind == cell::FaultKind::MisalignmentBias) fj["bias_mm"] = vec2_json(f.bias_mm);
      if (f.kind == cell::FaultKind::ElectricalDrift) {
        fj["state"] = std::string(cell::to_string(f.state));
        fj["current_factor"] = f.current_factor;
      }
      faults_j.push_back(fj);
    }
    inv.push_back({{"serial", b.serial},
                   {"board_type", b.board_type},
                   {"location", b.tray_slot ? "tray:" + std::to_string(*b.tray_slot) : "tray"},
                   {"faults", faults_j}});
  }
  emit("twin", "campaign_started",
       {{"seed", seed_}, {"inventory", inv}, {"graph", {{"nodes", graph_.node_count()}, {"edges", graph_.edge_count()}}}});
}

ProcessTwin::~ProcessTwin() = default;

LogHeader ProcessTwin::header() const {
  LogHeader h;
  h.seed = seed_;
  h.config = to_json(config_);
  return h;
}

std::uint64_t ProcessTwin::emit(const std::string& source, const std::string& type, json payload,
                                std::optional<std::uint64_t> parent) {
  TwinEvent e;
  {
    std::lock_guard lock(state_mu_);
    e.seq = log_.size() + 1;
    e.timestamp_s = clock_s_;
    e.source = source;
    e.type = type;
    e.payload = std::move(payload);
    e.parent = parent;
    apply_event(state_, e);
    log_.push_back(e);
  }
  const auto seq = bus_.publish(source, "events", type, to_json(e));
  if (seq != e.seq) throw std::logic_error("event topic out of step with the log");
  return e.seq;
}

std::uint64_t ProcessTwin::emit_product(ProductTwin& p, const std::string& source,
                                        const std::string& type, json payload) {
  payload["product_id"] = p.id;
  const auto parent = p.last_event ? std::optional<std::uint64_t>(p.last_event) : std::nullopt;
  p.last_event = emit(source, type, std::move(payload), parent);
  return p.last_event;
}

Rng ProcessTwin::stream(const std::string& label) {
  return root_.fork(label + "#" + std::to_string(streams_++));
}

const cell::BoardInstance& ProcessTwin::board(const std::string& serial) const {
  return inventory_.at(stock_.at(serial).index);
}

Vec2 ProcessTwin::true_bias_mm(const cell::BoardInstance& b) const {
  Vec2 bias = config_.cell.board_type(b.board_type).true_bias_mm;
  for (const auto& f : b.injected_faults)
    if (f.kind == cell::FaultKind::MisalignmentBias) bias = bias + f.bias_mm;
  return bias;
}

void ProcessTwin::commission() {
  if (commissioned_) return;
  const auto& cell = config_.cell;
  json ids = json::array();
  for (const auto& t : cell.board_types) ids.push_back(t.id);
  const auto parent = emit("twin", "commissioning_started", {{"board_types", ids}});

  library_ = optical::build_reference_library(cell, config_.cell_path.parent_path());
  emit("optical", "reference_library_built", {{"board_types", ids}}, parent);

  // Profile fits are independent per board type; results are collected in
  // catalogue order so the log does not depend on completion order.
  std::vector<std::future<electrical::BoardProfile>> fits;
  for (const auto& t : cell.board_types) {
    const auto& prof = cell.electrical_profiles.at(t.electrical_profile_id);
    fits.push_back(std::async(std::launch::async, electrical::train_profile, t, prof,
                              config_.electrical, root_.fork("commission/lof/" + t.id)));
  }
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& t = cell.board_types[i];
    auto profile = fits[i].get();
    json states = json::array();
    for (const auto& [s, m] : profile.states)
      states.push_back({{"state", std::string(cell::to_string(s))},
                        {"median_current_a", m.median_current_a},
                        {"median_power_w", m.median_power_w},
                        {"training_points", m.lof.size()}});
    emit("electrical", "lof_profile_trained",
         {{"board_type", t.id},
          {"sha256", sha256_hex(electrical::profile_to_json(profile).dump())},
          {"states", states}},
         parent);
    profiles_[t.id] = std::move(profile);
  }

  const auto& q = config_.qpolicy;
  for (const auto& t : cell.board_types) {
    qpolicy::QTable table(t.id, q.side, q.step_mm, q.hyper);
    qpolicy::InsertionScenario sc{{t.true_bias_mm, config_.insertion.noise_sd_mm},
                                  config_.geometry(),
                                  config_.insertion.params,
                                  config_.insertion.contact};
    Rng rng = root_.fork("commission/qpolicy/" + t.id);
    const auto stats = qpolicy::train(table, sc, q.pretrain_episodes, rng);
    emit("qpolicy", "qtable_pretrained",
         {{"board_type", t.id},
          {"episodes", stats.episodes},
          {"successes", stats.successes},
          {"table", qpolicy::to_json(table)}},
         parent);
    qtables_[t.id] = std::move(table);
    insertion_history_[t.id] = {{"insertions", 0}, {"attempts", 0}, {"escalations", 0}};
  }
  commissioned_ = true;
}

std::map<int, int> ProcessTwin::usable_stock(const std::string& order_id) const {
  std::map<int, int> out;
  for (const auto& [serial, s] : stock_) {
    if (s.discarded || !s.in_tray) continue;
    if (s.reserved_by && *s.reserved_by != order_id) continue;
    ++out[config_.cell.board_type(inventory_[s.index].board_type).module_digit];
  }
  return out;
}

std::optional<std::string> ProcessTwin::pick_board(int digit, const std::string& order_id) const {
  std::optional<std::string> free;
  for (const auto& [serial, s] : stock_) {
    if (s.discarded || !s.in_tray) continue;
    if (config_.cell.board_type(inventory_[s.index].board_type).module_digit != digit) continue;
    if (s.reserved_by == order_id) return serial;
    if (!s.reserved_by && !free) free = serial;
  }
  return free;
}

std::vector<std::string> ProcessTwin::reserved_for(const std::string& order_id) const {
  std::vector<std::string> out;
  for (const auto& [serial, s] : stock_)
    if (s.reserved_by == order_id && s.in_tray && !s.discarded) out.push_back(serial);
  return out;
}

AcceptResult ProcessTwin::accept_order(const Order& order) {
  if (order.goal.requirements.empty()) throw ValidationError("order.requirements", "must not be empty");
  if (orders_.count(order.id)) throw ValidationError("order.id", "duplicate order id " + order.id);
  orders_.emplace(order.id, order);
  const auto received = emit("twin", "order_received", {{"order_id", order.id}, {"order", to_json(order)}});
  const auto reject = [&](const std::string& reason) -> AcceptResult {
    emit("twin", "order_rejected", {{"order_id", order.id}, {"reason", reason}}, received);
    return Rejected{reason};
  };

  auto avail = usable_stock("");
  {
    auto counts = avail;
    if (!match_requirements(order.goal.requirements, 0, counts)) return reject("material");
  }
  const auto& catalog = graph_.catalog();
  planner::AssemblyState config;
  std::size_t steps = 0;
  if (order.layout) {
    config = *order.layout;
    if (config.size() != graph_.slot_count() || !groups_of(config, catalog) ||
        !planner::satisfies_goal(config, order.goal, catalog))
      return reject("layout");
    for (const auto& [d, n] : planner::module_counts(config, catalog)) {
      if (avail[d] < n) return reject("material");
      steps += static_cast<std::size_t>(n);
    }
  } else {
    planner::ReplanOptions opts;
    opts.spares = avail;
    try {
      const auto plan = planner::replan(graph_, planner::AssemblyState(graph_.slot_count()), order.goal, opts);
      config = plan.goal;
      steps = plan.size();
    } catch (const planner::Unreachable&) {
      return reject("Unreachable");
    }
  }
  const double estimate = static_cast<double>(steps) * config_.durations.board_estimate_s;
  const double completion = clock_s_ + backlog_s_ + estimate;
  if (completion > order.deadline_s) return reject("time");

  Accepted acc{config, {}, estimate};
  const auto groups = *groups_of(config, catalog);
  for (const auto& g : groups) {
    const auto serial = pick_board(g.digit, "");
    if (!serial) return reject("material");  // unreachable after the count check
    stock_.at(*serial).reserved_by = order.id;
    acc.reserved.push_back(*serial);
  }
  backlog_s_ += estimate;
  accepted_[order.id] = acc;
  emit("twin", "order_accepted",
       {{"order_id", order.id},
        {"config", config.to_string()},
        {"reserved", acc.reserved},
        {"estimate_s", estimate},
        {"completion_s", completion}},
       received);
  return acc;
}

ProductTwin& ProcessTwin::instantiate_product_twin(const Order& order) {
  const auto it = accepted_.find(order.id);
  if (it == accepted_.end()) throw ValidationError("order.id", "order " + order.id + " was not accepted");
  const std::string id = "PT-" + order.id;
  if (products_.count(id)) throw ValidationError("order.id", "product twin already exists for " + order.id);
  auto p = std::make_unique<ProductTwin>();
  p->id = id;
  p->order_id = order.id;
  p->goal = order.goal;
  p->target = it->second.config;
  p->state = planner::AssemblyState(graph_.slot_count());
  p->slot_serials.assign(graph_.slot_count(), "");
  auto& ref = *p;
  products_[id] = std::move(p);
  emit_product(ref, "twin", "product_instantiated",
               {{"order_id", order.id}, {"target", ref.target.to_string()}, {"state", ref.state.to_string()}});

  const auto& catalog = graph_.catalog();
  std::string reason;
  if (!planner::satisfies_constraints(ref.target, catalog, config_.constraints))
    reason = "configuration violates planner constraints";
  else if (!graph_.find(ref.target))
    reason = "configuration not reachable in the transition graph";
  else if (!planner::satisfies_goal(ref.target, ref.goal, catalog))
    reason = "configuration does not meet the mission requirements";
  if (!reason.empty()) {
    const auto released = reserved_for(order.id);
    for (const auto& s : released) stock_.at(s).reserved_by.reset();
    backlog_s_ = std::max(0.0, backlog_s_ - it->second.estimate_s);
    ref.status = ProductStatus::Failed;
    ref.failure_reason = reason;
    emit_product(ref, "planner", "precheck_failed", {{"reason", reason}, {"released", released}});
    throw PreCheckFailed(id, reason);
  }
  ref.status = ProductStatus::PreChecked;
  emit_product(ref, "planner", "product_prechecked", {{"config", ref.target.to_string()}});
  ref.status = ProductStatus::InProduction;
  emit_product(ref, "twin", "production_started", {{"confirmed_config", ref.target.to_string()}});
  return ref;
}

void ProcessTwin::finish(ProductTwin& p, bool ok, const std::string& reason) {
  const auto released = reserved_for(p.order_id);
  for (const auto& s : released) stock_.at(s).reserved_by.reset();
  backlog_s_ = std::max(0.0, backlog_s_ - accepted_.at(p.order_id).estimate_s);
  p.status = ok ? ProductStatus::Completed : ProductStatus::Failed;
  p.failure_reason = reason;
  json payload = {{"state", p.state.to_string()}, {"released", released}};
  if (!ok) payload["reason"] = reason;
  emit_product(p, "twin", ok ? "product_completed" : "product_failed", payload);
}

ProductionResult ProcessTwin::run_production(ProductTwin& p) {
  if (p.status != ProductStatus::InProduction)
    throw ValidationError("product.status", "product " + p.id + " is not in production");
  if (pending_) throw ValidationError("product.status", "an intervention is still open");
  commission();
  const auto& catalog = graph_.catalog();
  for (;;) {
    if (planner::satisfies_goal(p.state, p.goal, catalog)) {
      finish(p, true, "");
      return Completed{};
    }
    planner::ReplanOptions opts;
    opts.spares = usable_stock(p.order_id);
    planner::PlanSequence plan;
    try {
      plan = planner::replan(graph_, p.state, p.goal, opts);
    } catch (const planner::Unreachable&) {
      finish(p, false, "Unreachable");
      return Failed{"Unreachable"};
    }
    json actions = json::array();
    for (const auto& a : plan.actions) actions.push_back(planner::action_to_json(a));
    p.target = plan.goal;
    emit_product(p, "planner", "plan_computed",
                 {{"start", p.state.to_string()}, {"goal", plan.goal.to_string()}, {"actions", actions}});
    if (plan.empty()) continue;
    const auto& a = plan.actions.front();
    if (a.kind == planner::ActionKind::Remove) {
      remove_board(p, a);
      continue;
    }
    if (insert_board(p, a) == BoardFate::Escalated) return InterventionRequested{pending_->context};
  }
}

std::string ProcessTwin::serial_for(const ProductTwin& p, int digit) {
  const auto serial = pick_board(digit, p.order_id);
  if (!serial) throw std::logic_error("planner scheduled a module without stock");
  stock_.at(*serial).reserved_by = p.order_id;
  return *serial;
}

ProcessTwin::BoardFate ProcessTwin::insert_board(ProductTwin& p, const planner::Action& a) {
  const auto serial = serial_for(p, a.module);
  auto& st = stock_.at(serial);
  auto& inst = inventory_[st.index];
  const auto& type = config_.cell.board_type(inst.board_type);
  BoardRecord rec;
  rec.serial = serial;
  rec.board_type = type.id;
  rec.slot = a.slot;
  p.boards[serial] = rec;
  emit_product(p, "twin", "board_selected",
               {{"serial", serial}, {"slot", a.slot + 1}, {"board_type", type.id}, {"tray_slot", st.home_tray}});

  // Probe and grip.
  Rng probe_rng = stream("probe/" + serial);
  clock_s_ += config_.durations.probe_s;
  cell::ProbeResult res;
  try {
    res = cell::probe_slot(config_.cell, inventory_, st.home_tray, type, probe_rng);
  } catch (const cell::AmbiguousProbe& e) {
    emit_product(p, "cell", "probe_result",
                 {{"serial", serial}, {"result", {{"error", e.what()}}}, {"duration_s", config_.durations.probe_s}});
    discard(p, serial, "probe", "ambiguous probe", false);
    return BoardFate::Discarded;
  }
  if (const auto* absent = std::get_if<cell::ProbeAbsent>(&res)) {
    emit_product(p, "cell", "probe_result",
                 {{"serial", serial},
                  {"result", {{"absent", true}, {"reached_span_mm", absent->reached_span_mm}}},
                  {"duration_s", config_.durations.probe_s}});
    discard(p, serial, "probe", "board absent", false);
    return BoardFate::Discarded;
  }
  const auto present = std::get<cell::ProbePresent>(res);
  p.boards[serial].probe = probe_json(present);
  const bool grip = cell::grip_feasible(type, present.orientation, config_.cell.gripper);
  if (grip) clock_s_ += config_.durations.grip_s;
  emit_product(p, "cell", "probe_result",
               {{"serial", serial},
                {"result", probe_json(present)},
                {"grip_feasible", grip},
                {"duration_s", config_.durations.probe_s + (grip ? config_.durations.grip_s : 0.0)}});
  if (!grip) {
    discard(p, serial, "probe", "grip infeasible", false);
    return BoardFate::Discarded;
  }
  inst.orientation = present.orientation;

  // Optical inspection happens on the board as it lies in the tray.
  Rng opt_rng = stream("optical/" + serial);
  const auto& oc = config_.optical;
  const auto image = optical::observe_overview(type, inst.orientation, inst.injected_faults);
  json out = json::object();
  std::string reason;
  try {
    const auto id = optical::identify_board(image, library_, oc.match_threshold);
    out["identification"] = {{"board_type", id.board_type},
                             {"orientation_deg", cell::degrees(id.orientation)},
                             {"score", id.score}};
    if (id.board_type != type.id) reason = "identity mismatch";
    else if (id.orientation != present.orientation) reason = "orientation mismatch";
  } catch (const optical::LowConfidence& e) {
    out["identification"] = {{"error", e.what()}, {"score", e.score()}};
    reason = "identification below threshold";
  }
  if (reason.empty()) {
    const int q = cell::quarter_turns(inst.orientation);
    const auto aligned = optical::rotate_quarter(image, (4 - q) % 4);
    const auto* ref = library_.find(type.id);
    const auto r1 = optical::stage1_residuals(aligned, ref->image, oc.stage1_tile_px,
                                              optical::overview_regions(type), oc.stage1_threshold);
    out["stage1"] = {{"max_residual", r1.max_residual}, {"flagged_regions", r1.flagged.size()}};
    if (!r1.flagged.empty()) {
      const auto maps = optical::generate_probability_maps(type, inst.injected_faults, oc.oracle, opt_rng);
      const auto rep = optical::detect_defects(maps.maps, oc.thresholds, oc.min_defect_area_px);
      out["stage2"] = optical::to_json(rep);
      if (!rep.pass) reason = "surface defect";
    } else {
      out["stage2"] = nullptr;
    }
    const auto pins = optical::observe_pins(type.pins, inst.injected_faults, oc.pin_noise_sd_mm, opt_rng);
    const auto pr = optical::inspect_pins(pins, optical::PinGridSpec::from(type.pins));
    out["pins"] = optical::to_json(pr);
    if (reason.empty() && !pr.pass) reason = "pin deviation";
  }
  const bool pass = reason.empty();
  clock_s_ += oc.match_threshold > 0 ? config_.durations.optical_s : 0.0;
  out["verdict"] = pass ? "Pass" : "Fail";
  p.boards[serial].optical = out;
  p.boards[serial].optical_passed = pass;
  emit_product(p, "optical", "optical_result",
               {{"serial", serial},
                {"verdict", pass ? "Pass" : "Fail"},
                {"reason", reason},
                {"report", out},
                {"duration_s", config_.durations.optical_s}});
  if (!pass) {
    discard(p, serial, "optical", reason, false);
    return BoardFate::Discarded;
  }

  const int flips = cell::flips_required(inst.orientation);
  if (flips > 0) {
    const double d = flips * config_.durations.flip_s;
    clock_s_ += d;
    inst.orientation = cell::Orientation::Deg0;
    emit_product(p, "cell", "board_flipped", {{"serial", serial}, {"flips", flips}, {"duration_s", d}});
  }
  st.in_tray = false;
  inst.tray_slot.reset();
  return insertion_stage(p, serial, a.slot);
}

ProcessTwin::BoardFate ProcessTwin::insertion_stage(ProductTwin& p, const std::string& serial,
                                                    std::size_t slot) {
  const auto& inst = board(serial);
  const auto& type = config_.cell.board_type(inst.board_type);
  qpolicy::QTable scratch = qtables_.at(type.id);
  const insertion::MisalignmentModel model{true_bias_mm(inst), config_.insertion.noise_sd_mm};
  const auto geometry = config_.geometry();
  const auto& params = config_.insertion.params;
  auto& history = insertion_history_.at(type.id);

  std::set<qpolicy::CellIndex> tried;
  json attempts = json::array();
  json last_trace;
  for (int attempt = 0; attempt <= config_.retry_cap; ++attempt) {
    const auto cell_idx = best_untried(scratch, tried);
    if (!cell_idx) break;
    tried.insert(*cell_idx);
    Rng rng = stream("insertion/" + serial);
    const Vec2 shift = scratch.shift_mm(*cell_idx);
    const auto trace = insertion::simulate_descent(shift, model, geometry, params, rng, config_.insertion.contact);
    const auto outcome = insertion::classify_trace(trace, params);
    const double reward = qpolicy::compute_reward(trace, outcome, scratch.hyperparams(), params);
    qpolicy::update_value(scratch, *cell_idx, reward);
    clock_s_ += config_.durations.insertion_attempt_s;
    history["attempts"] = history["attempts"].get<int>() + 1;
    json a = {{"serial", serial},
              {"attempt", attempt + 1},
              {"mode", "autonomous"},
              {"fallback", attempt > 0},
              {"cell", {cell_idx->ix, cell_idx->iy}},
              {"shift_mm", vec2_json(shift)},
              {"contact", std::string(insertion::to_string(outcome.contact))},
              {"action", std::string(insertion::to_string(outcome.action))},
              {"peak_force_n", trace.peak_force_n()},
              {"reward", reward},
              {"trace", insertion::to_json(trace)},
              {"duration_s", config_.durations.insertion_attempt_s}};
    emit_product(p, "insertion", "insertion_attempt", a);
    attempts.push_back(attempt_summary(a));
    last_trace = a["trace"];
    if (outcome.success()) {
      const double force = insertion::seat(config_.insertion.contact, rng);
      clock_s_ += config_.durations.seat_s;
      qtables_[type.id] = scratch;
      emit("qpolicy", "qtable_committed", {{"board_type", type.id}, {"table", qpolicy::to_json(scratch)}},
           p.last_event);
      history["insertions"] = history["insertions"].get<int>() + 1;
      p.boards[serial].insertion = {{"mode", "autonomous"}, {"attempts", attempt + 1}};
      emit_product(p, "insertion", "insertion_success",
                   {{"serial", serial},
                    {"slot", static_cast<int>(slot) + 1},
                    {"mode", "autonomous"},
                    {"attempts", attempt + 1},
                    {"seating_force_n", force},
                    {"duration_s", config_.durations.seat_s}});
      return electrical_stage(p, serial, slot);
    }
  }

  // Learning from this board is dropped: its failures say more about the
  // board than about the board type.
  emit("qpolicy", "qtable_discarded", {{"board_type", type.id}, {"serial", serial}}, p.last_event);
  history["escalations"] = history["escalations"].get<int>() + 1;
  const auto& nominal = config_.cell.backplane.slots.at(slot).nominal_pose_mm;
  teleop::InterventionContext ctx;
  ctx.serial = serial;
  ctx.board_type = type.id;
  ctx.slot = slot;
  ctx.expected_connector = teleop::Pose(teleop::Vec3(nominal.x, nominal.y, nominal.z) / 1000.0,
                                        teleop::Quat::Identity());
  const auto& technical = qtables_.at(type.id);
  const auto g = technical.greedy();
  ctx.details = {{"attempts", attempts},
                 {"last_trace", last_trace},
                 {"retry_cap", config_.retry_cap},
                 {"similar",
                  {{"board_type", type.id},
                   {"history", history},
                   {"greedy_cell", {g.ix, g.iy}},
                   {"greedy_value", technical.stats(g).value}}}};
  pending_ = PendingIntervention{p.id, serial, slot, ctx, clock_s_};
  emit_product(p, "twin", "intervention_requested",
               {{"serial", serial},
                {"slot", static_cast<int>(slot) + 1},
                {"attempts", attempts.size()},
                {"retry_cap", config_.retry_cap},
                {"context", teleop::to_json(ctx)}});
  return BoardFate::Escalated;
}

std::unique_ptr<teleop::TeleopSession> ProcessTwin::request_intervention(
    ProductTwin& p, const InterventionRequested& request) {
  if (!pending_ || pending_->product_id != p.id || pending_->serial != request.context.serial)
    throw ValidationError("intervention", "no matching escalation for " + p.id);
  const auto& inst = board(pending_->serial);
  const Vec2 bias = true_bias_mm(inst);
  teleop::Pose truth = request.context.expected_connector;
  truth.position += teleop::Vec3(bias.x, bias.y, 0.0) / 1000.0;
  auto session = std::make_unique<teleop::TeleopSession>(request.context, truth, config_.teleop,
                                                         stream("teleop/" + pending_->serial));
  const double start = pending_->started_s;
  const std::string pid = p.id;
  const std::string serial = pending_->serial;
  session->on_ack([this, start, pid, serial](const teleop::CommandAck& a) {
    clock_s_ = std::max(clock_s_, start + a.t_s);
    auto& prod = *products_.at(pid);
    emit_product(prod, "teleop", "operator_command", {{"serial", serial}, {"ack", teleop::to_json(a)}});
  });
  session->on_telemetry([this, pid](const teleop::Telemetry& t) {
    json j = teleop::to_json(t);
    j["product_id"] = pid;
    bus_.publish("teleop", "teleop.telemetry", "telemetry", j);
  });
  {
    std::lock_guard lock(inbox_mu_);
    inbox_.clear();
  }
  intervention_active_ = true;
  return session;
}

json ProcessTwin::post_operator_command(const teleop::OperatorCommand& c) {
  if (!intervention_active_) return {{"accepted", false}, {"reason", "no active intervention"}};
  std::lock_guard lock(inbox_mu_);
  if (inbox_.size() >= kInboxCapacity) return {{"accepted", false}, {"reason", "inbox full"}};
  inbox_.push_back(c);
  return {{"accepted", true}, {"queued", inbox_.size()}};
}

std::optional<teleop::OperatorCommand> ProcessTwin::take_operator_command() {
  std::lock_guard lock(inbox_mu_);
  if (inbox_.empty()) return std::nullopt;
  auto c = inbox_.front();
  inbox_.pop_front();
  return c;
}

void ProcessTwin::resolve_intervention(ProductTwin& p, const std::optional<teleop::SessionResult>& result) {
  if (!pending_ || pending_->product_id != p.id)
    throw ValidationError("intervention", "no open intervention for " + p.id);
  intervention_active_ = false;
  const auto pend = *pending_;
  pending_.reset();
  const auto& serial = pend.serial;
  if (!result) {
    clock_s_ = std::max(clock_s_, pend.started_s + config_.teleop.timeout_s);
    emit_product(p, "teleop", "intervention_resolved",
                 {{"serial", serial}, {"outcome", "timeout"}, {"duration_s", config_.teleop.timeout_s}});
    discard(p, serial, "teleop", "session timeout", true);
    return;
  }
  clock_s_ = std::max(clock_s_, pend.started_s + result->duration_s);
  const bool confirmed = result->outcome == teleop::SessionOutcome::Confirmed;
  emit_product(p, "teleop", "intervention_resolved",
               {{"serial", serial},
                {"outcome", confirmed ? "confirmed" : "aborted"},
                {"session", teleop::to_json(*result)},
                {"duration_s", result->duration_s}});
  if (!confirmed) {
    discard(p, serial, "teleop", "operator abort", true);
    return;
  }
  // The operator's final offset becomes the commanded insertion shift.
  const auto& inst = board(serial);
  const insertion::MisalignmentModel model{true_bias_mm(inst), config_.insertion.noise_sd_mm};
  const Vec2 offset{result->tool_offset_m.x() * 1000.0, result->tool_offset_m.y() * 1000.0};
  Rng rng = stream("insertion/" + serial);
  const auto& params = config_.insertion.params;
  const auto trace = insertion::simulate_descent(offset, model, config_.geometry(), params, rng,
                                                 config_.insertion.contact);
  const auto outcome = insertion::classify_trace(trace, params);
  const bool verified = outcome.success() && result->quarter_turns % 4 == 0;
  clock_s_ += config_.durations.insertion_attempt_s;
  emit_product(p, "insertion", "insertion_attempt",
               {{"serial", serial},
                {"attempt", 1},
                {"mode", "teleoperated"},
                {"fallback", false},
                {"shift_mm", vec2_json(offset)},
                {"contact", std::string(insertion::to_string(outcome.contact))},
                {"action", std::string(insertion::to_string(outcome.action))},
                {"peak_force_n", trace.peak_force_n()},
                {"trace", insertion::to_json(trace)},
                {"duration_s", config_.durations.insertion_attempt_s}});
  if (!verified) {
    discard(p, serial, "teleop", "seating not verified", true);
    return;
  }
  const double force = insertion::seat(config_.insertion.contact, rng);
  clock_s_ += config_.durations.seat_s;
  p.boards[serial].insertion = {{"mode", "teleoperated"}, {"attempts", 1}};
  emit_product(p, "insertion", "insertion_success",
               {{"serial", serial},
                {"slot", static_cast<int>(pend.slot) + 1},
                {"mode", "teleoperated"},
                {"attempts", 1},
                {"seating_force_n", force},
                {"duration_s", config_.durations.seat_s}});
  electrical_stage(p, serial, pend.slot);
}

ProcessTwin::BoardFate ProcessTwin::electrical_stage(ProductTwin& p, const std::string& serial,
                                                     std::size_t slot) {
  const auto& inst = board(serial);
  const auto& type = config_.cell.board_type(inst.board_type);
  electrical::DevBoardSim devboard(config_.cell.electrical_profiles.at(type.electrical_profile_id),
                                   inst.injected_faults, stream("devboard/" + serial));
  electrical::PsuSim psu(devboard, stream("psu/" + serial));
  psu_ = &psu;
  const electrical::ScpiChannel channel = [this](std::string_view line) {
    return bus_.request("electrical", "psu", "scpi", {{"line", std::string(line)}})
        .at("reply")
        .get<std::string>();
  };
  std::optional<electrical::ElectricalReport> report;
  for (int attempt = 0; attempt < 2 && !report; ++attempt) {
    try {
      report = electrical::run_board_test(inst, devboard, channel, profiles_.at(type.id),
                                          config_.electrical, clock_s_);
    } catch (const electrical::NoResponse& e) {
      emit_product(p, "electrical", "electrical_no_response",
                   {{"serial", serial}, {"attempt", attempt + 1}, {"error", e.what()}});
      if (attempt == 0) {
        devboard.reinsert();
        clock_s_ += config_.durations.reinsert_s;
        emit_product(p, "cell", "board_reinserted", {{"serial", serial}, {"duration_s", config_.durations.reinsert_s}});
      }
    }
  }
  psu_ = nullptr;
  if (!report) {
    discard(p, serial, "electrical", "no response", true);
    return BoardFate::Discarded;
  }
  clock_s_ += report->duration_s;
  const bool pass = report->pass;
  p.boards[serial].electrical = electrical::to_json(*report);
  p.boards[serial].electrical_passed = pass;
  emit_product(p, "electrical", "electrical_result",
               {{"serial", serial},
                {"verdict", pass ? "Pass" : "Fail"},
                {"report", electrical::to_json(*report)},
                {"duration_s", report->duration_s}});
  if (!pass) {
    discard(p, serial, "electrical", "electrical anomaly", true);
    return BoardFate::Discarded;
  }
  auto& rec = p.boards[serial];
  if (!rec.optical_passed || !rec.electrical_passed)
    throw std::logic_error("mount attempted without passed inspections");
  const int span = graph_.catalog().at(type.module_digit).span;
  for (int k = 0; k < span; ++k) {
    p.state.set(slot + k, type.module_digit);
    p.slot_serials[slot + k] = serial;
  }
  rec.outcome = "Mounted";
  emit_product(p, "twin", "board_mounted",
               {{"serial", serial}, {"slot", static_cast<int>(slot) + 1}, {"state", p.state.to_string()}});
  return BoardFate::Mounted;
}

void ProcessTwin::remove_board(ProductTwin& p, const planner::Action& a) {
  const std::string serial = p.slot_serials.at(a.slot);
  if (serial.empty()) throw std::logic_error("remove planned for an empty slot");
  const int span = graph_.catalog().at(a.module).span;
  for (int k = 0; k < span; ++k) {
    p.state.set(a.slot + k, 0);
    p.slot_serials[a.slot + k].clear();
  }
  clock_s_ += config_.durations.remove_s;
  auto& st = stock_.at(serial);
  st.in_tray = true;
  inventory_[st.index].tray_slot = st.home_tray;
  inventory_[st.index].orientation = cell::Orientation::Deg0;
  p.boards[serial].outcome = "Removed";
  emit_product(p, "cell", "board_removed",
               {{"serial", serial},
                {"slot", static_cast<int>(a.slot) + 1},
                {"state", p.state.to_string()},
                {"duration_s", config_.durations.remove_s}});
}

void ProcessTwin::discard(ProductTwin& p, const std::string& serial, const std::string& stage,
                          const std::string& reason, bool extracted) {
  auto& st = stock_.at(serial);
  st.discarded = true;
  st.in_tray = false;
  st.reserved_by.reset();
  inventory_[st.index].tray_slot.reset();
  inventory_[st.index].health = cell::BoardHealth::Discarded;
  p.boards[serial].outcome = "Discarded";
  const double d = extracted ? config_.durations.remove_s : 0.0;
  clock_s_ += d;
  emit_product(p, "cell", "board_discarded",
               {{"serial", serial}, {"stage", stage}, {"reason", reason}, {"duration_s", d}});
}

CampaignResult ProcessTwin::run_campaign(const std::vector<Order>& orders, OperatorSource& op) {
  commission();
  std::vector<const Order*> accepted;
  for (const auto& o : orders)
    if (std::holds_alternative<Accepted>(accept_order(o))) accepted.push_back(&o);
  for (const Order* o : accepted) {
    ProductTwin* p = nullptr;
    try {
      p = &instantiate_product_twin(*o);
    } catch (const PreCheckFailed&) {
      continue;
    }
    for (;;) {
      auto r = run_production(*p);
      const auto* esc = std::get_if<InterventionRequested>(&r);
      if (!esc) break;
      auto session = request_intervention(*p, *esc);
      std::optional<teleop::SessionResult> res;
      try {
        res = op.drive(*session);
      } catch (const teleop::SessionTimeout&) {
        res.reset();
      }
      resolve_intervention(*p, res);
    }
  }

  CampaignResult out;
  const json snap = snapshot();
  out.all_completed = !orders.empty();
  for (const auto& o : orders) {
    const auto& entry = snap["orders"][o.id];
    OrderOutcome oo;
    oo.order_id = o.id;
    oo.status = entry["status"].get<std::string>();
    oo.reason = entry["reason"].is_string() ? entry["reason"].get<std::string>() : "";
    oo.product_id = entry["product_id"].is_string() ? entry["product_id"].get<std::string>() : "";
    if (oo.status != "Completed") out.all_completed = false;
    out.orders.push_back(oo);
  }
  json fin = to_json(out);
  fin.erase("final_state_hash");
  fin["state_hash_before"] = state_hash();
  emit("twin", "campaign_finished", std::move(fin));
  out.final_hash = state_hash();
  return out;
}

std::vector<TwinEvent> ProcessTwin::events() const {
  std::lock_guard lock(state_mu_);
  return log_;
}

json ProcessTwin::snapshot() const {
  std::lock_guard lock(state_mu_);
  return state_;
}

std::string ProcessTwin::state_hash() const { return twin::state_hash(snapshot()); }

const ProductTwin* ProcessTwin::product(const std::string& id) const {
  const auto it = products_.find(id);
  return it == products_.end() ? nullptr : it->second.get();
}

const qpolicy::QTable& ProcessTwin::qtable(const std::string& board_type) const {
  const auto it = qtables_.find(board_type);
  if (it == qtables_.end()) throw ValidationError("board_type", "no Q-table for " + board_type);
  return it->second;
}

const electrical::BoardProfile& ProcessTwin::profile(const std::string& board_type) const {
  const auto it = profiles_.find(board_type);
  if (it == profiles_.end()) throw ValidationError("board_type", "no profile for " + board_type);
  return it->second;
}

json ProcessTwin::query(const std::string& type, const json& body) const {
  if (type == "snapshot") {
    const json s = snapshot();
    return {{"seq", s["last_seq"]}, {"hash", twin::state_hash(s)}, {"state", s}};
  }
  if (type == "heatmap") {
    const json tables = snapshot()["technical"]["qtables"];
    const auto one = [](const json& t) { return qpolicy::heatmap_message(qpolicy::qtable_from_json(t)); };
    if (body.is_object() && body.contains("board_type")) {
      const auto bt = body["board_type"].get<std::string>();
      if (!tables.contains(bt)) return {{"error", "no Q-table for " + bt}};
      return one(tables[bt]);
    }
    json all = json::object();
    for (const auto& [bt, t] : tables.items()) all[bt] = one(t);
    return {{"heatmaps", all}};
  }
  if (type == "plan_graph") {
    const json products = snapshot()["products"];
    json plans = json::object();
    for (const auto& [id, p] : products.items())
      if (!body.is_object() || !body.contains("product_id") || body["product_id"] == id)
        plans[id] = {{"state", p["state"]}, {"target", p["target"]}, {"plan", p["plan"]}};
    return {{"dot", planner::to_dot(graph_)},
            {"nodes", graph_.node_count()},
            {"edges", graph_.edge_count()},
            {"plans", plans}};
  }
  if (type == "endpoints") {
    json list = json::array();
    for (const auto& e : bus_.endpoints()) list.push_back(to_json(e));
    return {{"endpoints", list}};
  }
  return {{"error", "unknown query " + type}};
}

}  // namespace orbitforge::twin
