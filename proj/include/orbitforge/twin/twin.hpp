#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/rng.hpp"
#include "orbitforge/electrical/board_test.hpp"
#include "orbitforge/electrical/devboard.hpp"
#include "orbitforge/optical/identify.hpp"
#include "orbitforge/planner/plan.hpp"
#include "orbitforge/qpolicy/qtable.hpp"
#include "orbitforge/teleop/session.hpp"
#include "orbitforge/twin/bus.hpp"
#include "orbitforge/twin/config.hpp"
#include "orbitforge/twin/event.hpp"

namespace orbitforge::twin {

class PreCheckFailed : public Error {
 public:
  PreCheckFailed(std::string product_id, std::string reason)
      : Error("pre-production check failed for " + product_id + ": " + reason),
        product_id_(std::move(product_id)),
        reason_(std::move(reason)) {}
  const std::string& product_id() const { return product_id_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string product_id_;
  std::string reason_;
};

enum class ProductStatus { Instantiated, PreChecked, InProduction, Completed, Failed };

std::string_view to_string(ProductStatus s);

struct BoardRecord {
  std::string serial;
  std::string board_type;
  std::size_t slot = 0;
  nlohmann::json probe;  // null until recorded
  nlohmann::json optical;
  nlohmann::json insertion;
  nlohmann::json electrical;
  bool optical_passed = false;
  bool electrical_passed = false;
  std::string outcome;  // Mounted, Discarded, Removed; empty while in process
};

struct ProductTwin {
  std::string id;
  std::string order_id;
  planner::GoalSpec goal;
  planner::AssemblyState target;
  planner::AssemblyState state;
  ProductStatus status = ProductStatus::Instantiated;
  std::map<std::string, BoardRecord> boards;
  std::vector<std::string> slot_serials;  // mounted serial per slot, empty when free
  std::string failure_reason;
  std::uint64_t last_event = 0;  // causal parent for the next product event
};

struct Accepted {
  planner::AssemblyState config;
  std::vector<std::string> reserved;
  double estimate_s = 0.0;
};

struct Rejected {
  std::string reason;  // "material", "time", "Unreachable" or "layout"
};

using AcceptResult = std::variant<Accepted, Rejected>;

struct Completed {};
struct Failed {
  std::string reason;
};
struct InterventionRequested {
  teleop::InterventionContext context;
};

using ProductionResult = std::variant<Completed, Failed, InterventionRequested>;

/// Whoever resolves a teleoperation session.
class OperatorSource {
 public:
  virtual ~OperatorSource() = default;
  /// Ticks the session to a result; throws teleop::SessionTimeout.
  virtual teleop::SessionResult drive(teleop::TeleopSession& session) = 0;
};

/// Replays scripted sessions. Each session takes the first unused script
/// bound to its serial, else the first unused unbound one, else nothing
/// (which ends in a timeout).
class ScriptedOperator : public OperatorSource {
 public:
  explicit ScriptedOperator(std::vector<OperatorScript> scripts = {});
  teleop::SessionResult drive(teleop::TeleopSession& session) override;

 private:
  std::vector<OperatorScript> scripts_;
  std::vector<bool> used_;
};

class ProcessTwin;

/// Feeds a session from the twin's operator inbox (socket clients). With
/// `realtime` the control loop is paced to the wall clock so a human can
/// react; otherwise it runs as fast as it can. `cancelled` aborts the
/// session when it returns true.
class InboxOperator : public OperatorSource {
 public:
  InboxOperator(ProcessTwin& twin, bool realtime, std::function<bool()> cancelled = {});
  teleop::SessionResult drive(teleop::TeleopSession& session) override;

 private:
  ProcessTwin& twin_;
  bool realtime_;
  std::function<bool()> cancelled_;
};

struct OrderOutcome {
  std::string order_id;
  std::string status;  // Completed, Failed, Rejected, Returned
  std::string reason;
  std::string product_id;
};

nlohmann::json to_json(const OrderOutcome& o);

struct CampaignResult {
  std::vector<OrderOutcome> orders;
  bool all_completed = false;
  std::string final_hash;
};

nlohmann::json to_json(const CampaignResult& r);

/// Event-sourced process twin. Drives the cell simulators through the
/// production flow and records every step as a TwinEvent. All mutation
/// happens on the thread that calls the production methods; queries and
/// operator commands may arrive from other threads.
class ProcessTwin {
 public:
  static constexpr std::size_t kInboxCapacity = 64;

  ProcessTwin(TwinConfig config, std::uint64_t seed, std::vector<cell::FaultSpec> faults = {});
  ProcessTwin(const ProcessTwin&) = delete;
  ProcessTwin& operator=(const ProcessTwin&) = delete;
  ~ProcessTwin();

  const TwinConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Bus& bus() { return bus_; }
  LogHeader header() const;
  double now() const { return clock_s_; }
  const planner::TransitionGraph& graph() const { return graph_; }

  /// Reference library, LOF profiles (fitted concurrently) and Q-table
  /// pretraining. Idempotent.
  void commission();
  bool commissioned() const { return commissioned_; }

  AcceptResult accept_order(const Order& order);
  /// Throws PreCheckFailed (order returned) or ValidationError when the
  /// order was never accepted.
  ProductTwin& instantiate_product_twin(const Order& order);
  ProductionResult run_production(ProductTwin& product);
  /// Pauses the product and opens a session on the escalated board.
  std::unique_ptr<teleop::TeleopSession> request_intervention(ProductTwin& product,
                                                              const InterventionRequested& request);
  /// `result` empty means the session timed out.
  void resolve_intervention(ProductTwin& product,
                            const std::optional<teleop::SessionResult>& result);

  /// accept -> instantiate -> produce for every order, FIFO.
  CampaignResult run_campaign(const std::vector<Order>& orders, OperatorSource& op);

  std::vector<TwinEvent> events() const;
  nlohmann::json snapshot() const;
  std::string state_hash() const;
  /// "snapshot", "heatmap" {board_type?}, "plan_graph" {product_id?}, "endpoints".
  nlohmann::json query(const std::string& type, const nlohmann::json& body) const;

  const ProductTwin* product(const std::string& id) const;
  const qpolicy::QTable& qtable(const std::string& board_type) const;
  const electrical::BoardProfile& profile(const std::string& board_type) const;

  /// Operator channel. Commands are accepted only while a session is open.
  bool intervention_active() const { return intervention_active_; }
  nlohmann::json post_operator_command(const teleop::OperatorCommand& c);
  std::optional<teleop::OperatorCommand> take_operator_command();

 private:
  struct Stock {
    std::size_t index = 0;  // into inventory_
    std::size_t home_tray = 0;
    std::optional<std::string> reserved_by;
    bool discarded = false;
    bool in_tray = true;
  };
  struct PendingIntervention {
    std::string product_id;
    std::string serial;
    std::size_t slot = 0;
    teleop::InterventionContext context;
    double started_s = 0.0;
  };
  enum class BoardFate { Mounted, Discarded, Escalated };

  std::uint64_t emit(const std::string& source, const std::string& type, nlohmann::json payload,
                     std::optional<std::uint64_t> parent = std::nullopt);
  std::uint64_t emit_product(ProductTwin& p, const std::string& source, const std::string& type,
                             nlohmann::json payload);
  Rng stream(const std::string& label);

  std::map<int, int> usable_stock(const std::string& order_id) const;
  std::optional<std::string> pick_board(int digit, const std::string& order_id) const;
  std::vector<std::string> reserved_for(const std::string& order_id) const;
  std::string serial_for(const ProductTwin& p, int digit);

  BoardFate insert_board(ProductTwin& p, const planner::Action& a);
  BoardFate insertion_stage(ProductTwin& p, const std::string& serial, std::size_t slot);
  BoardFate electrical_stage(ProductTwin& p, const std::string& serial, std::size_t slot);
  void remove_board(ProductTwin& p, const planner::Action& a);
  void discard(ProductTwin& p, const std::string& serial, const std::string& stage,
               const std::string& reason, bool extracted);
  void finish(ProductTwin& p, bool ok, const std::string& reason);
  Vec2 true_bias_mm(const cell::BoardInstance& b) const;
  const cell::BoardInstance& board(const std::string& serial) const;

  TwinConfig config_;
  std::uint64_t seed_;
  Rng root_;
  std::uint64_t streams_ = 0;
  Bus bus_;
  double clock_s_ = 0.0;

  mutable std::mutex state_mu_;
  std::vector<TwinEvent> log_;
  nlohmann::json state_;

  planner::TransitionGraph graph_;
  std::vector<cell::BoardInstance> inventory_;
  std::map<std::string, Stock> stock_;
  std::map<std::string, Order> orders_;
  std::map<std::string, Accepted> accepted_;
  std::map<std::string, std::unique_ptr<ProductTwin>> products_;
  double backlog_s_ = 0.0;

  bool commissioned_ = false;
  optical::ReferenceLibrary library_;
  std::map<std::string, electrical::BoardProfile> profiles_;
  std::map<std::string, qpolicy::QTable> qtables_;
  std::map<std::string, nlohmann::json> insertion_history_;  // per board type

  std::optional<PendingIntervention> pending_;
  std::atomic<bool> intervention_active_{false};
  std::mutex inbox_mu_;
  std::deque<teleop::OperatorCommand> inbox_;
  electrical::PsuSim* psu_ = nullptr;
};

/// Insertion, detection and timing figures recomputed from an event log.
nlohmann::json compute_metrics(const std::vector<TwinEvent>& events);

}  // namespace orbitforge::twin
