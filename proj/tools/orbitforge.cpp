// orbitforge command line: campaigns, insertion training, serving, replay.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "orbitforge/common/hash.hpp"
#include "orbitforge/common/pnm.hpp"
#include "orbitforge/planner/export.hpp"
#include "orbitforge/qpolicy/training.hpp"
#include "orbitforge/twin/snapshot.hpp"
#include "orbitforge/twin/transport.hpp"
#include "orbitforge/twin/twin.hpp"

using namespace orbitforge;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kIncomplete = 1, kUsage = 2, kInputError = 3, kCorruptLog = 4 };

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string orders;
  std::string faults;
  std::string operator_script;
  std::string out = "out";
  std::string out_file;
  std::string bind = "127.0.0.1:7400";
  std::size_t episodes = 200;
  std::size_t eval = 100;
  std::string board_type;
  std::string log;
  std::string format = "dot";
  bool realtime = false;
  bool once = false;
};

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

std::uint64_t resolve_seed(const Options& o, const twin::TwinConfig& c) {
  if (o.seed) return *o.seed;
  if (c.seed) return *c.seed;
  throw ValidationError("seed", "no seed given (--seed, ORBITFORGE_SEED or config 'seed')");
}

std::vector<cell::FaultSpec> faults_of(const Options& o) {
  return o.faults.empty() ? std::vector<cell::FaultSpec>{} : twin::load_faults(o.faults);
}

std::vector<twin::OperatorScript> scripts_of(const Options& o) {
  return o.operator_script.empty() ? std::vector<twin::OperatorScript>{}
                                   : twin::load_operator_scripts(o.operator_script);
}

json campaign_summary(const twin::ProcessTwin& t, const twin::CampaignResult& r) {
  json s = twin::to_json(r);
  s["seed"] = t.seed();
  s["events"] = t.events().size();
  s["simulated_s"] = t.now();
  return s;
}

void write_artifacts(const std::filesystem::path& dir, const twin::ProcessTwin& t, const json& summary) {
  std::filesystem::create_directories(dir);
  const auto events = t.events();
  twin::write_log(dir / "events.jsonl", t.header(), events);
  write_text(dir / "metrics.json", twin::compute_metrics(events).dump(2) + "\n");
  write_text(dir / "summary.json", summary.dump(2) + "\n");
}

int cmd_run(const Options& o) {
  auto cfg = twin::load_twin_config(o.config);
  const auto seed = resolve_seed(o, cfg);
  const auto orders = twin::load_orders(o.orders);
  twin::ProcessTwin t(std::move(cfg), seed, faults_of(o));
  twin::ScriptedOperator op(scripts_of(o));
  const auto res = t.run_campaign(orders, op);
  const auto summary = campaign_summary(t, res);
  write_artifacts(o.out, t, summary);
  std::cout << summary.dump() << "\n";
  return res.all_completed ? kOk : kIncomplete;
}

int cmd_train(const Options& o) {
  const auto cfg = twin::load_twin_config(o.config);
  const auto seed = resolve_seed(o, cfg);
  Rng root(seed);
  json report = json::array();
  std::filesystem::create_directories(o.out);
  for (const auto& type : cfg.cell.board_types) {
    if (!o.board_type.empty() && type.id != o.board_type) continue;
    const auto& q = cfg.qpolicy;
    qpolicy::QTable table(type.id, q.side, q.step_mm, q.hyper);
    const qpolicy::InsertionScenario sc{{type.true_bias_mm, cfg.insertion.noise_sd_mm},
                                        cfg.geometry(),
                                        cfg.insertion.params,
                                        cfg.insertion.contact};
    Rng train_rng = root.fork("train/" + type.id);
    const auto stats = qpolicy::train(table, sc, o.episodes, train_rng);
    Rng eval_rng = root.fork("eval/" + type.id);
    const auto ok = qpolicy::evaluate_greedy(table, sc, o.eval, eval_rng);
    const auto g = table.greedy();
    write_text(std::filesystem::path(o.out) / ("qtable_" + type.id + ".json"),
               qpolicy::to_json(table).dump(2) + "\n");
    write_ppm(std::filesystem::path(o.out) / ("heatmap_" + type.id + ".ppm"), qpolicy::render_heatmap(table));
    report.push_back({{"board_type", type.id},
                      {"episodes", stats.episodes},
                      {"training_successes", stats.successes},
                      {"greedy_cell", {g.ix, g.iy}},
                      {"greedy_shift_mm", {table.shift_mm(g).x, table.shift_mm(g).y}},
                      {"eval_trials", o.eval},
                      {"eval_successes", ok}});
  }
  if (report.empty()) throw ValidationError("board_type", "no board type '" + o.board_type + "'");
  const json out = {{"seed", seed}, {"tables", report}};
  write_text(std::filesystem::path(o.out) / "training.json", out.dump(2) + "\n");
  std::cout << out.dump() << "\n";
  return kOk;
}

int cmd_serve(const Options& o) {
  auto cfg = twin::load_twin_config(o.config);
  const auto seed = resolve_seed(o, cfg);
  const auto orders = o.orders.empty() ? std::vector<twin::Order>{} : twin::load_orders(o.orders);
  twin::ProcessTwin t(std::move(cfg), seed, faults_of(o));
  twin::FrameServer server(t.bus(), "twin");
  server.start(twin::parse_bind(o.bind));
  std::cout << json{{"listening", server.address()}}.dump() << std::endl;

  std::unique_ptr<twin::OperatorSource> op;
  if (!o.operator_script.empty())
    op = std::make_unique<twin::ScriptedOperator>(scripts_of(o));
  else
    op = std::make_unique<twin::InboxOperator>(t, o.realtime, [] { return g_stop.load(); });
  const auto res = t.run_campaign(orders, *op);
  const auto summary = campaign_summary(t, res);
  write_artifacts(o.out, t, summary);
  std::cout << summary.dump() << std::endl;
  while (!o.once && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return res.all_completed ? kOk : kIncomplete;
}

int cmd_replay(const Options& o) {
  const auto log = twin::read_log(o.log);
  try {
    const auto state = twin::replay_log(log.events);
    const json out = {{"events", log.events.size()},
                      {"last_seq", state["last_seq"]},
                      {"state_hash", twin::state_hash(state)}};
    if (!o.out_file.empty()) write_text(o.out_file, state.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kOk;
  } catch (const twin::GapDetected& g) {
    std::cout << json{{"error", "gap"}, {"index", g.index()}, {"expected", g.expected()}, {"found", g.found()}}
                     .dump()
              << "\n";
  } catch (const twin::CorruptEvent& c) {
    std::cout << json{{"error", "corrupt"}, {"seq", c.seq()}, {"what", c.what()}}.dump() << "\n";
  }
  return kCorruptLog;
}

int cmd_report(const Options& o) {
  const auto log = twin::read_log(o.log);
  const auto m = twin::compute_metrics(log.events);
  if (!o.out_file.empty()) write_text(o.out_file, m.dump(2) + "\n");
  std::cout << m.dump(2) << "\n";
  return kOk;
}

int cmd_graph(const Options& o) {
  const auto cfg = twin::load_twin_config(o.config);
  std::vector<planner::ModuleType> types;
  for (const auto& t : cfg.cell.board_types) types.push_back({t.module_digit, t.span_slots, t.thermal_tag, std::nullopt});
  const auto g = planner::enumerate_states(cfg.cell.backplane.slot_count(), types, cfg.constraints);
  std::string text;
  if (o.format == "dot") {
    text = planner::to_dot(g);
  } else {
    json nodes = json::array();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      json edges = json::array();
      for (const auto& e : g.edges(i)) edges.push_back({{"action", planner::action_to_json(e.action)}, {"target", e.target}});
      nodes.push_back({{"id", i}, {"state", g.node(i).to_string()}, {"layer", g.layer(i)}, {"edges", edges}});
    }
    text = json{{"slots", g.slot_count()}, {"nodes", nodes}}.dump(2) + "\n";
  }
  if (!o.out_file.empty()) write_text(o.out_file, text);
  else std::cout << text;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbitforge: in-orbit satellite assembly simulation"};
  app.require_subcommand(1);
  Options o;

  const auto add_config = [&](CLI::App* s) {
    s->add_option("--config", o.config, "twin config YAML")->required()->envname("ORBITFORGE_CONFIG");
  };
  const auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "campaign seed (overrides the config)")->envname("ORBITFORGE_SEED");
  };
  const auto add_out = [&](CLI::App* s, const std::string& help) {
    s->add_option("--out", o.out, help)->envname("ORBITFORGE_OUT");
  };
  const auto add_faults = [&](CLI::App* s) {
    s->add_option("--faults", o.faults, "fault script YAML")->check(CLI::ExistingFile)->envname("ORBITFORGE_FAULTS");
    s->add_option("--operator", o.operator_script, "scripted operator sessions YAML")
        ->check(CLI::ExistingFile)
        ->envname("ORBITFORGE_OPERATOR");
  };

  auto* run = app.add_subcommand("run", "run a campaign headless and write its artifacts");
  add_config(run);
  add_seed(run);
  run->add_option("--orders", o.orders, "orders YAML")->required()->check(CLI::ExistingFile)->envname("ORBITFORGE_ORDERS");
  add_faults(run);
  add_out(run, "artifact directory");

  auto* train = app.add_subcommand("train-insertion", "train insertion Q-tables against the simulator");
  add_config(train);
  add_seed(train);
  train->add_option("--episodes", o.episodes, "training episodes per board type")->envname("ORBITFORGE_EPISODES");
  train->add_option("--eval", o.eval, "greedy evaluation insertions per board type");
  train->add_option("--board-type", o.board_type, "train only this board type");
  add_out(train, "output directory");

  auto* serve = app.add_subcommand("serve", "run a campaign with the frame transport open");
  add_config(serve);
  add_seed(serve);
  serve->add_option("--orders", o.orders, "orders YAML")->check(CLI::ExistingFile)->envname("ORBITFORGE_ORDERS");
  add_faults(serve);
  serve->add_option("--bind", o.bind, "host:port to listen on")->envname("ORBITFORGE_BIND");
  serve->add_flag("--realtime", o.realtime, "pace teleoperation sessions to the wall clock");
  serve->add_flag("--once", o.once, "exit when the campaign finishes");
  add_out(serve, "artifact directory");

  auto* replay = app.add_subcommand("replay", "rebuild the twin state from an event log");
  replay->add_option("--log", o.log, "events.jsonl")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", o.out_file, "write the reconstructed state here");

  auto* report = app.add_subcommand("report", "recompute metrics from an event log");
  report->add_option("--log", o.log, "events.jsonl")->required()->check(CLI::ExistingFile);
  report->add_option("--out", o.out_file, "write metrics here");

  auto* graph = app.add_subcommand("graph-export", "export the assembly transition graph");
  add_config(graph);
  graph->add_option("--format", o.format, "dot or json")->check(CLI::IsMember({"dot", "json"}));
  graph->add_option("--out", o.out_file, "output file (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*run) return cmd_run(o);
    if (*train) return cmd_train(o);
    if (*serve) return cmd_serve(o);
    if (*replay) return cmd_replay(o);
    if (*report) return cmd_report(o);
    if (*graph) return cmd_graph(o);
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", "validation"}, {"what", e.what()}}.dump() << "\n";
    return kInputError;
  } catch (const Error& e) {
    std::cerr << json{{"error", "input"}, {"what", e.what()}}.dump() << "\n";
    return kInputError;
  }
  return kUsage;
}
