#include <doctest.h>

#include <chrono>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "orbitforge/cell/yaml_io.hpp"
#include "orbitforge/twin/bus.hpp"
#include "orbitforge/twin/config.hpp"
#include "orbitforge/twin/event.hpp"
#include "orbitforge/twin/snapshot.hpp"
#include "orbitforge/twin/transport.hpp"
#include "orbitforge/twin/twin.hpp"

using namespace orbitforge;
using namespace orbitforge::twin;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ORBITFORGE_FIXTURES) / name;
}

TwinConfig campaign_config() { return load_twin_config(fixture("campaign.yaml")); }

Order make_order(std::string id, std::vector<std::vector<int>> reqs, double deadline = 1e6) {
  Order o;
  o.id = std::move(id);
  for (auto& r : reqs) o.goal.requirements.push_back({r});
  o.deadline_s = deadline;
  return o;
}

std::vector<TwinEvent> of_type(const std::vector<TwinEvent>& log, const std::string& type) {
  std::vector<TwinEvent> out;
  for (const auto& e : log)
    if (e.type == type) out.push_back(e);
  return out;
}

std::vector<cell::FaultSpec> one_fault(const std::string& yaml_text) {
  return cell::parse_fault_script(YAML::Load(yaml_text), "faults");
}

TwinEvent make_event(std::uint64_t seq, std::string type, json payload = json::object()) {
  TwinEvent e;
  e.seq = seq;
  e.timestamp_s = static_cast<double>(seq);
  e.source = "twin";
  e.type = std::move(type);
  e.payload = std::move(payload);
  return e;
}

// Every mounted board must have passed optical and electrical inspection
// for the same product earlier in the log.
void check_mount_invariant(const std::vector<TwinEvent>& log) {
  std::set<std::pair<std::string, std::string>> optical_pass, electrical_pass;
  for (const auto& e : log) {
    if (!e.payload.contains("product_id") || !e.payload.contains("serial")) continue;
    const auto key = std::make_pair(e.payload["product_id"].get<std::string>(),
                                    e.payload["serial"].get<std::string>());
    if (e.type == "optical_result" && e.payload["verdict"] == "Pass") optical_pass.insert(key);
    if (e.type == "electrical_result" && e.payload["verdict"] == "Pass") electrical_pass.insert(key);
    if (e.type == "board_mounted") {
      CHECK(optical_pass.count(key) == 1);
      CHECK(electrical_pass.count(key) == 1);
    }
  }
}

// Skips streamed topic frames until the reply to `seq` arrives.
std::optional<Frame> await_reply(FrameConnection& conn, std::uint64_t seq) {
  for (;;) {
    auto f = conn.receive(std::chrono::milliseconds(2000));
    if (!f || (f->topic == "reply" && f->seq == seq)) return f;
  }
}

}  // namespace

TEST_CASE("event json round trip") {
  TwinEvent e = make_event(7, "probe_result", {{"serial", "EPS-001"}, {"x", 1.5}});
  e.parent = 3;
  const auto back = event_from_json(to_json(e));
  CHECK(back == e);
  e.parent.reset();
  CHECK(to_json(e)["parent"].is_null());
  CHECK(event_from_json(to_json(e)) == e);
  CHECK_THROWS_AS(event_from_json(json{{"seq", 1}}), ParseError);
  CHECK_THROWS_AS(event_from_json(json::array()), ParseError);
}

TEST_CASE("events route to their shadow store") {
  CHECK(route_event("campaign_started") == ShadowStore::Archive);
  CHECK(route_event("lof_profile_trained") == ShadowStore::Archive);
  CHECK(route_event("order_accepted") == ShadowStore::ProcessAnalysis);
  CHECK(route_event("operator_command") == ShadowStore::ProcessAnalysis);
  CHECK(route_event("board_mounted") == ShadowStore::ProductShadow);
  CHECK(route_event("insertion_attempt") == ShadowStore::ProductShadow);
  CHECK(route_event("something_new") == ShadowStore::Archive);
  CHECK(to_string(ShadowStore::ProductShadow) == "product_shadow");
}

TEST_CASE("log file round trip keeps header and events") {
  LogHeader h;
  h.seed = 99;
  h.config = {{"k", 1}};
  std::vector<TwinEvent> events = {make_event(1, "a", {{"v", 1}}), make_event(2, "b")};
  events[1].parent = 1;
  std::stringstream ss;
  write_log(ss, h, events);
  const auto text = ss.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  const auto back = read_log(ss);
  CHECK(back.header.seed == 99);
  CHECK(back.header.schema == kEventSchema);
  CHECK(back.events == events);

  std::stringstream no_header(canonical_line(to_json(events[0])) + "\n");
  CHECK_THROWS_AS(read_log(no_header), ParseError);
  std::stringstream garbage(canonical_line(to_json(h)) + "\nnot json\n");
  CHECK_THROWS_AS(read_log(garbage), ParseError);
}

TEST_CASE("bus registry and discovery") {
  Bus bus;
  bus.register_endpoint({"a", "inproc://a", "A"});
  CHECK_THROWS_AS(bus.register_endpoint({"a", "inproc://x", "dup"}), ValidationError);
  CHECK_THROWS_AS(bus.register_endpoint({"", "inproc://x", "empty"}), ValidationError);
  REQUIRE(bus.discover("a"));
  CHECK(bus.discover("a")->address == "inproc://a");
  CHECK_FALSE(bus.discover("b"));
  CHECK_THROWS_AS(bus.publish("b", "t", "x", json::object()), UnknownEndpoint);
  CHECK_THROWS_AS(bus.request("a", "b", "x", json::object()), UnknownEndpoint);
  bus.unregister_endpoint("a");
  CHECK(bus.endpoints().empty());
}

TEST_CASE("bus subscribe replays retained messages from a sequence number") {
  Bus bus;
  bus.register_endpoint({"pub", "inproc://pub", "p"});
  bus.register_endpoint({"sub", "inproc://sub", "s"});
  bus.set_retention("t", 0);
  for (int i = 1; i <= 5; ++i) CHECK(bus.publish("pub", "t", "n", {{"i", i}}) == static_cast<std::uint64_t>(i));
  std::vector<std::uint64_t> seen;
  const auto sub = bus.subscribe("sub", "t", [&](const Message& m) { seen.push_back(m.seq); }, 3);
  bus.publish("pub", "t", "n", {{"i", 6}});
  CHECK(seen == std::vector<std::uint64_t>{3, 4, 5, 6});
  bus.unsubscribe(sub);
  bus.publish("pub", "t", "n", {{"i", 7}});
  CHECK(seen.size() == 4);
  CHECK(bus.last_seq("t") == 7);

  std::vector<std::uint64_t> live;
  bus.subscribe("sub", "t", [&](const Message& m) { live.push_back(m.seq); });
  bus.publish("pub", "t", "n", json::object());
  CHECK(live == std::vector<std::uint64_t>{8});
  bus.unregister_endpoint("sub");
  bus.publish("pub", "t", "n", json::object());
  CHECK(live.size() == 1);
}

TEST_CASE("bus retention bounds the replay window") {
  Bus bus;
  bus.register_endpoint({"pub", "inproc://pub", "p"});
  bus.set_retention("t", 2);
  for (int i = 0; i < 5; ++i) bus.publish("pub", "t", "n", json::object());
  std::vector<std::uint64_t> seen;
  bus.subscribe("pub", "t", [&](const Message& m) { seen.push_back(m.seq); }, 1);
  CHECK(seen == std::vector<std::uint64_t>{4, 5});
}

TEST_CASE("bus request reaches the responder") {
  Bus bus;
  bus.register_endpoint({"a", "inproc://a", "A"});
  bus.register_endpoint({"b", "inproc://b", "B"});
  bus.serve("b", [](const Message& m) { return json{{"echo", m.body}, {"type", m.type}, {"from", m.from}}; });
  const auto r = bus.request("a", "b", "ping", {{"x", 1}});
  CHECK(r["echo"]["x"] == 1);
  CHECK(r["type"] == "ping");
  CHECK(r["from"] == "a");
}

TEST_CASE("frames encode with a big-endian length prefix") {
  const Frame f{"events", 12, "board_mounted", {{"serial", "EPS-001"}}};
  const auto bytes = encode_frame(f);
  const auto body = to_json(f).dump();
  REQUIRE(bytes.size() == body.size() + 4);
  const auto len = (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[0])) << 24) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[1])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[2])) << 8) |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[3]));
  CHECK(len == body.size());
  CHECK(bytes.substr(4) == body);
}

TEST_CASE("frame decoder handles split and batched input") {
  const Frame a{"control", 1, "subscribe", {{"topic", "events"}}};
  const Frame b{"query", 2, "snapshot", json::object()};
  const auto stream = encode_frame(a) + encode_frame(b);
  FrameDecoder dec;
  std::vector<Frame> out;
  for (char c : stream) {
    dec.feed(std::string_view(&c, 1));
    while (auto f = dec.next()) out.push_back(*f);
  }
  REQUIRE(out.size() == 2);
  CHECK(out[0] == a);
  CHECK(out[1] == b);
  CHECK(dec.buffered() == 0);

  FrameDecoder partial;
  partial.feed(encode_frame(a).substr(0, 6));
  CHECK_FALSE(partial.next());
}

TEST_CASE("frame decoder rejects oversize and malformed frames") {
  FrameDecoder big;
  const std::uint32_t n = kMaxFrameBytes + 1;
  const char hdr[4] = {static_cast<char>(n >> 24), static_cast<char>(n >> 16), static_cast<char>(n >> 8),
                       static_cast<char>(n)};
  big.feed(std::string_view(hdr, 4));
  CHECK_THROWS_AS(big.next(), FrameError);

  FrameDecoder bad;
  const std::string junk = "{not";
  const char h2[4] = {0, 0, 0, static_cast<char>(junk.size())};
  bad.feed(std::string_view(h2, 4));
  bad.feed(junk);
  CHECK_THROWS_AS(bad.next(), FrameError);

  CHECK_THROWS_AS(frame_from_json(json{{"topic", "x"}}), ParseError);
}

TEST_CASE("bind addresses") {
  const auto b = parse_bind("127.0.0.1:7401");
  CHECK(b.host == "127.0.0.1");
  CHECK(b.port == 7401);
  CHECK(parse_bind("localhost:0").port == 0);
  CHECK_THROWS_AS(parse_bind("nohost"), ValidationError);
  CHECK_THROWS_AS(parse_bind("h:99999"), ValidationError);
  CHECK_THROWS_AS(parse_bind("h:abc"), ValidationError);
}

TEST_CASE("frame server streams topics and answers requests") {
  Bus bus;
  bus.register_endpoint({"svc", "inproc://svc", "service"});
  bus.set_retention("events", 0);
  bus.serve("svc", [](const Message& m) { return json{{"type", m.type}, {"got", m.body}}; });
  bus.publish("svc", "events", "e", {{"n", 1}});
  bus.publish("svc", "events", "e", {{"n", 2}});

  FrameServer server(bus, "svc");
  server.start(parse_bind("127.0.0.1:0"));
  REQUIRE(server.port() != 0);
  auto conn = FrameConnection::connect("127.0.0.1", server.port());
  conn.send({"control", 1, "subscribe", {{"topic", "events"}, {"from_seq", 2}}});
  auto r = conn.receive(2000ms);
  REQUIRE(r);
  CHECK(r->topic == "reply");
  CHECK(r->seq == 1);
  CHECK(r->type == "subscribed");
  r = conn.receive(2000ms);
  REQUIRE(r);
  CHECK(r->topic == "events");
  CHECK(r->seq == 2);
  CHECK(r->body["n"] == 2);

  bus.publish("svc", "events", "e", {{"n", 3}});
  r = conn.receive(2000ms);
  REQUIRE(r);
  CHECK(r->seq == 3);

  conn.send({"query", 5, "snapshot", {{"a", 1}}});
  r = conn.receive(2000ms);
  REQUIRE(r);
  CHECK(r->topic == "reply");
  CHECK(r->seq == 5);
  CHECK(r->body["type"] == "snapshot");
  CHECK(r->body["got"]["topic"] == "query");
  CHECK(r->body["got"]["body"]["a"] == 1);

  conn.send({"control", 6, "endpoints", json::object()});
  r = conn.receive(2000ms);
  REQUIRE(r);
  bool has_client = false;
  for (const auto& e : r->body["endpoints"])
    if (e["name"] == "frame-client") has_client = true;
  CHECK(has_client);
  conn.close();
  server.stop();
}

TEST_CASE("frame server closes connections that send garbage") {
  Bus bus;
  bus.register_endpoint({"svc", "inproc://svc", "service"});
  FrameServer server(bus, "svc");
  server.start(parse_bind("127.0.0.1:0"));
  auto conn = FrameConnection::connect("127.0.0.1", server.port());
  conn.send({"control", 1, "endpoints", json::object()});
  REQUIRE(conn.receive(2000ms));
  // A raw frame whose payload is not JSON.
  auto raw = FrameConnection::connect("127.0.0.1", server.port());
  const std::string junk = "]]";
  std::string bytes = {0, 0, 0, static_cast<char>(junk.size())};
  bytes += junk;
  raw.send_raw(bytes);
  const auto err = raw.receive(2000ms);
  REQUIRE(err);
  CHECK(err->body.contains("error"));
  // The server hangs up, after which the client side is closed.
  CHECK_FALSE(raw.receive(2000ms));
  CHECK_THROWS_AS(raw.send({"control", 2, "endpoints", json::object()}), TransportError);
  server.stop();
}

TEST_CASE("config and order files") {
  const auto cfg = campaign_config();
  CHECK(cfg.cell.inventory.size() == 12);
  CHECK(cfg.constraints.forbidden_adjacent.size() == 1);
  CHECK(cfg.electrical.k == 10);
  CHECK(cfg.retry_cap == 3);
  CHECK(cfg.cell_sha256.size() == 64);
  const auto orders = load_orders(fixture("orders_campaign.yaml"));
  REQUIRE(orders.size() == 3);
  CHECK(orders[0].id == "A");
  CHECK(orders[0].goal.requirements.size() == 3);
  CHECK_THROWS_AS(orders_from_yaml(YAML::Load("[{id: X, deadline_s: 1, requirements: []}]"), "orders"),
                  ValidationError);
  CHECK_THROWS_AS(orders_from_yaml(YAML::Load("[{id: X, deadline_s: 1, requirements: [12]}]"), "orders"),
                  ValidationError);
  const auto o = orders_from_yaml(
      YAML::Load("[{id: X, deadline_s: 5, requirements: [[1, 3], 2], layout: 2-1-0}]"), "orders");
  CHECK(o[0].goal.requirements[0].alternatives == std::vector<int>{1, 3});
  REQUIRE(o[0].layout);
  CHECK(o[0].layout->to_string() == "2-1-0");
  const auto scripts = load_operator_scripts(fixture("operator_campaign.yaml"));
  REQUIRE(scripts.size() == 1);
  CHECK(scripts[0].serial == std::optional<std::string>("COM-003"));
  CHECK(scripts[0].commands.size() == 14);
  CHECK(yaml_to_json(YAML::Load("{a: 1, b: '1', c: true, d: 1.5}")) ==
        json{{"a", 1}, {"b", "1"}, {"c", true}, {"d", 1.5}});
}

TEST_CASE("twin registers its endpoints as events") {
  ProcessTwin t(campaign_config(), 1);
  const auto log = t.events();
  const auto regs = of_type(log, "endpoint_registered");
  CHECK(regs.size() == 9);
  CHECK(regs.front().payload["id"] == "twin");
  CHECK(log.back().type == "campaign_started");
  CHECK(t.bus().discover("psu"));
  CHECK(t.snapshot()["endpoints"].size() == 9);
  CHECK_THROWS_AS(ProcessTwin(campaign_config(), 1, one_fault("[{serial: NOPE, kind: dead_board}]")),
                  ValidationError);
}

TEST_CASE("order acceptance outcomes") {
  ProcessTwin t(campaign_config(), 2);
  SUBCASE("material") {
    const auto r = t.accept_order(make_order("M", {{1}, {1}, {1}, {1}, {1}}));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "material");
  }
  SUBCASE("unreachable under the thermal constraint") {
    const auto r = t.accept_order(make_order("U", {{1}, {3}, {1}}));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "Unreachable");
  }
  SUBCASE("time") {
    const auto r = t.accept_order(make_order("T", {{1}, {2}, {3}}, 100.0));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "time");
    CHECK(t.snapshot()["orders"]["T"]["status"] == "Rejected");
  }
  SUBCASE("module type not in stock") {
    const auto r = t.accept_order(make_order("N", {{9}}));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "material");
  }
  SUBCASE("single module") {
    const auto r = t.accept_order(make_order("S", {{2}}));
    REQUIRE(std::holds_alternative<Accepted>(r));
    const auto& acc = std::get<Accepted>(r);
    CHECK(acc.config.to_string() == "2-0-0");
    CHECK(acc.reserved == std::vector<std::string>{"OBC-001"});
    CHECK(acc.estimate_s == doctest::Approx(120.0));
  }
  SUBCASE("backlog counts against later deadlines") {
    REQUIRE(std::holds_alternative<Accepted>(t.accept_order(make_order("A", {{1}, {2}, {3}}, 400.0))));
    const auto r = t.accept_order(make_order("B", {{1}, {2}, {3}}, 400.0));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "time");
  }
  SUBCASE("duplicate id") {
    t.accept_order(make_order("D", {{2}}));
    CHECK_THROWS_AS(t.accept_order(make_order("D", {{2}})), ValidationError);
  }
}

TEST_CASE("pre-check rejects a layout that breaks the thermal constraint") {
  ProcessTwin t(campaign_config(), 3);
  auto o = make_order("H", {{1}, {3}});
  o.layout = planner::AssemblyState::parse("1-3-0");
  REQUIRE(std::holds_alternative<Accepted>(t.accept_order(o)));
  CHECK(t.snapshot()["inventory"]["EPS-001"]["reserved_by"] == "H");
  CHECK_THROWS_AS(t.instantiate_product_twin(o), PreCheckFailed);
  const auto snap = t.snapshot();
  CHECK(snap["orders"]["H"]["status"] == "Returned");
  CHECK(snap["inventory"]["EPS-001"]["reserved_by"].is_null());
  CHECK(of_type(t.events(), "production_started").empty());
}

TEST_CASE("each accepted order gets its own product twin") {
  ProcessTwin t(campaign_config(), 4);
  const auto a = make_order("A", {{2}});
  const auto b = make_order("B", {{2}});
  t.accept_order(a);
  t.accept_order(b);
  auto& pa = t.instantiate_product_twin(a);
  auto& pb = t.instantiate_product_twin(b);
  CHECK(pa.id != pb.id);
  CHECK(pa.status == ProductStatus::InProduction);
  CHECK(of_type(t.events(), "production_started").size() == 2);
  CHECK_THROWS_AS(t.instantiate_product_twin(a), ValidationError);
  CHECK_THROWS_AS(t.instantiate_product_twin(make_order("Z", {{2}})), ValidationError);
}

TEST_CASE("clean order mounts three boards") {
  ProcessTwin t(campaign_config(), 5);
  const auto o = make_order("A", {{1}, {2}, {3}});
  REQUIRE(std::holds_alternative<Accepted>(t.accept_order(o)));
  auto& p = t.instantiate_product_twin(o);
  const auto r = t.run_production(p);
  CHECK(std::holds_alternative<Completed>(r));
  const auto log = t.events();
  CHECK(of_type(log, "insertion_success").size() == 3);
  CHECK(of_type(log, "board_mounted").size() == 3);
  CHECK(of_type(log, "board_discarded").empty());
  CHECK(p.status == ProductStatus::Completed);
  CHECK(planner::satisfies_constraints(p.state, t.graph().catalog(), t.config().constraints));
  CHECK(planner::satisfies_goal(p.state, o.goal, t.graph().catalog()));
  check_mount_invariant(log);
  const auto snap = t.snapshot();
  CHECK(snap["products"]["PT-A"]["status"] == "Completed");
  CHECK(snap["orders"]["A"]["status"] == "Completed");
  for (const auto& e : log) {
    if (e.type != "board_mounted") continue;
    const auto loc = snap["inventory"][e.payload["serial"].get<std::string>()]["location"].get<std::string>();
    CHECK(loc.rfind("PT-A:slot:", 0) == 0);
  }
  CHECK(snap["stores"]["archive"].get<int>() + snap["stores"]["process_analysis"].get<int>() +
            snap["stores"]["product_shadow"].get<int>() ==
        static_cast<int>(log.size()));
}

TEST_CASE("tombstoned board is discarded and replaced") {
  ProcessTwin t(campaign_config(), 6,
               one_fault("[{serial: EPS-001, kind: tombstone, region_mm: [52, 61, 8, 6]}]"));
  const auto o = make_order("A", {{1}, {2}, {3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  CHECK(std::holds_alternative<Completed>(t.run_production(p)));
  const auto log = t.events();
  const auto discards = of_type(log, "board_discarded");
  REQUIRE(discards.size() == 1);
  CHECK(discards[0].payload["serial"] == "EPS-001");
  CHECK(discards[0].payload["stage"] == "optical");
  CHECK(of_type(log, "plan_computed").size() >= 4);
  CHECK(p.boards.at("EPS-002").outcome == "Mounted");
  CHECK(t.snapshot()["inventory"]["EPS-001"]["location"] == "discarded");
  check_mount_invariant(log);
}

TEST_CASE("electrical drift is rejected after insertion") {
  ProcessTwin t(campaign_config(), 7,
               one_fault("[{serial: OBC-001, kind: electrical_drift, state: Idle, current_factor: 1.3}]"));
  const auto o = make_order("A", {{2}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  CHECK(std::holds_alternative<Completed>(t.run_production(p)));
  const auto log = t.events();
  const auto discards = of_type(log, "board_discarded");
  REQUIRE(discards.size() == 1);
  CHECK(discards[0].payload["stage"] == "electrical");
  CHECK(p.boards.at("OBC-002").outcome == "Mounted");
  const auto m = compute_metrics(log);
  CHECK(m["electrical"]["tp"] == 1);
  CHECK(m["electrical"]["fp"] == 0);
}

TEST_CASE("connector fault clears on reinsertion") {
  ProcessTwin t(campaign_config(), 8,
               one_fault("[{serial: COM-001, kind: connector_fault, clears_on_reinsert: true}]"));
  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  CHECK(std::holds_alternative<Completed>(t.run_production(p)));
  const auto log = t.events();
  CHECK(of_type(log, "electrical_no_response").size() == 1);
  CHECK(of_type(log, "board_reinserted").size() == 1);
  CHECK(of_type(log, "board_discarded").empty());
  CHECK(p.boards.at("COM-001").outcome == "Mounted");
}

TEST_CASE("persistent connector fault is discarded") {
  ProcessTwin t(campaign_config(), 9,
               one_fault("[{serial: COM-001, kind: connector_fault, clears_on_reinsert: false}]"));
  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  CHECK(std::holds_alternative<Completed>(t.run_production(p)));
  const auto discards = of_type(t.events(), "board_discarded");
  REQUIRE(discards.size() == 1);
  CHECK(discards[0].payload["reason"] == "no response");
}

TEST_CASE("out-of-raster bias escalates after the retry cap") {
  auto cfg = campaign_config();
  const int cap = cfg.retry_cap;
  ProcessTwin t(std::move(cfg), 10, load_faults(fixture("faults_escalation.yaml")));
  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  const auto r = t.run_production(p);
  REQUIRE(std::holds_alternative<InterventionRequested>(r));
  const auto& req = std::get<InterventionRequested>(r);
  CHECK(req.context.serial == "COM-001");
  CHECK(req.context.details["attempts"].size() == static_cast<std::size_t>(cap + 1));
  const auto log = t.events();
  const auto attempts = of_type(log, "insertion_attempt");
  REQUIRE(attempts.size() == static_cast<std::size_t>(cap + 1));
  CHECK_FALSE(attempts[0].payload["fallback"].get<bool>());
  for (std::size_t i = 1; i < attempts.size(); ++i) CHECK(attempts[i].payload["fallback"].get<bool>());
  std::set<json> cells;
  for (const auto& a : attempts) cells.insert(a.payload["cell"]);
  CHECK(cells.size() == attempts.size());
  CHECK(of_type(log, "qtable_discarded").size() == 1);
  CHECK(of_type(log, "qtable_committed").empty());
  CHECK(log.back().type == "intervention_requested");
  CHECK_THROWS_AS(t.run_production(p), ValidationError);

  SUBCASE("operator nudges complete the order") {
    auto session = t.request_intervention(p, req);
    CHECK(t.intervention_active());
    ScriptedOperator op(load_operator_scripts(fixture("operator_escalation.yaml")));
    const auto res = op.drive(*session);
    CHECK(res.outcome == teleop::SessionOutcome::Confirmed);
    t.resolve_intervention(p, res);
    CHECK_FALSE(t.intervention_active());
    CHECK(std::holds_alternative<Completed>(t.run_production(p)));
    const auto after = t.events();
    CHECK(of_type(after, "operator_command").size() == 14);
    const auto ok = of_type(after, "insertion_success");
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].payload["mode"] == "teleoperated");
    CHECK(t.snapshot()["orders"]["A"]["status"] == "Completed");
    check_mount_invariant(after);
  }
  SUBCASE("abort discards the board and production continues") {
    auto session = t.request_intervention(p, req);
    teleop::TimedCommand abort{0.5, teleop::Abort{}};
    const auto res = session->run_script({abort});
    CHECK(res.outcome == teleop::SessionOutcome::Aborted);
    t.resolve_intervention(p, res);
    const auto resolved = of_type(t.events(), "intervention_resolved");
    REQUIRE(resolved.size() == 1);
    CHECK(resolved[0].payload["outcome"] == "aborted");
    CHECK(t.snapshot()["inventory"]["COM-001"]["location"] == "discarded");
    CHECK(std::holds_alternative<Completed>(t.run_production(p)));
    CHECK(p.boards.at("COM-002").outcome == "Mounted");
  }
  SUBCASE("timeout discards the board") {
    auto session = t.request_intervention(p, req);
    CHECK_THROWS_AS(session->run_script({}), teleop::SessionTimeout);
    t.resolve_intervention(p, std::nullopt);
    const auto resolved = of_type(t.events(), "intervention_resolved");
    REQUIRE(resolved.size() == 1);
    CHECK(resolved[0].payload["outcome"] == "timeout");
    CHECK(t.now() >= t.config().teleop.timeout_s);
  }
}

TEST_CASE("operator commands require an open intervention") {
  ProcessTwin t(campaign_config(), 11, load_faults(fixture("faults_escalation.yaml")));
  const auto reply = t.bus().request("teleop", "twin", "nudge", {{"topic", "operator"}, {"body", {{"dx", 1}}}});
  CHECK(reply["accepted"] == false);
  CHECK(reply["reason"] == "no active intervention");

  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  const auto r = t.run_production(p);
  REQUIRE(std::holds_alternative<InterventionRequested>(r));
  auto session = t.request_intervention(p, std::get<InterventionRequested>(r));
  const auto bad = t.bus().request("teleop", "twin", "nudge", {{"topic", "operator"}, {"body", {{"dx", 1000}}}});
  CHECK(bad["accepted"] == false);
  const auto unknown = t.bus().request("teleop", "twin", "dance", {{"topic", "operator"}, {"body", json::object()}});
  CHECK(unknown["accepted"] == false);
  const auto good = t.bus().request("teleop", "twin", "grip", {{"topic", "operator"}, {"body", json::object()}});
  CHECK(good["accepted"] == true);
  const auto cmd = t.take_operator_command();
  REQUIRE(cmd);
  CHECK(std::holds_alternative<teleop::Grip>(*cmd));
  for (std::size_t i = 0; i < ProcessTwin::kInboxCapacity; ++i)
    t.post_operator_command(teleop::Nudge{1, 0, 0});
  CHECK(t.post_operator_command(teleop::Nudge{1, 0, 0})["accepted"] == false);
}

TEST_CASE("twin is reachable over the frame socket") {
  ProcessTwin t(campaign_config(), 12);
  const auto o = make_order("A", {{2}});
  t.accept_order(o);
  FrameServer server(t.bus(), "twin");
  server.start(parse_bind("127.0.0.1:0"));
  auto conn = FrameConnection::connect("127.0.0.1", server.port());

  conn.send({"control", 1, "subscribe", {{"topic", "events"}, {"from_seq", 1}}});
  auto r = conn.receive(2000ms);
  REQUIRE(r);
  CHECK(r->type == "subscribed");
  const auto n = t.events().size();
  for (std::size_t i = 1; i <= n; ++i) {
    r = conn.receive(2000ms);
    REQUIRE(r);
    CHECK(r->seq == i);
    CHECK(event_from_json(r->body) == t.events()[i - 1]);
  }

  conn.send({"query", 2, "snapshot", json::object()});
  r = await_reply(conn, 2);
  REQUIRE(r);
  CHECK(r->seq == 2);
  CHECK(r->body["hash"] == t.state_hash());
  CHECK(r->body["seq"] == n);

  conn.send({"query", 3, "plan_graph", json::object()});
  r = await_reply(conn, 3);
  REQUIRE(r);
  CHECK(r->body["nodes"] == t.graph().node_count());
  CHECK(r->body["dot"].get<std::string>().find("digraph") != std::string::npos);

  conn.send({"operator", 4, "nudge", {{"dx", 1}}});
  r = await_reply(conn, 4);
  REQUIRE(r);
  CHECK(r->body["accepted"] == false);

  conn.send({"query", 5, "endpoints", json::object()});
  r = await_reply(conn, 5);
  REQUIRE(r);
  CHECK(r->body["endpoints"].size() == 10);  // nine services plus this client

  auto& p = t.instantiate_product_twin(o);
  t.run_production(p);
  conn.send({"query", 6, "heatmap", {{"board_type", "obc"}}});
  r = await_reply(conn, 6);
  REQUIRE(r);
  CHECK(r->body == qpolicy::heatmap_message(t.qtable("obc")));
  CHECK(r->body["intensity"].size() == t.qtable("obc").size());
  server.stop();
}

TEST_CASE("operator commands sent over the socket resolve an escalation") {
  ProcessTwin t(campaign_config(), 14, load_faults(fixture("faults_escalation.yaml")));
  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  const auto r = t.run_production(p);
  REQUIRE(std::holds_alternative<InterventionRequested>(r));
  auto session = t.request_intervention(p, std::get<InterventionRequested>(r));

  FrameServer server(t.bus(), "twin");
  server.start(parse_bind("127.0.0.1:0"));
  auto conn = FrameConnection::connect("127.0.0.1", server.port());
  std::uint64_t seq = 1;
  const auto send = [&](const std::string& type, json body) {
    conn.send({"operator", seq, type, std::move(body)});
    const auto reply = await_reply(conn, seq++);
    REQUIRE(reply);
    CHECK(reply->body["accepted"] == true);
  };
  send("grip", json::object());
  for (int i = 0; i < 12; ++i) send("nudge", {{"dx", 1}});
  send("confirm_insert", json::object());

  InboxOperator op(t, false);
  const auto res = op.drive(*session);
  CHECK(res.outcome == teleop::SessionOutcome::Confirmed);
  CHECK(res.tool_offset_m.x() == doctest::Approx(6e-4).epsilon(0.05));
  t.resolve_intervention(p, res);
  CHECK(std::holds_alternative<Completed>(t.run_production(p)));
  server.stop();
}

TEST_CASE("cancelled inbox operator aborts the session") {
  ProcessTwin t(campaign_config(), 15, load_faults(fixture("faults_escalation.yaml")));
  const auto o = make_order("A", {{3}});
  t.accept_order(o);
  auto& p = t.instantiate_product_twin(o);
  const auto r = t.run_production(p);
  REQUIRE(std::holds_alternative<InterventionRequested>(r));
  auto session = t.request_intervention(p, std::get<InterventionRequested>(r));
  InboxOperator op(t, false, [] { return true; });
  CHECK(op.drive(*session).outcome == teleop::SessionOutcome::Aborted);
}

TEST_CASE("empty log replays to the initial state") {
  CHECK(replay_log(std::vector<TwinEvent>{}) == initial_state());
}

TEST_CASE("replay reconstructs the live state") {
  ProcessTwin t(campaign_config(), 13,
               one_fault("[{serial: EPS-001, kind: tombstone, region_mm: [52, 61, 8, 6]}]"));
  const auto o = make_order("A", {{1}, {2}, {3}});
  t.accept_order(o);
  t.run_production(t.instantiate_product_twin(o));
  const auto log = t.events();
  CHECK(state_hash(replay_log(log)) == t.state_hash());

  // Every prefix replays to the state the twin had at that point; check a few.
  for (std::size_t cut : {std::size_t{1}, log.size() / 3, log.size() / 2, log.size() - 1}) {
    json s = initial_state();
    for (std::size_t i = 0; i < cut; ++i) apply_event(s, log[i]);
    CHECK(replay_log(std::span(log).first(cut)) == s);
    CHECK(s["last_seq"] == cut);
  }

  SUBCASE("gap") {
    auto broken = log;
    broken.erase(broken.begin() + 20);
    try {
      replay_log(broken);
      FAIL("expected GapDetected");
    } catch (const GapDetected& g) {
      CHECK(g.index() == 20);
      CHECK(g.expected() == 21);
      CHECK(g.found() == 22);
    }
  }
  SUBCASE("mount without inspection") {
    auto broken = log;
    const auto it = std::find_if(broken.begin(), broken.end(),
                                 [](const TwinEvent& e) { return e.type == "electrical_result"; });
    REQUIRE(it != broken.end());
    it->payload["verdict"] = "Fail";
    CHECK_THROWS_AS(replay_log(broken), CorruptEvent);
  }
  SUBCASE("unknown type") {
    auto broken = log;
    broken[5].type = "mystery";
    CHECK_THROWS_AS(replay_log(broken), CorruptEvent);
  }
  SUBCASE("unregistered source") {
    auto broken = log;
    broken[12].source = "intruder";
    CHECK_THROWS_AS(replay_log(broken), CorruptEvent);
  }
  SUBCASE("log file round trip") {
    std::stringstream ss;
    write_log(ss, t.header(), log);
    const auto back = read_log(ss);
    CHECK(back.events == log);
    CHECK(state_hash(replay_log(back.events)) == t.state_hash());
  }
}

TEST_CASE("same seed gives the same log") {
  const auto run = [](std::uint64_t seed) {
    ProcessTwin t(campaign_config(), seed, load_faults(fixture("faults_campaign.yaml")));
    ScriptedOperator op(load_operator_scripts(fixture("operator_campaign.yaml")));
    const auto res = t.run_campaign(load_orders(fixture("orders_campaign.yaml")), op);
    std::stringstream ss;
    write_log(ss, t.header(), t.events());
    return std::make_pair(ss.str(), res);
  };
  const auto [a, ra] = run(21);
  const auto [b, rb] = run(21);
  CHECK(a == b);
  CHECK(ra.final_hash == rb.final_hash);
  CHECK(ra.all_completed);
  std::stringstream ss(a);
  const auto parsed = read_log(ss);
  CHECK(state_hash(replay_log(parsed.events)) == ra.final_hash);
  REQUIRE(parsed.events.back().type == "campaign_finished");
  CHECK(parsed.events.back().payload["state_hash_before"] ==
        state_hash(replay_log(std::span(parsed.events).first(parsed.events.size() - 1))));
  check_mount_invariant(parsed.events);
  const auto m = compute_metrics(parsed.events);
  CHECK(m["orders"]["completed"] == 3);
  CHECK(m["insertion"]["interventions"] == 1);
  CHECK(m["insertion"]["teleoperated_successes"] == 1);
  CHECK(m["optical"]["recall"] == 1.0);
  CHECK(m["electrical"]["recall"] == 1.0);
}

TEST_CASE("mount invariant across randomized fault scripts") {
  const char* kinds[] = {"tombstone", "solderball", "missing_pin", "electrical_drift", "connector_fault",
                         "dead_board"};
  Rng rng(777);
  for (int run = 0; run < 3; ++run) {
    const auto cfg = campaign_config();
    std::vector<cell::FaultSpec> faults;
    for (int k = 0; k < 3; ++k) {
      const auto& b = cfg.cell.inventory[rng.index(cfg.cell.inventory.size())];
      const std::string kind = kinds[rng.index(6)];
      std::string y = "[{serial: " + b.serial + ", kind: " + kind;
      if (kind == "tombstone" || kind == "solderball") y += ", region_mm: [40, 40, 8, 6]";
      if (kind == "missing_pin") y += ", row: 0, col: 0";
      if (kind == "electrical_drift") y += ", state: Idle, current_factor: 1.4";
      if (kind == "connector_fault") y += ", clears_on_reinsert: " + std::string(rng.bernoulli(0.5) ? "true" : "false");
      y += "}]";
      for (auto& f : one_fault(y)) faults.push_back(f);
    }
    ProcessTwin t(cfg, 100 + run, faults);
    ScriptedOperator op;
    t.run_campaign(load_orders(fixture("orders_campaign.yaml")), op);
    const auto log = t.events();
    check_mount_invariant(log);
    CHECK(state_hash(replay_log(log)) == t.state_hash());
    CHECK(log.back().type == "campaign_finished");
  }
}
