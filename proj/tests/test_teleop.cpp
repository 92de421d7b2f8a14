// Copyright 2026 The flexff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <sstream>
#include <thread>

#include "flexff/common/error.hpp"
#include "flexff/sim/kinematics.hpp"
#include "flexff/teleop/protocol.hpp"
#include "flexff/teleop/replay.hpp"
#include "flexff/teleop/server.hpp"
#include "flexff/teleop/session.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that breaks Eigen headers.
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>

using namespace flexff;
using namespace flexff::teleop;
using nlohmann::json;

namespace {

std::shared_ptr<const nn::RecurrentModel> small_inverse(int window = 50) {
  nn::Topology topo = nn::inverse_topology(7, window, 8);
  topo.layers = 1;
  topo.input_skip = true;
  return std::make_shared<const nn::RecurrentModel>(nn::RecurrentModel::random(topo, 11));
}

VelCmd cmd(std::uint64_t seq, std::array<double, 6> v) { return {v, seq}; }

std::string code_of(std::string_view text) {
  try {
    parse_client_message(text);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("client messages round-trip through JSON") {
  const ClientMessage v = cmd(3, {0.1, -0.2, 0.3, 1e-17, 0.1 + 0.2, -0.0});
  CHECK(parse_client_message(encode(to_json(v))) == v);
  CHECK(parse_client_message(R"({"type":"toggle_comp","on":false})") == ClientMessage{ToggleComp{false}});
  CHECK(parse_client_message(R"({"type":"set_orientation_lock","on":true})") ==
        ClientMessage{SetOrientationLock{true}});
}

TEST_CASE("malformed client messages are rejected") {
  CHECK(code_of("not json") == "malformed_message");
  CHECK(code_of(R"([1,2])") == "malformed_message");
  CHECK(code_of(R"({"type":"warp"})") == "malformed_message");
  CHECK(code_of(R"({"type":"vel_cmd","v":[0,0,0,0,0],"seq":1})") == "malformed_message");
  CHECK(code_of(R"({"type":"vel_cmd","v":[0,0,0,0,0,"x"],"seq":1})") == "malformed_message");
  CHECK(code_of(R"({"type":"vel_cmd","v":[0,0,0,0,0,0]})") == "malformed_message");
  CHECK(code_of(R"({"type":"vel_cmd","v":[0,0,0,0,0,0],"seq":-1})") == "malformed_message");
  CHECK(code_of(R"({"type":"toggle_comp","on":1})") == "malformed_message");
}

TEST_CASE("state messages keep every double exactly") {
  StateMsg s;
  s.t = 42;
  s.q = Eigen::VectorXd::LinSpaced(7, -1.0 / 3.0, 2.0 / 7.0);
  s.q_d = s.q * std::acos(-1.0);
  s.q_c = s.q.array().exp();
  s.err_l2_window = 0.1 + 0.2;
  s.comp_on = true;
  s.latency_samples = 24;
  const StateMsg back = state_from_json(json::parse(encode(to_json(s))));
  CHECK(back.t == s.t);
  CHECK(back.q == s.q);
  CHECK(back.q_d == s.q_d);
  CHECK(back.q_c == s.q_c);
  CHECK(back.err_l2_window == s.err_l2_window);
  CHECK(back.comp_on);
  CHECK(back.latency_samples == 24);
}

TEST_CASE("session_info carries rate, window and kinematics") {
  Session s(SessionConfig{}, small_inverse());
  const SessionInfo info = s.info();
  CHECK(info.n_joints == 7);
  CHECK(info.rate_hz == 100.0);
  CHECK(info.window_T == 50);
  CHECK(info.kinematics.contains("joints"));
  CHECK(session_info_from_json(json::parse(encode(to_json(info)))) == info);
}

TEST_CASE("a session without a model refuses compensation") {
  Session s(SessionConfig{}, nullptr);
  CHECK_FALSE(s.comp_on());
  CHECK(s.latency_samples() == 0);
  const auto err = s.handle(ToggleComp{true});
  REQUIRE(err);
  CHECK(err->code == "unavailable");
  CHECK_FALSE(s.handle(ToggleComp{false}));
}

TEST_CASE("model window must match window_T") {
  SessionConfig c;
  c.window_T = 40;
  CHECK_THROWS_AS(Session(c, small_inverse(50)), Error);
}

TEST_CASE("without commands the setpoint is constant and the arm settles") {
  Session s(SessionConfig{}, nullptr);
  const JointVector q0 = default_start_pose(7);
  JointVector prev;
  for (int k = 0; k < 1500; ++k) {
    const TickResult r = s.tick();
    REQUIRE_FALSE(r.error);
    CHECK(r.state.q_d == q0);
    if (k == 1499) CHECK((r.state.q - prev).cwiseAbs().maxCoeff() < 1e-9);
    prev = r.state.q;
  }
}

TEST_CASE("zero velocity commands hold the setpoint") {
  Session s(SessionConfig{}, small_inverse());
  const JointVector q0 = s.setpoint();
  for (int k = 0; k < 200; ++k) {
    if (k % 2 == 0) CHECK_FALSE(s.handle(cmd(k + 1, {0, 0, 0, 0, 0, 0})));
    const TickResult r = s.tick();
    REQUIRE_FALSE(r.error);
    CHECK(r.state.q_d == q0);
  }
  CHECK(s.setpoint() == q0);
}

TEST_CASE("out-of-order commands are rejected without changing the session") {
  Session a(SessionConfig{}, nullptr), b(SessionConfig{}, nullptr);
  CHECK_FALSE(a.handle(cmd(5, {0, 0, 0, 0.05, 0, 0})));
  CHECK_FALSE(b.handle(cmd(5, {0, 0, 0, 0.05, 0, 0})));
  a.tick();
  b.tick();
  for (std::uint64_t bad : {5u, 4u, 0u}) {
    const auto err = a.handle(cmd(bad, {0, 0, 0, -0.05, 0, 0}));
    REQUIRE(err);
    CHECK(err->code == "out_of_order");
  }
  for (int k = 0; k < 30; ++k) {
    const TickResult ra = a.tick(), rb = b.tick();
    CHECK(ra.state.q == rb.state.q);
    CHECK(ra.state.q_d == rb.state.q_d);
  }
  CHECK_FALSE(a.handle(cmd(6, {0, 0, 0, 0, 0, 0})));
}

TEST_CASE("compensation off follows the baseline path") {
  const auto model = small_inverse();
  SessionConfig on;
  SessionConfig off;
  off.comp_on = false;
  Session toggled(on, model), baseline(off, model);
  CHECK_FALSE(toggled.handle(ToggleComp{false}));
  const CommandLog log = synthesize_command_log({.seed = 3, .duration_s = 3.0});
  std::size_t next = 0;
  for (std::uint64_t k = 0; k < log.n_ticks; ++k) {
    for (; next < log.messages.size() && log.messages[next].tick == k; ++next) {
      toggled.handle(log.messages[next].msg);
      baseline.handle(log.messages[next].msg);
    }
    const TickResult a = toggled.tick(), b = baseline.tick();
    CHECK_FALSE(a.state.comp_on);
    REQUIRE(a.state.q_c == b.state.q_c);
    REQUIRE(a.state.q == b.state.q);
  }
  // With compensation off the command is the delayed setpoint plus feedback
  // terms only, so it never reads the model: a different model gives the same
  // telemetry.
  nn::Topology topo = model->topology();
  Session other(off, std::make_shared<const nn::RecurrentModel>(nn::RecurrentModel::random(topo, 99)));
  Session again(off, model);
  for (int k = 0; k < 100; ++k) {
    if (k == 0) {
      other.handle(cmd(1, {0, 0, 0, 0.05, 0.02, 0}));
      again.handle(cmd(1, {0, 0, 0, 0.05, 0.02, 0}));
    }
    CHECK(other.tick().state.q_c == again.tick().state.q_c);
  }
}

TEST_CASE("the reference lags the setpoint by T/2 - 1 = 24 samples") {
  Session s(SessionConfig{}, small_inverse(50));
  CHECK(s.latency_samples() == 24);
  const JointVector q0 = s.setpoint();
  std::vector<JointVector> setpoints;
  for (int k = 0; k < 300; ++k) {
    if (k % 2 == 0) s.handle(cmd(k + 1, {0, 0, 0, 0.08 * std::sin(0.03 * k), 0.05, -0.04}));
    const TickResult r = s.tick();
    REQUIRE_FALSE(r.error);
    setpoints.push_back(s.setpoint());
    CHECK(r.state.latency_samples == 24);
    if (k < 24) {
      CHECK(r.state.q_d == q0);
    } else {
      CHECK(r.state.q_d == setpoints[k - 24]);
    }
  }
  CHECK((setpoints.back() - q0).norm() > 1e-2);
}

TEST_CASE("a held command decays monotonically to zero") {
  Session s(SessionConfig{}, nullptr);
  s.handle(cmd(1, {0, 0, 0, 0.1, 0.0, 0.05}));
  double prev = std::numeric_limits<double>::infinity();
  JointVector q_prev = s.setpoint();
  for (int k = 0; k < 80; ++k) {
    s.tick();
    const double now = s.effective_command().norm();
    CHECK(now <= prev);
    prev = now;
    if (k >= 50) {
      CHECK(now == 0.0);
      CHECK(s.setpoint() == q_prev);
    }
    q_prev = s.setpoint();
  }
}

TEST_CASE("orientation lock keeps the end-effector orientation") {
  SessionConfig c;
  c.orientation_lock = true;
  Session s(c, nullptr);
  const KinematicChain& chain = c.plant.kinematic_params;
  const Eigen::Quaterniond o0 = forward_kinematics(chain, s.setpoint()).orientation;
  const Eigen::Vector3d p0 = forward_kinematics(chain, s.setpoint()).position;
  for (int k = 0; k < 100; ++k) {
    // The angular part is ignored while locked.
    if (k % 2 == 0) s.handle(cmd(k + 1, {0.3, 0.2, -0.1, 0.05, -0.03, 0.02}));
    REQUIRE_FALSE(s.tick().error);
  }
  const Pose p = forward_kinematics(chain, s.setpoint());
  // Only the angular velocity is constrained, so Euler integration drifts at
  // second order in the step.
  CHECK(orientation_error(p.orientation, o0).norm() < 1e-4);
  CHECK((p.position - p0).norm() > 0.03);
}

TEST_CASE("command logs round-trip through JSON lines") {
  const CommandLog log = synthesize_command_log({.seed = 5, .duration_s = 4.0});
  CHECK(log.n_ticks == 400);
  REQUIRE(log.messages.size() > 10);
  CHECK(std::holds_alternative<SetOrientationLock>(log.messages.front().msg));
  std::stringstream ss;
  write_command_log(ss, log);
  CHECK(read_command_log(ss) == log);

  std::stringstream bad("{\"n_ticks\":3}\n{\"tick\":1}\n");
  CHECK_THROWS_AS(read_command_log(bad), Error);
}

TEST_CASE("replay is deterministic and meets the tick budget") {
  const auto model = std::make_shared<const nn::RecurrentModel>([] {
    nn::Topology topo = nn::inverse_topology(7, 50, 16);
    topo.layers = 2;
    topo.input_skip = true;
    return nn::RecurrentModel::random(topo, 4);
  }());
  const CommandLog log = synthesize_command_log({.seed = 9, .duration_s = 6.0});
  const ReplayResult a = replay(SessionConfig{}, model, log);
  const ReplayResult b = replay(SessionConfig{}, model, log);
  REQUIRE(a.states.size() == log.n_ticks);
  REQUIRE(b.states.size() == log.n_ticks);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    REQUIRE(a.states[k].q == b.states[k].q);
    REQUIRE(a.states[k].q_c == b.states[k].q_c);
  }
  CHECK(a.errors.empty());
  CHECK(a.mean_tick_seconds < 0.010);
  MESSAGE("mean tick " << a.mean_tick_seconds * 1e3 << " ms");

  const ReplayResult off = replay(SessionConfig{}, model, log, CompOverride::kForceOff);
  CHECK_FALSE(off.states.back().comp_on);
  CHECK(off.states.back().q_d == a.states.back().q_d);
}

// ---------------------------------------------------------------------------
// Live service.

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

ServerConfig any_port(ServerConfig cfg) {
  cfg.port = 0;
  return cfg;
}

struct RunningServer {
  Server server;
  std::thread thread;

  RunningServer(ServerConfig cfg, std::shared_ptr<const nn::RecurrentModel> model)
      : server(any_port(std::move(cfg)), std::move(model)), thread([this] { server.run(); }) {}
  ~RunningServer() { shutdown(); }
  void shutdown() {
    if (!thread.joinable()) return;
    server.stop();
    thread.join();
  }
};

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/teleop");
    ws_.text(true);
  }
  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  // Next state message; error messages are collected on the way.
  StateMsg next_state() {
    for (;;) {
      const json doc = read();
      if (doc.at("type") == "state") return state_from_json(doc);
      errors.push_back(doc);
    }
  }
  void send(const ClientMessage& msg) { ws_.write(net::buffer(encode(to_json(msg)))); }
  void send_text(const std::string& text) { ws_.write(net::buffer(text)); }
  void close() { ws_.close(websocket::close_code::normal); }

  std::vector<json> errors;

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

}  // namespace

TEST_CASE("server starts and stops cleanly") {
  RunningServer rs(ServerConfig{}, small_inverse());
  CHECK(rs.server.port() != 0);
  rs.shutdown();
}

TEST_CASE("a taken port is a bind failure") {
  RunningServer rs(ServerConfig{}, small_inverse());
  ServerConfig cfg;
  cfg.port = rs.server.port();
  try {
    Server second(cfg, small_inverse());
    FAIL("expected bind_failed");
  } catch (const Error& e) {
    CHECK(e.code() == "bind_failed");
  }
}

TEST_CASE("healthz reports the service version") {
  RunningServer rs(ServerConfig{}, small_inverse());
  httplib::Client http("127.0.0.1", rs.server.port());
  const auto res = http.Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 200);
  const json body = json::parse(res->body);
  CHECK(body.at("version") == kServiceVersion);
  const auto missing = http.Get("/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("first message is session_info, then ticks at the configured rate") {
  RunningServer rs(ServerConfig{}, small_inverse());
  Client c(rs.server.port());
  const json first = c.read();
  CHECK(first.at("type") == "session_info");
  const SessionInfo info = session_info_from_json(first);
  CHECK(info.window_T == 50);
  CHECK(info.rate_hz == 100.0);
  CHECK(info.n_joints == 7);

  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t last = 0;
  for (int k = 0; k < 50; ++k) {
    const StateMsg s = c.next_state();
    CHECK(s.t == static_cast<std::uint64_t>(k));
    CHECK(s.latency_samples == 24);
    last = s.t;
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(last == 49);
  CHECK(elapsed > 0.35);
  CHECK(elapsed < 2.0);

  c.send_text("garbage");
  c.send(ClientMessage{cmd(2, {0, 0, 0, 0, 0, 0})});
  c.send(ClientMessage{cmd(1, {0, 0, 0, 0, 0, 0})});
  for (int k = 0; k < 5; ++k) c.next_state();
  REQUIRE(c.errors.size() == 2);
  CHECK(c.errors[0].at("code") == "malformed_message");
  CHECK(c.errors[1].at("code") == "out_of_order");
  c.close();
}

TEST_CASE("concurrent sessions are isolated") {
  RunningServer rs(ServerConfig{}, small_inverse());
  Client a(rs.server.port()), b(rs.server.port());
  a.read();
  b.read();
  const JointVector q0 = default_start_pose(7);
  std::uint64_t seq = 0;
  StateMsg sa, sb;
  for (int k = 0; k < 80; ++k) {
    if (k % 2 == 0) a.send(ClientMessage{cmd(++seq, {0, 0, 0, 0.1, 0.05, 0.0})});
    sa = a.next_state();
    sb = b.next_state();
    CHECK(sb.q_d == q0);
  }
  CHECK((sa.q_d - q0).norm() > 1e-3);
  a.close();
  b.close();
}

TEST_CASE("a recorded session replays to the live telemetry") {
  const auto dir = std::filesystem::temp_directory_path() / "flexff_test_record";
  std::filesystem::remove_all(dir);
  const auto model = small_inverse();
  ServerConfig cfg;
  cfg.record_dir = dir;
  std::vector<StateMsg> live;
  {
    RunningServer rs(cfg, model);
    Client c(rs.server.port());
    c.read();
    c.send(ClientMessage{SetOrientationLock{true}});
    std::uint64_t seq = 0;
    for (int k = 0; k < 120; ++k) {
      if (k % 3 == 0) c.send(ClientMessage{cmd(++seq, {0, 0, 0, 0.05 * std::cos(0.1 * k), 0.04, -0.02})});
      if (k == 60) c.send(ClientMessage{ToggleComp{false}});
      live.push_back(c.next_state());
    }
    c.close();
    rs.shutdown();
  }
  const CommandLog log = load_command_log(dir / "session_0.jsonl");
  CHECK(log.n_ticks >= live.size());
  const ReplayResult r = replay(cfg.session, model, log);
  REQUIRE(r.states.size() >= live.size());
  for (std::size_t k = 0; k < live.size(); ++k) {
    REQUIRE(r.states[k].t == live[k].t);
    REQUIRE(r.states[k].q == live[k].q);
    REQUIRE(r.states[k].q_d == live[k].q_d);
    REQUIRE(r.states[k].q_c == live[k].q_c);
    REQUIRE(r.states[k].comp_on == live[k].comp_on);
  }
  CHECK_FALSE(live.back().comp_on);
  std::filesystem::remove_all(dir);
}
