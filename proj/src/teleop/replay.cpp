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

#include "flexff/teleop/replay.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "flexff/common/error.hpp"
#include "flexff/common/rng.hpp"

namespace flexff::teleop {

void write_command_log(std::ostream& out, const CommandLog& log) {
  out << nlohmann::json{{"n_ticks", log.n_ticks}}.dump() << '\n';
  for (const LoggedMessage& m : log.messages) {
    out << nlohmann::json{{"tick", m.tick}, {"msg", to_json(m.msg)}}.dump() << '\n';
  }
}

CommandLog read_command_log(std::istream& in) {
  CommandLog log;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    require(!doc.is_discarded() && doc.is_object(), "malformed_log",
            "line " + std::to_string(line_no) + " is not a JSON object");
    try {
      if (!header) {
        log.n_ticks = doc.at("n_ticks").get<std::uint64_t>();
        header = true;
        continue;
      }
      LoggedMessage m{doc.at("tick").get<std::uint64_t>(), client_message_from_json(doc.at("msg"))};
      require(log.messages.empty() || m.tick >= log.messages.back().tick, "malformed_log",
              "ticks must be non-decreasing");
      log.messages.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed_log", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("malformed_log", "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  require(header, "malformed_log", "missing header line");
  require(log.messages.empty() || log.messages.back().tick < log.n_ticks, "malformed_log",
          "message stamped after the last tick");
  return log;
}

void save_command_log(const std::filesystem::path& path, const CommandLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), "io_error", "cannot write " + path.string());
  write_command_log(out, log);
  require(static_cast<bool>(out), "io_error", "failed writing " + path.string());
}

CommandLog load_command_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "missing_file", "cannot open " + path.string());
  return read_command_log(in);
}

ReplayResult replay(const SessionConfig& config, std::shared_ptr<const nn::RecurrentModel> inverse,
                    const CommandLog& log, CompOverride comp) {
  SessionConfig cfg = config;
  if (comp != CompOverride::kAsLogged) cfg.comp_on = comp == CompOverride::kForceOn;
  Session session(cfg, std::move(inverse));
  ReplayResult result;
  result.info = session.info();
  result.states.reserve(log.n_ticks);
  std::size_t next = 0;
  double busy = 0.0;
  for (std::uint64_t k = 0; k < log.n_ticks; ++k) {
    for (; next < log.messages.size() && log.messages[next].tick == k; ++next) {
      const ClientMessage& msg = log.messages[next].msg;
      if (comp != CompOverride::kAsLogged && std::holds_alternative<ToggleComp>(msg)) continue;
      if (auto err = session.handle(msg)) result.errors.emplace_back(k, *err);
    }
    const auto start = std::chrono::steady_clock::now();
    TickResult r = session.tick();
    busy += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.error) result.errors.emplace_back(k, *r.error);
    result.states.push_back(std::move(r.state));
  }
  if (log.n_ticks > 0) result.mean_tick_seconds = busy / static_cast<double>(log.n_ticks);
  return result;
}

CommandLog synthesize_command_log(const SynthSpec& spec) {
  require(spec.duration_s > 0.0 && spec.rate_hz > 0.0 && spec.command_rate_hz > 0.0 &&
              spec.command_rate_hz <= spec.rate_hz,
          "invalid_config", "synthetic log needs positive durations and command_rate_hz <= rate_hz");
  require(spec.min_speed <= spec.max_speed && spec.min_stroke_s <= spec.max_stroke_s, "invalid_config",
          "synthetic log ranges must satisfy min <= max");
  CommandLog log;
  log.n_ticks = static_cast<std::uint64_t>(std::llround(spec.duration_s * spec.rate_hz));
  log.messages.push_back({0, SetOrientationLock{true}});
  std::uint64_t state = spec.seed;
  const auto every = static_cast<std::uint64_t>(std::llround(spec.rate_hz / spec.command_rate_hz));
  std::uint64_t seq = 0;
  std::uint64_t tick = static_cast<std::uint64_t>(std::llround(0.5 * spec.rate_hz));
  const auto ticks_of = [&](double s) { return static_cast<std::uint64_t>(std::llround(s * spec.rate_hz)); };

  const auto stroke = [&](const Eigen::Vector3d& vel, double length_s) {
    const std::uint64_t n = ticks_of(length_s);
    const std::uint64_t ramp = std::max<std::uint64_t>(1, ticks_of(spec.ramp_s));
    for (std::uint64_t i = 0; i < n && tick < log.n_ticks; i += every, tick += every) {
      const double up = std::min(1.0, static_cast<double>(i + every) / static_cast<double>(ramp));
      const double down = std::min(1.0, static_cast<double>(n - i) / static_cast<double>(ramp));
      const Eigen::Vector3d v = vel * std::min(up, down);
      log.messages.push_back({tick, VelCmd{{0.0, 0.0, 0.0, v.x(), v.y(), v.z()}, ++seq}});
    }
    // Release: one explicit zero, then silence.
    if (tick < log.n_ticks) log.messages.push_back({tick, VelCmd{{}, ++seq}});
    tick += ticks_of(next_uniform(state, 0.2, 0.5));
  };

  while (tick < log.n_ticks) {
    Eigen::Vector3d dir(next_normal(state), next_normal(state), 0.5 * next_normal(state));
    if (dir.norm() < 1e-9) continue;
    const Eigen::Vector3d vel = dir.normalized() * next_uniform(state, spec.min_speed, spec.max_speed);
    const double length = next_uniform(state, spec.min_stroke_s, spec.max_stroke_s);
    stroke(vel, length);
    stroke(-vel, length);
  }
  return log;
}

}  // namespace flexff::teleop
