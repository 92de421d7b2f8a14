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

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "flexff/teleop/session.hpp"

namespace flexff::teleop {

inline constexpr const char* kServiceVersion = "0.1.0";

struct ServerConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  SessionConfig session;
  // Directory receiving one command log per websocket session; empty
  // disables recording.
  std::filesystem::path record_dir;
};

// Websocket endpoint /teleop (one Session per connection, ticked at
// rate_hz on a monotonic schedule) and GET /healthz. All sessions run on one
// I/O thread, so message handling and ticks never interleave.
class Server {
 public:
  // Binds immediately; throws Error("bind_failed") when the address is taken.
  Server(ServerConfig config, std::shared_ptr<const nn::RecurrentModel> inverse);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  // Serves until stop(); returns after every session is closed.
  void run();
  // Thread-safe; closes the listener and all sessions.
  void stop();
  // Calls stop() on SIGINT or SIGTERM; call before run().
  void stop_on_signals();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Runs a server until SIGINT or SIGTERM.
void serve_until_signal(const ServerConfig& config, std::shared_ptr<const nn::RecurrentModel> inverse);

}  // namespace flexff::teleop
