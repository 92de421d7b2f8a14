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

#include "flexff/teleop/server.hpp"

#include <chrono>
#include <csignal>
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <utility>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "flexff/common/error.hpp"
#include "flexff/teleop/replay.hpp"

namespace flexff::teleop {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

class WsSession;

struct Registry {
  ServerConfig config;
  std::shared_ptr<const nn::RecurrentModel> model;
  std::set<std::shared_ptr<WsSession>> sessions;
  std::uint64_t next_id = 0;
  bool stopping = false;
  std::function<void()> on_drained;
};

// One websocket client: owns its Session and ticks it on a steady timer.
// Everything runs on the single I/O thread, so reads and ticks never overlap.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Registry& reg)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        reg_(reg),
        session_(reg.config.session, reg.model),
        id_(reg.next_id++) {
    period_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / reg.config.session.rate_hz));
  }

  void start(http::request<http::string_body> req) {
    ws_.text(true);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  // Drops the connection without the close handshake.
  void abort() {
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    timer_.cancel();
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {
      beast::error_code ignored;
      beast::get_lowest_layer(self->ws_).socket().close(ignored);
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return finish();
    send(encode(to_json(session_.info())));
    do_read();
    next_tick_ = Clock::now() + period_;
    schedule();
  }

  // TODO: cap ws_.read_message_max() and the outbox depth so a slow or
  // flooding client cannot grow memory without bound.
  void do_read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return finish();
    const std::string text = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    try {
      const ClientMessage msg = parse_client_message(text);
      log_.messages.push_back({session_.ticks(), msg});
      if (auto err = session_.handle(msg)) send(encode(to_json(*err)));
    } catch (const Error& e) {
      send(encode(to_json(ErrorMsg{e.code(), e.detail()})));
    }
    do_read();
  }

  void schedule() {
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
  }

  void on_tick(beast::error_code ec) {
    if (ec || closed_) return;
    const TickResult r = session_.tick();
    if (r.error) send(encode(to_json(*r.error)));
    send(encode(to_json(r.state)));
    next_tick_ += period_;
    // After a long stall resume from now instead of bursting missed ticks.
    if (Clock::now() - next_tick_ > 10 * period_) next_tick_ = Clock::now() + period_;
    schedule();
  }

  void send(std::string text) {
    if (closed_) return;
    outbox_.push_back(std::move(text));
    if (!writing_) do_write();
  }

  void do_write() {
    writing_ = true;
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->outbox_.pop_front();
      if (ec) return self->finish();
      if (self->outbox_.empty()) {
        self->writing_ = false;
      } else {
        self->do_write();
      }
    });
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    closed_ = true;
    timer_.cancel();
    if (!reg_.config.record_dir.empty()) {
      log_.n_ticks = std::max<std::uint64_t>(session_.ticks(),
                                             log_.messages.empty() ? 0 : log_.messages.back().tick + 1);
      try {
        save_command_log(reg_.config.record_dir / ("session_" + std::to_string(id_) + ".jsonl"), log_);
      } catch (const Error&) {
        // Recording is best effort; the session itself already ended.
      }
    }
    reg_.sessions.erase(shared_from_this());
    if (reg_.stopping && reg_.sessions.empty() && reg_.on_drained) reg_.on_drained();
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  Registry& reg_;
  Session session_;
  std::uint64_t id_;
  Clock::duration period_{};
  Clock::time_point next_tick_{};
  beast::flat_buffer in_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closed_ = false;
  bool finished_ = false;
  CommandLog log_;
};

// Reads one HTTP request and either upgrades it to /teleop or answers it.
class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Registry& reg) : stream_(std::move(socket)), reg_(reg) {}

  void start() {
    stream_.expires_after(std::chrono::seconds(10));
    http::async_read(stream_, buf_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/teleop" && !reg_.stopping) {
        stream_.expires_never();
        auto ws = std::make_shared<WsSession>(stream_.release_socket(), reg_);
        reg_.sessions.insert(ws);
        ws->start(std::move(req_));
        return;
      }
      return respond(http::status::not_found, R"({"error":"not found"})");
    }
    if (req_.method() == http::verb::get && req_.target() == "/healthz") {
      return respond(http::status::ok, std::string(R"({"status":"ok","version":")") + kServiceVersion + "\"}");
    }
    respond(http::status::not_found, R"({"error":"not found"})");
  }

  void respond(http::status status, std::string body) {
    res_.result(status);
    res_.version(req_.version());
    res_.set(http::field::content_type, "application/json");
    res_.keep_alive(false);
    res_.body() = std::move(body);
    res_.prepare_payload();
    http::async_write(stream_, res_, [self = shared_from_this()](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  http::response<http::string_body> res_;
  Registry& reg_;
};

}  // namespace

struct Server::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::signal_set signals{ioc};
  net::steady_timer drain{ioc};
  Registry reg;

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(std::move(socket), reg)->start();
      accept();
    });
  }

  void shutdown() {
    if (reg.stopping) return;
    reg.stopping = true;
    beast::error_code ignored;
    acceptor.close(ignored);
    signals.cancel(ignored);
    if (reg.sessions.empty()) return;
    const auto sessions = reg.sessions;
    for (const auto& s : sessions) s->close();
    // Clients that never answer the close frame are cut off after a grace period.
    reg.on_drained = [this] { drain.cancel(); };
    drain.expires_after(std::chrono::seconds(2));
    drain.async_wait([this](beast::error_code ec) {
      if (ec) return;
      const auto left = reg.sessions;
      for (const auto& s : left) s->abort();
    });
  }
};

Server::Server(ServerConfig config, std::shared_ptr<const nn::RecurrentModel> inverse)
    : impl_(std::make_unique<Impl>()) {
  validate(config.session);
  impl_->reg.config = std::move(config);
  impl_->reg.model = std::move(inverse);
  // Construct one session up front so an unusable model fails here.
  Session probe(impl_->reg.config.session, impl_->reg.model);
  const ServerConfig& c = impl_->reg.config;
  try {
    const tcp::endpoint ep(net::ip::make_address(c.host), c.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error("bind_failed", c.host + ":" + std::to_string(c.port) + ": " + e.what());
  }
  impl_->accept();
}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->ioc.run();
  impl_->ioc.restart();
}

void Server::stop() {
  net::post(impl_->ioc, [impl = impl_.get()] { impl->shutdown(); });
}

void Server::stop_on_signals() {
  impl_->signals.add(SIGINT);
  impl_->signals.add(SIGTERM);
  impl_->signals.async_wait([impl = impl_.get()](beast::error_code ec, int) {
    if (!ec) impl->shutdown();
  });
}

void serve_until_signal(const ServerConfig& config, std::shared_ptr<const nn::RecurrentModel> inverse) {
  Server server(config, std::move(inverse));
  server.stop_on_signals();
  server.run();
}

}  // namespace flexff::teleop
