#include "magscan/service.hpp"

#include "magscan/errors.hpp"
#include "magscan/teleop.hpp"
#include "magscan/wire.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>
#include <variant>

namespace magscan {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

void ServiceConfig::validate() const {
  harness.validate();
  make_target_shape(shape_id, harness.shapes, harness.plant.workspace_halfwidth_mm);
  if (!(time_scale > 0.0)) fail(ErrorCategory::config, "time_scale must be > 0");
  if (telemetry_queue == 0) fail(ErrorCategory::config, "telemetry_queue must be > 0");
}

namespace {

struct Connection {
  explicit Connection(tcp::socket s, std::size_t queue_cap, std::uint64_t id_)
      : ws(std::move(s)), notify(ws.get_executor()), queue(queue_cap), id(id_) {}

  websocket::stream<tcp::socket> ws;
  asio::steady_timer notify;
  wire::OutboundQueue queue;
  wire::SeqTracker inbound;
  std::uint64_t out_seq = 0;
  std::uint64_t id;
  bool closed = false;  // io thread only
};

struct Connected {
  std::shared_ptr<Connection> conn;
};
struct Disconnected {
  std::uint64_t id;
};
struct Message {
  std::uint64_t id;
  wire::Inbound msg;
};
using Event = std::variant<Connected, Disconnected, Message>;

}  // namespace

struct TeleopServer::Impl {
  explicit Impl(ServiceConfig c) : cfg(std::move(c)) { cfg.validate(); }

  ServiceConfig cfg;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread io_thread, control_thread;
  std::atomic<bool> running{false};
  Clock::time_point started = Clock::now();

  // io thread state
  std::shared_ptr<Connection> active;
  std::uint64_t next_conn_id = 1;

  // inbox: io → control
  std::mutex inbox_mutex;
  std::condition_variable inbox_cv;
  std::deque<Event> inbox;

  mutable std::mutex stats_mutex;
  ServiceStats stats;
  std::vector<std::filesystem::path> written;
  std::uint64_t dropped_before = 0;  // from earlier connections

  // control thread state
  std::shared_ptr<Connection> client;
  std::optional<TeleopSession> session;
  std::string session_id;
  Clock::time_point session_wall0;
  std::uint64_t session_counter = 0;

  double uptime_ms() const { return std::chrono::duration<double, std::milli>(Clock::now() - started).count(); }

  void post_event(Event e) {
    {
      std::lock_guard lock(inbox_mutex);
      inbox.push_back(std::move(e));
    }
    inbox_cv.notify_one();
  }

  void wake_writer(const std::shared_ptr<Connection>& c) {
    asio::post(ioc, [c] { c->notify.cancel(); });
  }

  void send(const std::shared_ptr<Connection>& c, wire::Outbound m) {
    if (!c) return;
    c->queue.push(std::move(m));
    wake_writer(c);
  }

  // ---------------------------------------------------------------- io side

  asio::awaitable<void> writer(std::shared_ptr<Connection> c) {
    try {
      while (!c->closed) {
        while (auto m = c->queue.pop()) {
          const auto text = wire::serialize(*m, ++c->out_seq);
          co_await c->ws.async_write(asio::buffer(text), asio::use_awaitable);
        }
        if (c->closed) break;
        c->notify.expires_at(asio::steady_timer::time_point::max());
        boost::system::error_code ec;
        co_await c->notify.async_wait(asio::redirect_error(asio::use_awaitable, ec));
      }
    } catch (const boost::system::system_error&) {
    }
    co_return;
  }

  void handle_text(const std::shared_ptr<Connection>& c, const std::string& text) {
    try {
      auto msg = wire::parse_inbound(text);
      c->inbound.accept(wire::seq_of(msg));
      post_event(Message{c->id, std::move(msg)});
    } catch (const wire::ProtocolError& e) {
      {
        std::lock_guard lock(stats_mutex);
        ++stats.protocol_errors;
      }
      c->queue.push(wire::error(uptime_ms(), ErrorCategory::protocol, e.what(), e.reply_to()));
      c->notify.cancel();
    }
  }

  asio::awaitable<void> serve_connection(tcp::socket socket) {
    auto c = std::make_shared<Connection>(std::move(socket), cfg.telemetry_queue, next_conn_id++);
    try {
      co_await c->ws.async_accept(asio::use_awaitable);
    } catch (const boost::system::system_error&) {
      co_return;
    }
    c->ws.text(true);

    if (active) {
      {
        std::lock_guard lock(stats_mutex);
        ++stats.rejected_busy;
      }
      try {
        const auto text =
            wire::serialize(wire::error(uptime_ms(), ErrorCategory::busy, "another client is connected"), 1);
        co_await c->ws.async_write(asio::buffer(text), asio::use_awaitable);
        co_await c->ws.async_close(websocket::close_code::try_again_later, asio::use_awaitable);
      } catch (const boost::system::system_error&) {
      }
      co_return;
    }

    active = c;
    {
      std::lock_guard lock(stats_mutex);
      ++stats.accepted;
    }
    post_event(Connected{c});
    asio::co_spawn(ioc, writer(c), asio::detached);

    try {
      for (;;) {
        beast::flat_buffer buf;
        co_await c->ws.async_read(buf, asio::use_awaitable);
        if (!c->ws.got_text()) {
          handle_text(c, "<binary>");
          continue;
        }
        handle_text(c, beast::buffers_to_string(buf.data()));
      }
    } catch (const boost::system::system_error&) {
    }
    c->closed = true;
    c->notify.cancel();
    if (active == c) active.reset();
    post_event(Disconnected{c->id});
  }

  asio::awaitable<void> accept_loop() {
    for (;;) {
      tcp::socket s(ioc);
      boost::system::error_code ec;
      co_await acceptor->async_accept(s, asio::redirect_error(asio::use_awaitable, ec));
      if (ec) {
        if (ec == asio::error::operation_aborted || !acceptor->is_open()) co_return;
        continue;
      }
      asio::co_spawn(ioc, serve_connection(std::move(s)), asio::detached);
    }
  }

  // ----------------------------------------------------------- control side

  double session_t_ms() const { return session ? session->time_s() * 1000.0 : uptime_ms(); }

  void start_session(const std::string& shape_id) {
    const auto& h = cfg.harness;
    auto shape = make_target_shape(shape_id, h.shapes, h.plant.workspace_halfwidth_mm);
    // Never overwrite a directory left by an earlier run.
    do {
      ++session_counter;
      char name[64];
      std::snprintf(name, sizeof name, "%04llu_%s", static_cast<unsigned long long>(session_counter),
                    shape_id.c_str());
      session_id = name;
    } while (std::filesystem::exists(cfg.session_root / session_id));
    session.emplace(h, shape, "live", 0.0);
    session_wall0 = Clock::now();
    send(client, wire::session_start(0.0, session_id, shape_id));
    send(client, wire::shape(0.0, shape));
    send(client, wire::mode(0.0, "teleoperation"));
  }

  void end_session(bool partial, const std::string& reason) {
    if (!session) return;
    const double t_ms = session->time_s() * 1000.0;
    auto log = session->finish(partial, reason);
    session.reset();
    auto dir = cfg.session_root / session_id;
    nlohmann::json report = log.report ? log.report->to_json(false) : nlohmann::json();
    try {
      write_session(dir, log, cfg.write_frames);
      std::lock_guard lock(stats_mutex);
      ++stats.sessions_written;
      written.push_back(dir);
    } catch (const Error& e) {
      {
        std::lock_guard lock(stats_mutex);
        ++stats.write_failures;
      }
      send(client, wire::error(t_ms, e.category(), std::string("session aborted: ") + e.what()));
      log.partial = true;
      log.end_reason = "aborted: " + std::string(category_name(e.category()));
    }
    send(client, wire::session_end(t_ms, session_id, log.partial, log.end_reason, report));
    send(client, wire::mode(t_ms, "idle"));
  }

  void handle(Event& ev) {
    if (auto* c = std::get_if<Connected>(&ev)) {
      client = c->conn;
      start_session(cfg.shape_id);
      return;
    }
    if (auto* d = std::get_if<Disconnected>(&ev)) {
      if (client && client->id == d->id) {
        end_session(true, "disconnect");
        std::lock_guard lock(stats_mutex);
        dropped_before += client->queue.dropped();
        stats.telemetry_dropped = dropped_before;
        client.reset();
      }
      return;
    }
    auto& m = std::get<Message>(ev);
    if (!client || client->id != m.id) return;
    if (const auto* p = std::get_if<wire::PoseMsg>(&m.msg)) {
      if (session && !session->ended())
        session->ingest(p->x, p->y, p->seq, p->t_ms);
      else
        send(client, wire::error(session_t_ms(), ErrorCategory::busy, "no active session", p->seq));
    } else if (const auto* s = std::get_if<wire::SessionStartMsg>(&m.msg)) {
      if (session && session->pose_count() > 0) {
        send(client, wire::error(session_t_ms(), ErrorCategory::busy, "a session is already running", s->seq));
        return;
      }
      const auto id = s->shape.value_or(session ? session->shape().id : cfg.shape_id);
      try {
        make_target_shape(id, cfg.harness.shapes, cfg.harness.plant.workspace_halfwidth_mm);
      } catch (const Error& e) {
        send(client, wire::error(session_t_ms(), e.category(), e.what(), s->seq));
        return;
      }
      session.reset();  // nothing was posted yet; discard it
      start_session(id);
    } else if (const auto* e = std::get_if<wire::SessionEndMsg>(&m.msg)) {
      if (session)
        end_session(false, "complete");
      else
        send(client, wire::error(session_t_ms(), ErrorCategory::busy, "no active session", e->seq));
    }
  }

  void control_loop() {
    while (running.load()) {
      std::deque<Event> events;
      {
        std::unique_lock lock(inbox_mutex);
        inbox_cv.wait_for(lock, std::chrono::milliseconds(1), [&] { return !inbox.empty() || !running.load(); });
        events.swap(inbox);
      }
      for (auto& ev : events) handle(ev);

      if (session) {
        const double t = std::chrono::duration<double>(Clock::now() - session_wall0).count() * cfg.time_scale;
        session->advance_to(t);
        for (const auto& s : session->take_telemetry()) {
          if (client) client->queue.push(wire::spot(s.t_s * 1000.0, s.spot_mm));
        }
        if (client) {
          wake_writer(client);
          std::lock_guard lock(stats_mutex);
          stats.telemetry_dropped = dropped_before + client->queue.dropped();
        }
        if (session->ended()) end_session(session->partial(), session->end_reason());
      }
    }
    if (session) end_session(true, "shutdown");
  }
};

TeleopServer::TeleopServer(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

TeleopServer::~TeleopServer() { stop(); }

unsigned short TeleopServer::start() {
  auto& m = *impl_;
  if (m.running.load()) fail(ErrorCategory::busy, "server already running");
  try {
    const auto addr = asio::ip::make_address(m.cfg.bind_address);
    m.acceptor.emplace(m.ioc, tcp::endpoint(addr, m.cfg.port));
  } catch (const boost::system::system_error& e) {
    fail(ErrorCategory::io, "cannot listen on " + m.cfg.bind_address + ":" + std::to_string(m.cfg.port) + ": " +
                                e.what());
  }
  m.running = true;
  asio::co_spawn(m.ioc, m.accept_loop(), asio::detached);
  m.io_thread = std::thread([&m] { m.ioc.run(); });
  m.control_thread = std::thread([&m] { m.control_loop(); });
  return m.acceptor->local_endpoint().port();
}

void TeleopServer::stop() {
  auto& m = *impl_;
  if (!m.running.exchange(false)) return;
  m.inbox_cv.notify_one();
  m.control_thread.join();
  // Let the final frames drain before tearing the sockets down.
  asio::post(m.ioc, [&m] {
    m.acceptor->close();
    if (m.active) {
      m.active->ws.async_close(websocket::close_code::going_away, [](boost::system::error_code) {});
    }
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  m.ioc.stop();
  m.io_thread.join();
}

ServiceStats TeleopServer::stats() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->stats;
}

std::vector<std::filesystem::path> TeleopServer::sessions() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->written;
}

}  // namespace magscan
