#include "crowdinput/relay_server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <future>
#include <iostream>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "crowdinput/app_host.hpp"

namespace crowdinput {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {
constexpr ConnectionId kInProcessApp = 1;
}

struct RelayServer::Impl {
  class Conn : public std::enable_shared_from_this<Conn> {
   public:
    Conn(tcp::socket socket, Impl& server, ConnectionId id) : ws_(std::move(socket)), server_(server), id_(id) {}

    void run() {
      ws_.text(true);
      ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->server_.on_open(self);
        self->read();
      });
    }

    void send(std::string frame) {
      out_.push_back(std::move(frame));
      if (out_.size() == 1) write();
    }

    void close() {
      if (closing_) return;
      closing_ = true;
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }

    ConnectionId id() const { return id_; }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
          self->server_.on_close(self->id_);
          return;
        }
        auto text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->server_.on_frame(self->id_, text);
        self->read();
      });
    }

    void write() {
      ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return;
        self->out_.pop_front();
        if (!self->out_.empty()) self->write();
      });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Impl& server_;
    ConnectionId id_;
    beast::flat_buffer buffer_;
    std::deque<std::string> out_;
    bool closing_ = false;
  };

  Impl(ServerConfig cfg, std::unique_ptr<apps::App> app, std::optional<policy::ListWatcher> lists)
      : config(std::move(cfg)), session(config.bounds), acceptor(ioc), timer(ioc) {
    if (!config.clock) {
      auto origin = std::chrono::steady_clock::now();
      config.clock = [origin] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin).count();
      };
    }
    if (app) {
      session.connect(kInProcessApp);
      session.register_connection(kInProcessApp, Hello{Role::App, std::nullopt}, config.clock(), app_seq);
      host.emplace(
          std::move(app),
          [this](HostOutput out) { net::post(ioc, [this, out = std::move(out)] { on_host_output(out); }); },
          std::move(lists));
    }
  }

  void start() {
    tcp::endpoint endpoint(net::ip::make_address(config.address), config.port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen();
    bound_port = acceptor.local_endpoint().port();
    accept();
    schedule_tick();
    io_thread = std::thread([this] { ioc.run(); });
  }

  void stop() {
    if (!io_thread.joinable()) {
      if (host) host->stop();
      return;
    }
    net::post(ioc, [this] {
      beast::error_code ec;
      acceptor.close(ec);
      timer.cancel();
      for (auto& [id, conn] : conns) conn->close();
    });
    // Give close handshakes a moment before tearing the loop down.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc.stop();
    io_thread.join();
    if (host) host->stop();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Conn>(std::move(socket), *this, next_id++)->run();
      accept();
    });
  }

  void schedule_tick() {
    timer.expires_after(std::chrono::milliseconds(config.poll_interval_ms));
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      if (host) host->advance_to(config.clock());
      schedule_tick();
    });
  }

  void on_open(const std::shared_ptr<Conn>& conn) {
    session.connect(conn->id());
    conns[conn->id()] = conn;
  }

  void on_close(ConnectionId id) {
    perform(session.disconnect(id));
    conns.erase(id);
  }

  void on_frame(ConnectionId id, std::string_view text) { perform(session.receive_frame(id, text, config.clock())); }

  void send(ConnectionId to, const Envelope& env) {
    auto it = conns.find(to);
    if (it != conns.end()) it->second->send(encode(env, config.bounds));
  }

  void perform(const Dispatch& dispatch) {
    for (const auto& frame : dispatch.frames) send(frame.to, frame.message);
    if (dispatch.app) {
      for (const auto& input : dispatch.app_inputs) forward(*dispatch.app, input);
    }
    for (auto id : dispatch.close) {
      auto it = conns.find(id);
      if (it != conns.end()) {
        it->second->close();
        conns.erase(it);
      }
    }
  }

  void forward(ConnectionId app, const AppInput& input) {
    if (app == kInProcessApp && host) {
      std::int64_t ts = std::visit([](const auto& in) { return in.server_ts_ms; }, input);
      host->post(input, ts);
      return;
    }
    auto it = conns.find(app);
    if (it == conns.end()) return;
    const auto seq = session.next_outbound_seq(app);
    if (const auto* admitted = std::get_if<AdmittedEvent>(&input)) {
      it->second->send(encode_admitted(*admitted, seq));
    } else if (const auto* ctx = std::get_if<ContextUpdate>(&input)) {
      it->second->send(encode(Envelope{seq, ctx->payload}, config.bounds));
    } else if (const auto* joined = std::get_if<ViewerJoined>(&input)) {
      it->second->send(encode(Envelope{seq, Hello{Role::Viewer, joined->user}}, config.bounds));
    }
  }

  void on_host_output(const HostOutput& out) {
    for (const auto& update : out.updates) {
      try {
        perform(session.push_app_update(kInProcessApp, update, out.ts_ms, ++app_seq));
      } catch (const Error& e) {
        std::cerr << "app update dropped: " << e.what() << '\n';
      }
    }
    if (out.rejection) {
      if (auto conn = session.connection_of(out.rejection->user)) {
        send(*conn, Envelope{session.next_outbound_seq(*conn), ErrorBody{out.rejection->reason, out.rejection->detail}});
      }
    }
  }

  void drain() {
    if (host) host->drain();
    if (!io_thread.joinable()) return;
    std::promise<void> done;
    net::post(ioc, [&] { done.set_value(); });
    done.get_future().wait();
  }

  ServerConfig config;
  Session session;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::steady_timer timer;
  std::thread io_thread;
  std::optional<AppHost> host;
  std::map<ConnectionId, std::shared_ptr<Conn>> conns;
  ConnectionId next_id = 2;
  std::uint64_t app_seq = 1;
  std::atomic<std::uint16_t> bound_port{0};
};

RelayServer::RelayServer(ServerConfig config, std::unique_ptr<apps::App> app, std::optional<policy::ListWatcher> lists)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(app), std::move(lists))) {}

RelayServer::~RelayServer() { stop(); }

void RelayServer::start() { impl_->start(); }

void RelayServer::stop() {
  if (impl_) impl_->stop();
}

std::uint16_t RelayServer::port() const { return impl_->bound_port; }

void RelayServer::drain() { impl_->drain(); }

SessionStats RelayServer::stats() const {
  if (!impl_->io_thread.joinable()) return impl_->session.stats();
  std::promise<SessionStats> result;
  net::post(impl_->ioc, [&] { result.set_value(impl_->session.stats()); });
  return result.get_future().get();
}

std::uint64_t RelayServer::app_admitted() const { return impl_->host ? impl_->host->admitted() : 0; }

std::uint64_t RelayServer::app_rejected() const { return impl_->host ? impl_->host->rejected() : 0; }

std::size_t RelayServer::open_connections() const {
  if (!impl_->io_thread.joinable()) return impl_->conns.size();
  std::promise<std::size_t> result;
  net::post(impl_->ioc, [&] { result.set_value(impl_->conns.size()); });
  return result.get_future().get();
}

std::string RelayServer::export_replay() const {
  if (!impl_->io_thread.joinable()) return impl_->session.export_replay();
  std::promise<std::string> result;
  net::post(impl_->ioc, [&] { result.set_value(impl_->session.export_replay()); });
  return result.get_future().get();
}

std::string RelayServer::app_state() { return impl_->host ? impl_->host->state_json() : std::string(); }

}  // namespace crowdinput
