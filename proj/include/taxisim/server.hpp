#pragma once

#include <deque>
#include <memory>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "taxisim/session_service.hpp"

namespace taxisim {

namespace server_detail {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class WebSocketConnection : public std::enable_shared_from_this<WebSocketConnection> {
 public:
  WebSocketConnection(tcp::socket socket, SessionManager& manager) : ws_(std::move(socket)), manager_(manager) {}

  void start(http::request<http::string_body> request) {
    std::weak_ptr<WebSocketConnection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    endpoint_ = std::make_unique<ProtocolEndpoint>(manager_, [weak, executor](const json& j) {
      net::post(executor, [weak, text = j.dump()] {
        if (auto self = weak.lock()) self->enqueue(text);
      });
    });
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->endpoint_.reset();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->endpoint_->handle(text);
      self->read();
    });
  }

  void enqueue(std::string text) {
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  websocket::stream<tcp::socket> ws_;
  SessionManager& manager_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  std::unique_ptr<ProtocolEndpoint> endpoint_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, SessionManager& manager) : socket_(std::move(socket)), manager_(manager) {}

  void start() { read(); }

 private:
  void read() {
    request_ = {};
    http::async_read(socket_, buffer_, request_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->on_request();
    });
  }

  void on_request() {
    if (websocket::is_upgrade(request_)) {
      if (request_.target() != "/ws") {
        respond({404, "application/json", R"({"error":"NotFound","message":"websocket lives at /ws"})"});
        return;
      }
      std::make_shared<WebSocketConnection>(std::move(socket_), manager_)->start(std::move(request_));
      return;
    }
    const std::string method(request_.method_string());
    const std::string target(request_.target());
    respond(handle_http(manager_, method, target, request_.body()));
  }

  void respond(const HttpReply& reply) {
    auto response = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status),
                                                                        request_.version());
    response->set(http::field::content_type, reply.content_type);
    response->keep_alive(request_.keep_alive());
    response->body() = reply.body;
    response->prepare_payload();
    http::async_write(socket_, *response, [self = shared_from_this(), response](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (response->keep_alive()) self->read();
      else self->socket_.shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  tcp::socket socket_;
  SessionManager& manager_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace server_detail

// HTTP session management and the WebSocket protocol on one port.
class Server {
 public:
  Server(SessionManager& manager, const std::string& address, unsigned short port)
      : manager_(manager), acceptor_(ioc_), timer_(ioc_) {
    using server_detail::tcp;
    const tcp::endpoint endpoint(server_detail::net::ip::make_address(address), port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(server_detail::net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // Serves on a background thread until stop().
  void start() {
    accept();
    poll();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  // Serves on the calling thread.
  void run() {
    accept();
    poll();
    ioc_.run();
  }

  void stop() {
    ioc_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, server_detail::tcp::socket socket) {
      if (!ec) std::make_shared<server_detail::HttpConnection>(std::move(socket), manager_)->start();
      if (acceptor_.is_open()) accept();
    });
  }

  void poll() {
    timer_.expires_after(std::chrono::milliseconds(200));
    timer_.async_wait([this](boost::beast::error_code ec) {
      if (ec) return;
      manager_.poll_timeouts();
      poll();
    });
  }

  SessionManager& manager_;
  server_detail::net::io_context ioc_;
  server_detail::tcp::acceptor acceptor_;
  server_detail::net::steady_timer timer_;
  std::thread thread_;
};

}  // namespace taxisim
