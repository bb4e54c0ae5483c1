#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "json.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/twin/bus.hpp"

namespace orbitforge::twin {

class FrameError : public ParseError {
 public:
  using ParseError::ParseError;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

struct Frame {
  std::string topic;
  std::uint64_t seq = 0;
  std::string type;
  nlohmann::json body = nlohmann::json::object();

  friend bool operator==(const Frame&, const Frame&) = default;
};

nlohmann::json to_json(const Frame& f);
Frame frame_from_json(const nlohmann::json& j);

/// 4-byte big-endian payload length followed by the JSON payload.
std::string encode_frame(const Frame& f);

/// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Throws FrameError on an oversized length or a malformed payload.
  std::optional<Frame> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::string buf_;
};

struct BindAddress {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; port 0 picks an ephemeral port.
BindAddress parse_bind(const std::string& s);

/// Blocking client side of the frame transport.
class FrameConnection {
 public:
  static FrameConnection connect(const std::string& host, std::uint16_t port);
  FrameConnection(FrameConnection&& o) noexcept;
  FrameConnection& operator=(FrameConnection&& o) noexcept;
  FrameConnection(const FrameConnection&) = delete;
  FrameConnection& operator=(const FrameConnection&) = delete;
  ~FrameConnection();

  void send(const Frame& f);
  /// Writes bytes as they are, for clients that frame their own payloads.
  void send_raw(std::string_view bytes);
  std::optional<Frame> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  explicit FrameConnection(int fd) : fd_(fd) {}
  int fd_ = -1;
  FrameDecoder decoder_;
};

/// Bridges socket clients onto the bus. Each client becomes an endpoint;
/// "control" frames manage subscriptions, everything else is forwarded as a
/// request to `target` and answered with a "reply" frame carrying the same seq.
class FrameServer {
 public:
  FrameServer(Bus& bus, std::string target);
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;
  ~FrameServer();

  void start(const BindAddress& bind);
  std::uint16_t port() const { return port_; }
  std::string address() const;
  void stop();

 private:
  struct Client {
    int fd = -1;
    std::string id;
    std::thread reader;
    std::thread writer;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> outbound;
    bool closing = false;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void read_loop(Client& c);
  void write_loop(Client& c);
  void enqueue(Client& c, const Frame& f);
  void handle(Client& c, const Frame& f);
  void reap(bool all);

  Bus& bus_;
  std::string target_;
  std::string host_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex clients_mu_;
  std::list<std::unique_ptr<Client>> clients_;
  std::uint64_t next_client_ = 1;
};

}  // namespace orbitforge::twin
