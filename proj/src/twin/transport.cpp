#include "orbitforge/twin/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace orbitforge::twin {

nlohmann::json to_json(const Frame& f) {
  return {{"topic", f.topic}, {"seq", f.seq}, {"type", f.type}, {"body", f.body}};
}

Frame frame_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FrameError("frame payload is not an object");
  for (const char* key : {"topic", "seq", "type", "body"})
    if (!j.contains(key)) throw FrameError(std::string("frame lacks field ") + key);
  if (!j["topic"].is_string() || !j["type"].is_string())
    throw FrameError("frame topic/type must be strings");
  if (!j["seq"].is_number_unsigned()) throw FrameError("frame seq must be a non-negative integer");
  return Frame{j["topic"].get<std::string>(), j["seq"].get<std::uint64_t>(),
               j["type"].get<std::string>(), j["body"]};
}

std::string encode_frame(const Frame& f) {
  const std::string payload = to_json(f).dump();
  if (payload.size() > kMaxFrameBytes) throw FrameError("frame exceeds maximum size");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += payload;
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buf_.append(bytes); }

std::optional<Frame> FrameDecoder::next() {
  if (buf_.size() < 4) return std::nullopt;
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[i])); };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (n > kMaxFrameBytes) throw FrameError("frame length " + std::to_string(n) + " exceeds maximum");
  if (buf_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  const std::string payload = buf_.substr(4, n);
  buf_.erase(0, 4 + static_cast<std::size_t>(n));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw FrameError(std::string("frame payload is not JSON: ") + e.what());
  }
  return frame_from_json(j);
}

BindAddress parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0)
    throw ValidationError("bind", "expected host:port, got '" + s + "'");
  BindAddress b;
  b.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  try {
    std::size_t used = 0;
    const long p = std::stol(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range("port");
    b.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw ValidationError("bind", "bad port '" + port + "'");
  }
  return b;
}

namespace {

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1)
    throw TransportError("unsupported address " + host + " (IPv4 literal expected)");
  return addr;
}

void send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

FrameConnection FrameConnection::connect(const std::string& host, std::uint16_t port) {
  const auto addr = resolve(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw TransportError("connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  return FrameConnection(fd);
}

FrameConnection::FrameConnection(FrameConnection&& o) noexcept
    : fd_(o.fd_), decoder_(std::move(o.decoder_)) {
  o.fd_ = -1;
}

FrameConnection& FrameConnection::operator=(FrameConnection&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    decoder_ = std::move(o.decoder_);
    o.fd_ = -1;
  }
  return *this;
}

FrameConnection::~FrameConnection() { close(); }

void FrameConnection::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void FrameConnection::send(const Frame& f) {
  if (fd_ < 0) throw TransportError("connection closed");
  send_all(fd_, encode_frame(f));
}

void FrameConnection::send_raw(std::string_view bytes) {
  if (fd_ < 0) throw TransportError("connection closed");
  send_all(fd_, std::string(bytes));
}

std::optional<Frame> FrameConnection::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto f = decoder_.next()) return f;
    if (fd_ < 0) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    char buf[8192];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n <= 0) {
      close();
      return decoder_.next();
    }
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

FrameServer::FrameServer(Bus& bus, std::string target) : bus_(bus), target_(std::move(target)) {}

FrameServer::~FrameServer() { stop(); }

std::string FrameServer::address() const { return host_ + ":" + std::to_string(port_); }

void FrameServer::start(const BindAddress& bind) {
  if (running_) throw TransportError("server already running");
  const auto addr = resolve(bind.host, bind.port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 8) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("bind " + bind.host + ":" + std::to_string(bind.port) + ": " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  host_ = bind.host;
  port_ = ntohs(bound.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void FrameServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  listen_fd_ = -1;
  {
    std::lock_guard lock(clients_mu_);
    for (auto& c : clients_) ::shutdown(c->fd, SHUT_RDWR);
  }
  reap(true);
}

void FrameServer::reap(bool all) {
  std::list<std::unique_ptr<Client>> dead;
  {
    std::lock_guard lock(clients_mu_);
    for (auto it = clients_.begin(); it != clients_.end();) {
      if (all || (*it)->done) {
        dead.push_back(std::move(*it));
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) c->reader.join();
    {
      std::lock_guard lock(c->mu);
      c->closing = true;
    }
    c->cv.notify_all();
    if (c->writer.joinable()) c->writer.join();
    bus_.unregister_endpoint(c->id);
    ::close(c->fd);
  }
}

void FrameServer::accept_loop() {
  while (running_) {
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    reap(false);
    auto c = std::make_unique<Client>();
    c->fd = fd;
    c->id = "client-" + std::to_string(next_client_++);
    char ip[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
    bus_.register_endpoint(
        {c->id, "tcp://" + std::string(ip) + ":" + std::to_string(ntohs(peer.sin_port)), "frame-client"});
    Client& ref = *c;
    {
      std::lock_guard lock(clients_mu_);
      clients_.push_back(std::move(c));
    }
    ref.writer = std::thread([this, &ref] { write_loop(ref); });
    ref.reader = std::thread([this, &ref] { read_loop(ref); });
  }
}

void FrameServer::enqueue(Client& c, const Frame& f) {
  {
    std::lock_guard lock(c.mu);
    if (c.closing) return;
    c.outbound.push_back(encode_frame(f));
  }
  c.cv.notify_one();
}

void FrameServer::write_loop(Client& c) {
  for (;;) {
    std::string data;
    {
      std::unique_lock lock(c.mu);
      c.cv.wait(lock, [&] { return c.closing || !c.outbound.empty(); });
      if (c.outbound.empty()) {
        ::shutdown(c.fd, SHUT_RDWR);
        return;
      }
      data = std::move(c.outbound.front());
      c.outbound.pop_front();
    }
    try {
      send_all(c.fd, data);
    } catch (const TransportError&) {
      ::shutdown(c.fd, SHUT_RDWR);
      return;
    }
  }
}

void FrameServer::handle(Client& c, const Frame& f) {
  if (f.topic == "control") {
    if (f.type == "subscribe") {
      const std::string topic = f.body.value("topic", "");
      const std::uint64_t from = f.body.value("from_seq", std::uint64_t{0});
      enqueue(c, Frame{"reply", f.seq, "subscribed", {{"topic", topic}, {"from_seq", from}}});
      bus_.subscribe(c.id, topic, [this, &c](const Message& m) {
        enqueue(c, Frame{m.topic, m.seq, m.type, m.body});
      }, from);
      return;
    }
    if (f.type == "endpoints") {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& e : bus_.endpoints()) list.push_back(to_json(e));
      enqueue(c, Frame{"reply", f.seq, "endpoints", {{"endpoints", list}}});
      return;
    }
    enqueue(c, Frame{"reply", f.seq, f.type, {{"error", "unknown control type " + f.type}}});
    return;
  }
  nlohmann::json reply;
  try {
    reply = bus_.request(c.id, target_, f.type, {{"topic", f.topic}, {"body", f.body}});
  } catch (const std::exception& e) {
    reply = {{"error", e.what()}};
  }
  enqueue(c, Frame{"reply", f.seq, f.type, reply});
}

void FrameServer::read_loop(Client& c) {
  FrameDecoder decoder;
  char buf[8192];
  for (;;) {
    const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    try {
      while (auto f = decoder.next()) handle(c, *f);
    } catch (const FrameError& e) {
      enqueue(c, Frame{"reply", 0, "error", {{"error", e.what()}}});
      break;
    }
  }
  {
    std::lock_guard lock(c.mu);
    c.closing = true;
  }
  c.cv.notify_all();
  bus_.unregister_endpoint(c.id);
  c.done = true;
}

}  // namespace orbitforge::twin
