#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitforge/common/error.hpp"

namespace orbitforge::twin {

/// Raised when a message names an endpoint that was never registered.
class UnknownEndpoint : public Error {
 public:
  explicit UnknownEndpoint(const std::string& id) : Error("unknown endpoint " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

struct Endpoint {
  std::string id;
  std::string address;
  std::string name;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

nlohmann::json to_json(const Endpoint& e);

struct Message {
  std::string topic;
  std::uint64_t seq = 0;  // per topic, from 1
  std::string type;
  nlohmann::json body;
  std::string from;
};

/// Topic pub/sub plus request/reply between registered endpoints.
/// Delivery is synchronous and serialized; handlers may publish.
class Bus {
 public:
  using Handler = std::function<void(const Message&)>;
  using Responder = std::function<nlohmann::json(const Message&)>;

  static constexpr std::size_t kDefaultRetention = 1024;

  void register_endpoint(Endpoint e);
  void unregister_endpoint(const std::string& id);
  std::optional<Endpoint> discover(const std::string& id) const;
  std::vector<Endpoint> endpoints() const;

  /// Keep the last `n` messages of a topic for replay (0 keeps all).
  void set_retention(const std::string& topic, std::size_t n);

  /// Delivers retained messages with seq >= from_seq first (from_seq 0 = live
  /// only), then live ones, with no gap or duplicate between the two.
  std::uint64_t subscribe(const std::string& endpoint, const std::string& topic, Handler h,
                          std::uint64_t from_seq = 0);
  void unsubscribe(std::uint64_t subscription);

  /// Returns the topic sequence number assigned to the message.
  std::uint64_t publish(const std::string& from, const std::string& topic, const std::string& type,
                        nlohmann::json body);
  std::uint64_t last_seq(const std::string& topic) const;

  void serve(const std::string& endpoint, Responder r);
  nlohmann::json request(const std::string& from, const std::string& to, const std::string& type,
                         nlohmann::json body);

 private:
  struct Subscription {
    std::string endpoint;
    std::string topic;
    Handler handler;
  };
  struct Topic {
    std::uint64_t seq = 0;
    std::size_t retention = kDefaultRetention;
    std::deque<Message> history;
  };

  void require(const std::string& id) const;

  mutable std::recursive_mutex mu_;
  std::map<std::string, Endpoint> endpoints_;
  std::map<std::string, Topic> topics_;
  std::map<std::uint64_t, Subscription> subs_;
  std::map<std::string, Responder> responders_;
  std::uint64_t next_sub_ = 1;
};

}  // namespace orbitforge::twin
