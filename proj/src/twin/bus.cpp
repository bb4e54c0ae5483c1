#include "orbitforge/twin/bus.hpp"

namespace orbitforge::twin {

nlohmann::json to_json(const Endpoint& e) {
  return {{"id", e.id}, {"address", e.address}, {"name", e.name}};
}

void Bus::register_endpoint(Endpoint e) {
  if (e.id.empty()) throw ValidationError("endpoint.id", "must not be empty");
  std::lock_guard lock(mu_);
  if (endpoints_.count(e.id)) throw ValidationError("endpoint.id", "duplicate id " + e.id);
  endpoints_.emplace(e.id, std::move(e));
}

void Bus::unregister_endpoint(const std::string& id) {
  std::lock_guard lock(mu_);
  endpoints_.erase(id);
  responders_.erase(id);
  for (auto it = subs_.begin(); it != subs_.end();) {
    if (it->second.endpoint == id) it = subs_.erase(it);
    else ++it;
  }
}

std::optional<Endpoint> Bus::discover(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = endpoints_.find(id);
  if (it == endpoints_.end()) return std::nullopt;
  return it->second;
}

std::vector<Endpoint> Bus::endpoints() const {
  std::lock_guard lock(mu_);
  std::vector<Endpoint> out;
  for (const auto& [id, e] : endpoints_) out.push_back(e);
  return out;
}

void Bus::require(const std::string& id) const {
  if (!endpoints_.count(id)) throw UnknownEndpoint(id);
}

void Bus::set_retention(const std::string& topic, std::size_t n) {
  std::lock_guard lock(mu_);
  auto& t = topics_[topic];
  t.retention = n;
  while (n != 0 && t.history.size() > n) t.history.pop_front();
}

std::uint64_t Bus::subscribe(const std::string& endpoint, const std::string& topic, Handler h,
                             std::uint64_t from_seq) {
  std::lock_guard lock(mu_);
  require(endpoint);
  if (from_seq > 0) {
    const auto& t = topics_[topic];
    // copy so a handler that publishes cannot invalidate the iteration
    const std::deque<Message> history = t.history;
    for (const auto& m : history)
      if (m.seq >= from_seq) h(m);
  }
  const auto id = next_sub_++;
  subs_.emplace(id, Subscription{endpoint, topic, std::move(h)});
  return id;
}

void Bus::unsubscribe(std::uint64_t subscription) {
  std::lock_guard lock(mu_);
  subs_.erase(subscription);
}

std::uint64_t Bus::publish(const std::string& from, const std::string& topic,
                           const std::string& type, nlohmann::json body) {
  std::lock_guard lock(mu_);
  require(from);
  auto& t = topics_[topic];
  Message m{topic, ++t.seq, type, std::move(body), from};
  t.history.push_back(m);
  if (t.retention != 0 && t.history.size() > t.retention) t.history.pop_front();
  std::vector<Handler> targets;
  for (const auto& [id, s] : subs_)
    if (s.topic == topic && endpoints_.count(s.endpoint)) targets.push_back(s.handler);
  for (const auto& h : targets) h(m);
  return m.seq;
}

std::uint64_t Bus::last_seq(const std::string& topic) const {
  std::lock_guard lock(mu_);
  const auto it = topics_.find(topic);
  return it == topics_.end() ? 0 : it->second.seq;
}

void Bus::serve(const std::string& endpoint, Responder r) {
  std::lock_guard lock(mu_);
  require(endpoint);
  responders_[endpoint] = std::move(r);
}

nlohmann::json Bus::request(const std::string& from, const std::string& to,
                            const std::string& type, nlohmann::json body) {
  Responder r;
  {
    std::lock_guard lock(mu_);
    require(from);
    require(to);
    const auto it = responders_.find(to);
    if (it == responders_.end()) throw UnknownEndpoint(to + " (no responder)");
    r = it->second;
  }
  // outside the lock: responders may block on their own state
  return r(Message{"request", 0, type, std::move(body), from});
}

}  // namespace orbitforge::twin
