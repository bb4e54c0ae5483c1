#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace orbitforge::teleop {

/// Single-producer single-consumer triple buffer. The consumer always sees
/// the most recent complete value; older unread values are dropped. Neither
/// side ever blocks.
template <class T>
class LatestMailbox {
 public:
  void publish(const T& value) {
    buf_[back_] = value;
    const std::uint8_t old = middle_.exchange(back_ | kFresh, std::memory_order_acq_rel);
    back_ = old & kIndex;
  }

  /// Returns the newest value if one arrived since the last call.
  std::optional<T> take() {
    if (!(middle_.load(std::memory_order_acquire) & kFresh)) return std::nullopt;
    const std::uint8_t old = middle_.exchange(front_, std::memory_order_acq_rel);
    front_ = old & kIndex;
    return buf_[front_];
  }

 private:
  static constexpr std::uint8_t kIndex = 0x3;
  static constexpr std::uint8_t kFresh = 0x4;

  std::array<T, 3> buf_{};
  std::atomic<std::uint8_t> middle_{1};
  std::uint8_t back_ = 0;   // producer-owned
  std::uint8_t front_ = 2;  // consumer-owned
};

/// Bounded single-producer single-consumer FIFO.
template <class T, std::size_t N>
class SpscRing {
  static_assert(N >= 2);

 public:
  /// False when full; the value is not enqueued.
  bool push(const T& value) {
    const std::size_t head = head_.load(std::memory_order_relaxed);
    const std::size_t next = (head + 1) % N;
    if (next == tail_.load(std::memory_order_acquire)) return false;
    buf_[head] = value;
    head_.store(next, std::memory_order_release);
    return true;
  }

  std::optional<T> pop() {
    const std::size_t tail = tail_.load(std::memory_order_relaxed);
    if (tail == head_.load(std::memory_order_acquire)) return std::nullopt;
    T v = buf_[tail];
    tail_.store((tail + 1) % N, std::memory_order_release);
    return v;
  }

  static constexpr std::size_t capacity() { return N - 1; }

 private:
  std::array<T, N> buf_{};
  std::atomic<std::size_t> head_{0};
  std::atomic<std::size_t> tail_{0};
};

}  // namespace orbitforge::teleop
