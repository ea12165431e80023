// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace sfs {

/// Multi-producer multi-consumer FIFO. Each item carries an element count
/// (inodes in a range, 1 for a directory block) so the scheduler can read
/// outstanding work without locking.
template <typename T>
class WorkQueue {
 public:
  void push(T item, std::uint64_t elements = 1) {
    {
      std::lock_guard lock(mu_);
      items_.push_back({std::move(item), elements});
      length_.fetch_add(1, std::memory_order_relaxed);
      elements_.fetch_add(elements, std::memory_order_relaxed);
      ++enqueued_;
    }
    cv_.notify_one();
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mu_);
    return pop_locked();
  }

  /// Blocks until an item arrives or the queue is closed and empty.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty() || closed_; });
    return pop_locked();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  bool drained() const {
    std::lock_guard lock(mu_);
    return closed_ && items_.empty();
  }

  std::uint64_t length() const { return length_.load(std::memory_order_relaxed); }
  std::uint64_t elements() const { return elements_.load(std::memory_order_relaxed); }
  std::uint64_t enqueued() const {
    std::lock_guard lock(mu_);
    return enqueued_;
  }
  std::uint64_t dequeued() const {
    std::lock_guard lock(mu_);
    return dequeued_;
  }

 private:
  struct Slot {
    T item;
    std::uint64_t elements;
  };

  std::optional<T> pop_locked() {
    if (items_.empty()) return std::nullopt;
    Slot s = std::move(items_.front());
    items_.pop_front();
    length_.fetch_sub(1, std::memory_order_relaxed);
    elements_.fetch_sub(s.elements, std::memory_order_relaxed);
    ++dequeued_;
    return std::move(s.item);
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Slot> items_;
  bool closed_ = false;
  std::uint64_t enqueued_ = 0;
  std::uint64_t dequeued_ = 0;
  std::atomic<std::uint64_t> length_{0};
  std::atomic<std::uint64_t> elements_{0};
};

/// A WorkQueue whose consumers get nothing until the gate opens. Producers
/// may push at any time.
template <typename T>
class DeferredQueue {
 public:
  void push(T item) { q_.push(std::move(item)); }

  std::optional<T> try_pop() {
    if (!open_.load(std::memory_order_acquire)) return std::nullopt;
    return q_.try_pop();
  }

  void open_gate() { open_.store(true, std::memory_order_release); }
  bool gate_open() const { return open_.load(std::memory_order_acquire); }
  void close() { q_.close(); }
  bool drained() const { return q_.drained(); }

  /// Items a consumer could take now; 0 while the gate is shut.
  std::uint64_t available() const { return gate_open() ? q_.length() : 0; }
  std::uint64_t length() const { return q_.length(); }
  std::uint64_t enqueued() const { return q_.enqueued(); }
  std::uint64_t dequeued() const { return q_.dequeued(); }

 private:
  WorkQueue<T> q_;
  std::atomic<bool> open_{false};
};

}  // namespace sfs
