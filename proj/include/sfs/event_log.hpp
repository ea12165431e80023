// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <string_view>
#include <vector>

namespace sfs {

enum class EventKind : std::uint8_t {
  Enqueue,      // pass, a = item key
  Dequeue,      // pass, a = item key
  Parse,        // a = dir, b = block
  Certify,      // a = dir, b = block
  Pass1Closed,
  GateOpen,
  Migration,    // a = from role, b = to role
  Barrier,      // a = commit number, b = patches applied
  Tick,         // a = tick index, b = packed assignment (t1 << 32 | t2)
  Budget,       // a = tick index, b = budget
};

std::string_view to_string(EventKind k) noexcept;

struct Event {
  std::uint64_t seq = 0;
  std::uint64_t nanos = 0;
  EventKind kind = EventKind::Enqueue;
  std::int32_t worker = -1;
  std::uint8_t pass = 0;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

/// Append-only, thread-safe. Sequence numbers give a total order consistent
/// with each thread's program order.
class EventLog {
 public:
  EventLog() : start_(std::chrono::steady_clock::now()) {}

  void add(EventKind kind, std::int32_t worker = -1, std::uint8_t pass = 0, std::uint64_t a = 0,
           std::uint64_t b = 0) {
    const auto now = std::chrono::steady_clock::now();
    std::lock_guard lock(mu_);
    events_.push_back({events_.size(), static_cast<std::uint64_t>((now - start_).count()), kind, worker, pass, a, b});
  }

  std::vector<Event> snapshot() const {
    std::lock_guard lock(mu_);
    return events_;
  }
  std::vector<Event> of_kind(EventKind kind) const;
  std::size_t count(EventKind kind) const { return of_kind(kind).size(); }

  void write(std::ostream& os) const;

 private:
  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mu_;
  std::vector<Event> events_;
};

}  // namespace sfs
