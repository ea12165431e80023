// SPDX-License-Identifier: Apache-2.0
#include "sfs/event_log.hpp"

#include <array>
#include <ostream>

namespace sfs {

std::string_view to_string(EventKind k) noexcept {
  static constexpr std::array<std::string_view, 10> names = {
      "enqueue", "dequeue", "parse", "certify", "pass1-closed", "gate-open", "migration", "barrier", "tick", "budget",
  };
  return names[static_cast<std::size_t>(k)];
}

std::vector<Event> EventLog::of_kind(EventKind kind) const {
  std::lock_guard lock(mu_);
  std::vector<Event> out;
  for (const Event& e : events_)
    if (e.kind == kind) out.push_back(e);
  return out;
}

void EventLog::write(std::ostream& os) const {
  std::lock_guard lock(mu_);
  for (const Event& e : events_)
    os << "seq=" << e.seq << " ns=" << e.nanos << " event=" << to_string(e.kind) << " worker=" << e.worker
       << " pass=" << unsigned{e.pass} << " a=" << e.a << " b=" << e.b << '\n';
}

}  // namespace sfs
