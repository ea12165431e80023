// SPDX-License-Identifier: Apache-2.0
#include "sfs/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "sfs/event_log.hpp"

namespace sfs {
namespace {

using u128 = unsigned __int128;

std::uint64_t milli(double w) { return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(w * 1000))); }

}  // namespace

double outstanding_work(std::span<const PassLoad> passes) {
  double total = 0;
  for (const PassLoad& p : passes) total += static_cast<double>(p.units()) * p.w;
  return total;
}

std::vector<std::uint32_t> assign_threads(std::span<const PassLoad> passes, std::uint32_t C) {
  const std::size_t n = passes.size();
  std::vector<std::uint32_t> t(n, 0);
  if (n == 0) return t;

  std::vector<u128> work(n);
  u128 W = 0;
  for (std::size_t i = 0; i < n; ++i) {
    work[i] = u128{passes[i].units()} * milli(passes[i].w);
    W += work[i];
  }
  if (W == 0) {
    std::size_t first = 0;
    while (first < n && !passes[first].open) ++first;
    t[first < n ? first : 0] = C;
    return t;
  }

  std::vector<u128> rem(n);
  std::uint32_t given = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const u128 share = u128{C} * work[i];
    t[i] = static_cast<std::uint32_t>(share / W);
    rem[i] = share % W;
    given += t[i];
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < C; ++k, ++given) ++t[order[k % n]];

  std::uint32_t busy = 0;
  for (std::size_t i = 0; i < n; ++i) busy += passes[i].units() > 0;
  if (C >= busy) {
    for (std::size_t i = 0; i < n; ++i) {
      if (passes[i].units() == 0 || t[i] > 0) continue;
      std::size_t donor = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (t[j] >= t[donor]) donor = j;
      --t[donor];
      ++t[i];
    }
  }
  return t;
}

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Idle: return "idle";
    case Role::P1: return "pass1";
    case Role::P2: return "pass2";
  }
  return "?";
}

std::vector<Role> plan_rebalance(std::span<const Role> current, std::span<const std::uint32_t> target) {
  std::vector<Role> next(current.begin(), current.end());
  auto pass_role = [](std::size_t i) { return static_cast<Role>(i + 1); };

  // Workers keep their place from the lowest index up; the rest are movable.
  std::vector<std::uint32_t> have(target.size(), 0);
  std::vector<std::size_t> movable;
  for (std::size_t w = 0; w < next.size(); ++w) {
    if (next[w] == Role::Idle) continue;
    const std::size_t p = static_cast<std::size_t>(next[w]) - 1;
    if (p < target.size() && have[p] < target[p])
      ++have[p];
    else
      movable.push_back(w);
  }

  std::vector<std::size_t> idle;
  for (std::size_t w = 0; w < next.size(); ++w)
    if (next[w] == Role::Idle) idle.push_back(w);
  std::size_t idle_next = 0;
  std::size_t move_next = 0;
  for (std::size_t p = 0; p < target.size(); ++p) {
    while (have[p] < target[p]) {
      if (idle_next < idle.size()) {
        next[idle[idle_next++]] = pass_role(p);
      } else if (move_next < movable.size()) {
        next[movable[move_next++]] = pass_role(p);
      } else {
        break;
      }
      ++have[p];
    }
  }
  for (; move_next < movable.size(); ++move_next) next[movable[move_next]] = Role::Idle;
  return next;
}

std::uint32_t core_budget(const UtilizationSample& s, std::uint32_t current, std::uint32_t step) {
  const std::uint32_t total = std::max<std::uint32_t>(s.total_cores, 1);
  const std::uint32_t idle = total - std::min(s.busy_cores, total);
  const std::uint32_t running = s.checker_threads_running;
  std::uint32_t b = current;
  if (idle > running)
    b = current + std::min(idle - running, step);
  else if (running > idle)
    b = std::min(current, std::max<std::uint32_t>(idle, 1));
  return std::clamp<std::uint32_t>(b, 1, total);
}

FakeUtilization::FakeUtilization(std::uint32_t total_cores, std::vector<std::uint32_t> busy_script)
    : total_(total_cores), script_(std::move(busy_script)) {}

UtilizationSample FakeUtilization::sample(std::uint32_t running) {
  std::uint32_t busy = 0;
  if (!script_.empty()) busy = script_[std::min(next_++, script_.size() - 1)];
  return {total_, std::min(busy, total_), running, next_};
}

ProcStatUtilization::ProcStatUtilization()
    : cores_(std::max(1u, std::thread::hardware_concurrency())), last_(read()) {}

ProcStatUtilization::Jiffies ProcStatUtilization::read() {
  Jiffies j;
  std::ifstream stat("/proc/stat");
  std::string cpu;
  std::uint64_t user = 0, nice = 0, sys = 0, idle = 0, iowait = 0, irq = 0, softirq = 0, steal = 0;
  if (stat >> cpu >> user >> nice >> sys >> idle >> iowait >> irq >> softirq >> steal) {
    j.busy = user + nice + sys + irq + softirq + steal;
    j.total = j.busy + idle + iowait;
  }
  std::ifstream self("/proc/self/stat");
  std::string line;
  if (std::getline(self, line)) {
    // Fields after the parenthesised command name; utime and stime are 14 and 15.
    std::istringstream rest(line.substr(line.rfind(')') + 2));
    std::string field;
    for (int i = 3; i <= 15 && rest >> field; ++i)
      if (i == 14 || i == 15) j.self += std::stoull(field);
  }
  return j;
}

UtilizationSample ProcStatUtilization::sample(std::uint32_t running) {
  const Jiffies now = read();
  UtilizationSample s;
  s.total_cores = cores_;
  s.checker_threads_running = running;
  s.timestamp_ns = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  const std::uint64_t dt = now.total - last_.total;
  if (dt > 0) {
    const std::uint64_t busy = now.busy - last_.busy;
    const std::uint64_t self = now.self - last_.self;
    const std::uint64_t others = busy > self ? busy - self : 0;
    s.busy_cores = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(cores_, (others * cores_ + dt / 2) / dt));
  }
  last_ = now;
  return s;
}

Scheduler::Scheduler(SchedulerConfig cfg, std::uint32_t threads, std::unique_ptr<UtilizationProvider> util,
                     EventLog* events)
    : cfg_(cfg), threads_(std::max(threads, 1u)), budget_(threads_), util_(std::move(util)), events_(events) {}

std::vector<Role> Scheduler::tick(std::span<const PassLoad> loads, std::span<const Role> current) {
  TickRecord rec;
  rec.index = trace_.size();
  rec.loads.assign(loads.begin(), loads.end());
  if (util_) {
    std::uint32_t running = 0;
    for (Role r : current) running += r != Role::Idle;
    const UtilizationSample s = util_->sample(running);
    budget_ = std::min(core_budget(s, budget_, cfg_.budget_step), threads_);
    if (events_) events_->add(EventKind::Budget, -1, 0, rec.index, budget_);
  }
  rec.budget = budget_;
  rec.threads = assign_threads(loads, budget_);
  if (events_) {
    const std::uint64_t t1 = rec.threads.size() > 0 ? rec.threads[0] : 0;
    const std::uint64_t t2 = rec.threads.size() > 1 ? rec.threads[1] : 0;
    events_->add(EventKind::Tick, -1, 0, rec.index, t1 << 32 | t2);
  }
  std::vector<Role> next = plan_rebalance(current, rec.threads);
  trace_.push_back(std::move(rec));
  return next;
}

std::string Scheduler::trace_text() const {
  std::ostringstream os;
  for (const TickRecord& r : trace_) {
    os << "tick=" << r.index << " budget=" << r.budget;
    for (std::size_t i = 0; i < r.loads.size(); ++i)
      os << " p" << i + 1 << "=(q=" << r.loads[i].q << ",n=" << r.loads[i].n << ",w=" << r.loads[i].w
         << ",units=" << r.loads[i].units() << ")";
    os << " threads=";
    for (std::size_t i = 0; i < r.threads.size(); ++i) os << (i ? "," : "") << r.threads[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace sfs
