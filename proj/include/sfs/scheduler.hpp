// SPDX-License-Identifier: Apache-2.0
//
// Work-proportional thread assignment and the core-budget controller.
//
//   W      = sum_i q_i * n_i * w_i
//   t_i    = C * q_i * n_i * w_i / W, rounded by largest remainder
//
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfs {

class EventLog;

struct PassLoad {
  std::uint64_t q = 0;                     // queued items
  std::uint64_t n = 0;                     // elements per item
  double w = 1.0;                          // weight, resolved to 1/1000
  std::optional<std::uint64_t> elements;   // exact element total; replaces q * n when set
  bool open = true;                        // false once the pass has finished

  std::uint64_t units() const { return elements ? *elements : q * n; }
};

double outstanding_work(std::span<const PassLoad> passes);

/// Threads per pass; sums to C. With no outstanding work, all C go to the
/// first open pass (the first pass when none is open).
std::vector<std::uint32_t> assign_threads(std::span<const PassLoad> passes, std::uint32_t C);

enum class Role : std::uint8_t { Idle, P1, P2 };
std::string_view to_string(Role r) noexcept;

/// Moves the fewest workers so that pass i has target[i] workers (P1 = index
/// 0). Deficits draw from idle workers first, then from surplus pools;
/// workers left over go idle.
std::vector<Role> plan_rebalance(std::span<const Role> current, std::span<const std::uint32_t> target);

struct UtilizationSample {
  std::uint32_t total_cores = 1;
  std::uint32_t busy_cores = 0;               // not counting the checker
  std::uint32_t checker_threads_running = 0;
  std::uint64_t timestamp_ns = 0;
};

std::uint32_t core_budget(const UtilizationSample& s, std::uint32_t current, std::uint32_t step = 2);

class UtilizationProvider {
 public:
  virtual ~UtilizationProvider() = default;
  virtual UtilizationSample sample(std::uint32_t checker_threads_running) = 0;
};

/// Replays a script of busy-core counts, one per call; the last value repeats.
class FakeUtilization final : public UtilizationProvider {
 public:
  FakeUtilization(std::uint32_t total_cores, std::vector<std::uint32_t> busy_script);
  UtilizationSample sample(std::uint32_t running) override;

 private:
  std::uint32_t total_;
  std::vector<std::uint32_t> script_;
  std::size_t next_ = 0;
};

/// Busy cores from /proc/stat minus this process's own CPU time.
class ProcStatUtilization final : public UtilizationProvider {
 public:
  ProcStatUtilization();
  UtilizationSample sample(std::uint32_t running) override;

 private:
  struct Jiffies {
    std::uint64_t busy = 0, total = 0, self = 0;
  };
  static Jiffies read();

  std::uint32_t cores_;
  Jiffies last_;
};

struct SchedulerConfig {
  double w_inode = 1.0;
  double w_dir = 8.4;  // measured by pbench --calibrate
  std::uint32_t tick_ms = 10;
  std::uint32_t budget_step = 2;
};

struct TickRecord {
  std::uint64_t index = 0;
  std::vector<PassLoad> loads;
  std::uint32_t budget = 0;
  std::vector<std::uint32_t> threads;
};

/// Pure tick logic; the engine owns the timing loop.
class Scheduler {
 public:
  /// `util` enables budgeting (rsched); without it the budget stays at `threads`.
  Scheduler(SchedulerConfig cfg, std::uint32_t threads, std::unique_ptr<UtilizationProvider> util = nullptr,
            EventLog* events = nullptr);

  /// One tick: update the budget, assign threads, plan worker roles.
  std::vector<Role> tick(std::span<const PassLoad> loads, std::span<const Role> current);

  std::uint32_t budget() const { return budget_; }
  const SchedulerConfig& config() const { return cfg_; }
  const std::vector<TickRecord>& trace() const { return trace_; }
  std::string trace_text() const;

 private:
  SchedulerConfig cfg_;
  std::uint32_t threads_;
  std::uint32_t budget_;
  std::unique_ptr<UtilizationProvider> util_;
  EventLog* events_;
  std::vector<TickRecord> trace_;
};

}  // namespace sfs
