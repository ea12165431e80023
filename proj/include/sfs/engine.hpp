// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "sfs/checker.hpp"
#include "sfs/scheduler.hpp"

namespace sfs {

class EventLog;

struct InodeRange {
  std::uint64_t first = 0;
  std::uint64_t count = 0;

  bool operator==(const InodeRange&) const = default;
};

/// Splits [2, total_inodes) into ascending ranges of `granularity` inodes.
std::vector<InodeRange> partition_inodes(std::uint64_t total_inodes, std::uint32_t granularity);

/// Stop-the-world point for image writes. Workers bracket each work item with
/// enter()/leave(); commit() hands over patches and blocks until every active
/// worker has left or committed, then one of the committers applies all
/// pending patches in canonical order and invalidates the written blocks in
/// every registered cache.
class RepairBarrier {
 public:
  explicit RepairBarrier(Image& image, EventLog* events = nullptr) : image_(image), events_(events) {}

  void register_cache(BlockCache* cache);

  void enter();
  void leave();
  /// Caller must be entered; it is entered again on return.
  void commit(std::vector<Patch> patches);
  /// Runs fn with no worker inside an item. Caller must not be entered.
  void run_exclusive(const std::function<void()>& fn);
  /// Invalidates blocks in every registered cache; callers ensure quiescence.
  void invalidate(const std::vector<std::uint64_t>& blocks);

  std::uint64_t commits() const;

 private:
  Image& image_;
  EventLog* events_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<BlockCache*> caches_;
  std::vector<Patch> pending_;
  std::uint32_t active_ = 0;
  std::uint32_t stop_requests_ = 0;
  std::uint32_t waiting_committers_ = 0;
  std::uint64_t generation_ = 0;
  std::uint64_t commits_ = 0;
};

/// Keeps a worker's enter()/leave() balanced when an item throws.
class BarrierScope {
 public:
  explicit BarrierScope(RepairBarrier& b) : b_(b) { b_.enter(); }
  ~BarrierScope() { b_.leave(); }
  BarrierScope(const BarrierScope&) = delete;
  BarrierScope& operator=(const BarrierScope&) = delete;

 private:
  RepairBarrier& b_;
};

/// Each pass runs to completion on `threads` workers before the next starts.
Report run_data_parallel(Image& image, std::uint32_t threads, const CheckOptions& opts = {});

enum class PipelineSplit : std::uint8_t { Equal, Manual, Sched, RSched };

struct PipelineOptions {
  PipelineSplit split = PipelineSplit::Equal;
  std::uint32_t p1 = 0;  // Manual only
  std::uint32_t p2 = 0;
  SchedulerConfig sched;
  /// RSched utilization source; /proc/stat when empty.
  std::function<std::unique_ptr<UtilizationProvider>()> utilization;
  /// Receives the scheduler's per-tick records (Sched and RSched).
  std::vector<TickRecord>* trace = nullptr;
};

/// Pass-1 and pass-2 pools run concurrently. Directory blocks found by pass 1
/// are parsed right away; their certification waits in a gated queue until
/// pass 1 and multi-claim resolution are complete.
Report run_pipeline(Image& image, std::uint32_t threads, const PipelineOptions& popts, const CheckOptions& opts = {});

/// Per-thread cache configuration under a shared block budget.
CacheConfig split_cache(const CacheConfig& total, std::uint32_t threads);

}  // namespace sfs
