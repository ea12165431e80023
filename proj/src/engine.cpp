// SPDX-License-Identifier: Apache-2.0
#include "sfs/engine.hpp"

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "sfs/error.hpp"
#include "sfs/event_log.hpp"
#include "sfs/work_queue.hpp"

namespace sfs {
namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
 public:
  double lap() {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - t_).count();
    t_ = now;
    return s;
  }

 private:
  Clock::time_point t_ = Clock::now();
};

/// Remembers the first exception thrown by any worker.
class ErrorSlot {
 public:
  void capture() {
    std::lock_guard lock(mu_);
    if (!error_) error_ = std::current_exception();
    failed_.store(true, std::memory_order_release);
  }
  bool failed() const { return failed_.load(std::memory_order_acquire); }
  void rethrow() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
  std::atomic<bool> failed_{false};
};

template <typename Fn>
void run_workers(std::uint32_t threads, Fn fn) {
  ErrorSlot err;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::uint32_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        err.capture();
      }
    });
  for (auto& t : pool) t.join();
  err.rethrow();
}

struct Workers {
  CheckEnv env;
  std::vector<std::unique_ptr<ThreadContext>> owned;
  std::vector<ThreadContext*> ctxs;
  RepairBarrier barrier;

  Workers(Image& image, std::uint32_t threads, const CheckOptions& opts, ClaimTable* shared)
      : env(image, load_superblock(image)), barrier(image, opts.events) {
    const CacheConfig cfg = split_cache(opts.cache, threads);
    for (std::uint32_t w = 0; w < threads; ++w) {
      owned.push_back(std::make_unique<ThreadContext>(w, env, cfg, shared));
      ctxs.push_back(owned.back().get());
      barrier.register_cache(&owned.back()->cache);
    }
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(ctxs.size()); }
};

void note(EventLog* ev, EventKind kind, std::int32_t worker, std::uint8_t pass, std::uint64_t a = 0,
         std::uint64_t b = 0) {
  if (ev) ev->add(kind, worker, pass, a, b);
}

/// ".." verification, passes 3-5; shared by both parallel modes.
void finish_passes(Workers& wk, ShadowState& st, const CheckOptions& opts, std::array<double, 5>& secs,
                   Stopwatch& sw) {
  CheckEnv& env = wk.env;
  const std::vector<std::uint64_t> dirs = directories_with_dotdot(st);
  std::vector<std::vector<Finding>> found(wk.size());
  WorkQueue<std::uint64_t> q;
  for (std::uint64_t d : dirs) q.push(d);
  q.close();
  run_workers(wk.size(), [&](std::uint32_t w) {
    while (auto d = q.pop()) {
      BarrierScope scope(wk.barrier);
      std::vector<Patch> patches;
      pass2_verify_dotdot(env, st, *d, found[w], patches);
      if (!patches.empty()) wk.barrier.commit(std::move(patches));
    }
  });
  for (auto& f : found) std::move(f.begin(), f.end(), std::back_inserter(st.findings));
  secs[1] += sw.lap();

  pass3_connectivity(env, st);
  secs[2] = sw.lap();
  pass4_refcounts(env, st);
  secs[3] = sw.lap();

  struct Item {
    BitmapKind kind;
    std::uint32_t index;
  };
  std::vector<Item> items;
  for (std::uint32_t i = 0; i < env.sb.block_bitmap_blocks; ++i) items.push_back({BitmapKind::Blocks, i});
  for (std::uint32_t i = 0; i < env.sb.inode_bitmap_blocks; ++i) items.push_back({BitmapKind::Inodes, i});
  std::vector<BitmapCompare> results(items.size());
  std::atomic<std::size_t> next{0};
  run_workers(wk.size(), [&](std::uint32_t) {
    for (std::size_t i; (i = next.fetch_add(1)) < items.size();)
      results[i] = pass5_compare_block(env, st, items[i].kind, items[i].index);
  });
  for (BitmapCompare& c : results) {
    std::move(c.findings.begin(), c.findings.end(), std::back_inserter(st.findings));
    if (c.rewrite) env.image.write_block(c.block, *c.rewrite);
  }
  pass5_free_counts(env, st);
  secs[4] = sw.lap();
  env.image.flush();
  (void)opts;
}

Report build_report(Workers& wk, ShadowState& st, const std::array<double, 5>& secs) {
  Report r = finish_report(st);
  for (std::size_t p = 0; p < 5; ++p) r.passes[p].seconds = secs[p];
  CacheStats cs;
  for (ThreadContext* c : wk.ctxs) cs += c->cache.stats();
  r.counters["cache.hits"] = cs.hits;
  r.counters["cache.misses"] = cs.misses;
  r.counters["cache.evictions"] = cs.evictions;
  r.counters["barrier.commits"] = wk.barrier.commits();
  r.counters["threads"] = wk.size();
  return r;
}

void set_idle_priority() {
#ifdef SCHED_IDLE
  sched_param p{};
  p.sched_priority = 0;
  pthread_setschedparam(pthread_self(), SCHED_IDLE, &p);
#endif
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<InodeRange> partition_inodes(std::uint64_t total_inodes, std::uint32_t granularity) {
  std::vector<InodeRange> out;
  const std::uint64_t g = std::max<std::uint32_t>(granularity, 1);
  for (std::uint64_t first = kRootInode; first < total_inodes; first += g)
    out.push_back({first, std::min(g, total_inodes - first)});
  return out;
}

CacheConfig split_cache(const CacheConfig& total, std::uint32_t threads) {
  CacheConfig c = total;
  const std::uint32_t ra = std::max({total.readahead_inode_scan, total.readahead_dir_scan, 1u});
  c.capacity_blocks = std::max(ra, total.capacity_blocks / std::max(threads, 1u));
  return c;
}

void RepairBarrier::register_cache(BlockCache* cache) {
  std::lock_guard lock(mu_);
  caches_.push_back(cache);
}

void RepairBarrier::enter() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return stop_requests_ == 0; });
  ++active_;
}

void RepairBarrier::leave() {
  std::lock_guard lock(mu_);
  if (--active_ == 0) cv_.notify_all();
}

void RepairBarrier::commit(std::vector<Patch> patches) {
  std::unique_lock lock(mu_);
  std::move(patches.begin(), patches.end(), std::back_inserter(pending_));
  --active_;
  ++stop_requests_;
  ++waiting_committers_;
  const std::uint64_t mine = generation_;
  cv_.notify_all();
  cv_.wait(lock, [&] { return generation_ != mine || active_ == 0; });
  if (generation_ == mine) {
    const std::size_t n = pending_.size();
    const std::vector<std::uint64_t> written = apply_patches(image_, pending_);
    pending_.clear();
    for (BlockCache* c : caches_)
      for (std::uint64_t b : written) c->invalidate(b);
    ++commits_;
    if (events_) events_->add(EventKind::Barrier, -1, 0, commits_, n);
    ++generation_;
    stop_requests_ -= waiting_committers_;
    waiting_committers_ = 0;
    cv_.notify_all();
  }
  cv_.wait(lock, [&] { return stop_requests_ == 0; });
  ++active_;
}

void RepairBarrier::run_exclusive(const std::function<void()>& fn) {
  std::unique_lock lock(mu_);
  ++stop_requests_;
  cv_.wait(lock, [&] { return active_ == 0 && pending_.empty(); });
  try {
    fn();
  } catch (...) {
    --stop_requests_;
    cv_.notify_all();
    throw;
  }
  --stop_requests_;
  cv_.notify_all();
}

void RepairBarrier::invalidate(const std::vector<std::uint64_t>& blocks) {
  for (BlockCache* c : caches_)
    for (std::uint64_t b : blocks) c->invalidate(b);
}

std::uint64_t RepairBarrier::commits() const {
  std::lock_guard lock(mu_);
  return commits_;
}

// ---------------------------------------------------------------------------

Report run_data_parallel(Image& image, std::uint32_t threads, const CheckOptions& opts) {
  threads = std::max(threads, 1u);
  Stopwatch sw;
  std::array<double, 5> secs{};
  Workers wk(image, threads, opts, nullptr);
  EventLog* ev = opts.events;

  WorkQueue<InodeRange> q1;
  for (const InodeRange& r : partition_inodes(wk.env.sb.total_inodes, opts.inode_range)) {
    q1.push(r, r.count);
    note(ev, EventKind::Enqueue, -1, 1, r.first);
  }
  q1.close();
  run_workers(threads, [&](std::uint32_t w) {
    ThreadContext& ctx = *wk.ctxs[w];
    while (auto r = q1.pop()) {
      note(ev, EventKind::Dequeue, static_cast<std::int32_t>(w), 1, r->first);
      BarrierScope scope(wk.barrier);
      std::vector<Patch> patches;
      pass1_check_range(wk.env, ctx, r->first, r->count, patches);
      if (!patches.empty()) wk.barrier.commit(std::move(patches));
    }
  });
  ShadowState st = merge_contexts(wk.ctxs, wk.env.sb);
  wk.barrier.invalidate(resolve_multiclaims(wk.env, st));
  note(ev, EventKind::Pass1Closed, -1, 1);
  secs[0] = sw.lap();

  WorkQueue<DbEntry> q2;
  for (const DbEntry& e : st.db_list) {
    q2.push(e);
    note(ev, EventKind::Enqueue, -1, 2, e.dir, e.block);
  }
  q2.close();
  run_workers(threads, [&](std::uint32_t w) {
    ThreadContext& ctx = *wk.ctxs[w];
    while (auto e = q2.pop()) {
      note(ev, EventKind::Dequeue, static_cast<std::int32_t>(w), 2, e->dir, e->block);
      BarrierScope scope(wk.barrier);
      std::vector<Patch> patches;
      certify_dir_block(wk.env, ctx, parse_dir_block(ctx, *e), patches);
      note(ev, EventKind::Certify, static_cast<std::int32_t>(w), 2, e->dir, e->block);
      if (!patches.empty()) wk.barrier.commit(std::move(patches));
    }
  });
  merge_directory_results(st, wk.ctxs);
  secs[1] = sw.lap();

  finish_passes(wk, st, opts, secs, sw);
  return build_report(wk, st, secs);
}

// ---------------------------------------------------------------------------

Report run_pipeline(Image& image, std::uint32_t threads, const PipelineOptions& popts, const CheckOptions& opts) {
  if (threads < 2) return run_data_parallel(image, 1, opts);
  if (popts.split == PipelineSplit::Manual && (popts.p1 < 1 || popts.p2 < 1 || popts.p1 + popts.p2 != threads))
    throw Error(Errc::InvalidArgument, "manual split must give both passes at least one thread and sum to --threads");

  Stopwatch sw;
  std::array<double, 5> secs{};
  ClaimTable claims(load_superblock(image).total_blocks);
  Workers wk(image, threads, opts, &claims);
  EventLog* ev = opts.events;
  const bool scheduled = popts.split == PipelineSplit::Sched || popts.split == PipelineSplit::RSched;

  const std::vector<InodeRange> ranges = partition_inodes(wk.env.sb.total_inodes, opts.inode_range);
  WorkQueue<InodeRange> q1;
  for (const InodeRange& r : ranges) {
    q1.push(r, r.count);
    note(ev, EventKind::Enqueue, -1, 1, r.first);
  }
  q1.close();
  WorkQueue<DbEntry> q2;
  DeferredQueue<ParsedDirBlock> deferred;

  std::atomic<std::uint64_t> p1_done{0}, parsed{0}, certified{0}, migrations{0};
  std::atomic<bool> pass1_closed{false}, finished{false};
  ErrorSlot err;
  std::mutex wake_mu;
  std::condition_variable wake;
  auto poke = [&] {
    std::lock_guard lock(wake_mu);
    wake.notify_all();
  };
  auto nap = [&](auto pred) {
    std::unique_lock lock(wake_mu);
    wake.wait_for(lock, std::chrono::milliseconds(1), pred);
  };

  // Written by the exclusive section before the gate opens, read-only after.
  ShadowState st;
  std::vector<std::uint64_t> stale;

  std::vector<std::atomic<Role>> target(threads);
  std::unique_ptr<Scheduler> sched;
  auto loads = [&] {
    std::vector<PassLoad> l(2);
    l[0] = {q1.length(), opts.inode_range, popts.sched.w_inode, q1.elements(), !pass1_closed.load()};
    l[1] = {q2.length() + deferred.available(), 1, popts.sched.w_dir, std::nullopt, !finished.load()};
    return l;
  };
  auto current_roles = [&] {
    std::vector<Role> r(threads);
    for (std::uint32_t w = 0; w < threads; ++w) r[w] = target[w].load();
    return r;
  };
  if (scheduled) {
    std::unique_ptr<UtilizationProvider> util;
    if (popts.split == PipelineSplit::RSched)
      util = popts.utilization ? popts.utilization() : std::make_unique<ProcStatUtilization>();
    sched = std::make_unique<Scheduler>(popts.sched, threads, std::move(util), ev);
    // Tick 0 runs before any worker starts, on the full pass-1 queue.
    std::vector<Role> start(threads, Role::Idle);
    if (popts.split == PipelineSplit::RSched)
      for (auto& r : start) r = Role::P1;
    const std::vector<Role> roles = sched->tick(loads(), start);
    for (std::uint32_t w = 0; w < threads; ++w) target[w] = roles[w];
  } else {
    const std::uint32_t n1 = popts.split == PipelineSplit::Manual ? popts.p1 : (threads + 1) / 2;
    for (std::uint32_t w = 0; w < threads; ++w) target[w] = w < n1 ? Role::P1 : Role::P2;
  }

  auto worker = [&](std::uint32_t w) {
    const auto wid = static_cast<std::int32_t>(w);
    if (popts.split == PipelineSplit::RSched) set_idle_priority();
    ThreadContext& ctx = *wk.ctxs[w];
    Role cur = target[w].load();
    while (!finished.load(std::memory_order_acquire) && !err.failed()) {
      const Role want = target[w].load();
      if (want != cur) {
        note(ev, EventKind::Migration, wid, 0, static_cast<std::uint64_t>(cur), static_cast<std::uint64_t>(want));
        ++migrations;
        cur = want;
      }
      bool did = false;
      if (cur == Role::P1) {
        if (auto r = q1.try_pop()) {
          note(ev, EventKind::Dequeue, wid, 1, r->first);
          {
            BarrierScope scope(wk.barrier);
            const std::size_t before = ctx.db.size();
            std::vector<Patch> patches;
            pass1_check_range(wk.env, ctx, r->first, r->count, patches);
            for (std::size_t i = before; i < ctx.db.size(); ++i) {
              q2.push(ctx.db[i]);
              note(ev, EventKind::Enqueue, wid, 2, ctx.db[i].dir, ctx.db[i].block);
            }
            if (!patches.empty()) wk.barrier.commit(std::move(patches));
          }
          ++p1_done;
          did = true;
        }
      } else if (cur == Role::P2) {
        if (auto e = q2.try_pop()) {
          note(ev, EventKind::Dequeue, wid, 2, e->dir, e->block);
          ParsedDirBlock p;
          {
            BarrierScope scope(wk.barrier);
            p = parse_dir_block(ctx, *e);
          }
          note(ev, EventKind::Parse, wid, 2, e->dir, e->block);
          deferred.push(std::move(p));
          ++parsed;
          did = true;
        } else if (auto p = deferred.try_pop()) {
          {
            BarrierScope scope(wk.barrier);
            if (std::binary_search(st.db_list.begin(), st.db_list.end(), p->where)) {
              if (std::binary_search(stale.begin(), stale.end(), p->where.block)) *p = parse_dir_block(ctx, p->where);
              std::vector<Patch> patches;
              certify_dir_block(wk.env, ctx, *p, patches);
              note(ev, EventKind::Certify, wid, 2, p->where.dir, p->where.block);
              if (!patches.empty()) wk.barrier.commit(std::move(patches));
            }
          }
          ++certified;
          did = true;
        }
      }
      if (did)
        poke();
      else
        nap([&] { return finished.load() || err.failed(); });
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::uint32_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        worker(w);
      } catch (...) {
        err.capture();
        poke();
      }
    });

  std::mutex sched_mu;
  std::condition_variable sched_cv;
  bool sched_stop = false;
  // Caller holds sched_mu.
  auto do_tick = [&] {
    const std::vector<Role> roles = sched->tick(loads(), current_roles());
    for (std::uint32_t w = 0; w < threads; ++w) target[w] = roles[w];
    poke();
  };
  std::thread sched_thread;
  if (sched) {
    sched_thread = std::thread([&] {
      std::unique_lock lock(sched_mu);
      while (true) {
        sched_cv.wait_for(lock, std::chrono::milliseconds(popts.sched.tick_ms), [&] { return sched_stop; });
        if (sched_stop) break;
        do_tick();
      }
    });
  }
  auto stop_all = [&] {
    finished = true;
    poke();
    for (auto& t : pool) t.join();
    if (sched_thread.joinable()) {
      {
        std::lock_guard lock(sched_mu);
        sched_stop = true;
      }
      sched_cv.notify_all();
      sched_thread.join();
    }
  };

  try {
    while (p1_done.load() < ranges.size() && !err.failed()) nap([&] { return err.failed(); });
    if (err.failed()) throw 0;
    note(ev, EventKind::Pass1Closed, -1, 1);
    pass1_closed = true;
    q2.close();
    if (sched) {
      // Pass close is a tick of its own, taken here so it cannot be skipped.
      std::lock_guard lock(sched_mu);
      do_tick();
    }

    wk.barrier.run_exclusive([&] {
      Bitmap bits = claims.take();
      st = merge_contexts(wk.ctxs, wk.env.sb, &bits);
      stale = resolve_multiclaims(wk.env, st);
      wk.barrier.invalidate(stale);
    });
    secs[0] = sw.lap();
    deferred.open_gate();
    note(ev, EventKind::GateOpen, -1, 2);
    poke();

    while (!err.failed()) {
      if (q2.drained() && parsed.load() == q2.enqueued() && certified.load() == parsed.load()) break;
      nap([&] { return err.failed(); });
    }
    if (err.failed()) throw 0;
    deferred.close();
  } catch (...) {
    stop_all();
    err.rethrow();
    throw;
  }
  stop_all();
  if (popts.trace && sched) *popts.trace = sched->trace();

  merge_directory_results(st, wk.ctxs);
  finish_passes(wk, st, opts, secs, sw);
  Report r = build_report(wk, st, secs);
  r.counters["migrations"] = migrations.load();
  if (sched) r.counters["ticks"] = sched->trace().size();
  return r;
}

}  // namespace sfs
