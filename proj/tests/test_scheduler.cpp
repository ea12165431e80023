// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "sfs/engine.hpp"
#include "sfs/event_log.hpp"
#include "sfs/generator.hpp"
#include "sfs/scheduler.hpp"

using namespace sfs;

namespace {

// Two-pass reference: with two passes the largest-remainder rule is rounding
// pass 1's exact share half-up, then the minimum-one adjustment.
std::pair<std::uint32_t, std::uint32_t> two_pass_oracle(std::uint64_t u1, std::uint64_t w1, std::uint64_t u2,
                                                        std::uint64_t w2, std::uint32_t C) {
  const std::uint64_t a = u1 * w1, b = u2 * w2, W = a + b;
  if (W == 0) return {C, 0};
  std::uint32_t t1 = static_cast<std::uint32_t>((2 * C * a + W) / (2 * W));
  std::uint32_t t2 = C - t1;
  if (C >= 2 && u1 > 0 && u2 > 0) {
    if (t1 == 0) t1 = 1, t2 = C - 1;
    if (t2 == 0) t2 = 1, t1 = C - 1;
  }
  return {t1, t2};
}

std::vector<Role> all(std::uint32_t n, Role r) { return std::vector<Role>(n, r); }

std::uint32_t moved(std::span<const Role> a, std::span<const Role> b) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m += a[i] != b[i];
  return m;
}

std::array<std::uint32_t, 2> counts(std::span<const Role> roles) {
  std::array<std::uint32_t, 2> c{};
  for (Role r : roles)
    if (r != Role::Idle) ++c[static_cast<std::size_t>(r) - 1];
  return c;
}

}  // namespace

TEST_CASE("outstanding work example") {
  const PassLoad loads[] = {{8, 64, 1.0}, {32, 1, 4.0}};
  CHECK(outstanding_work(loads) == doctest::Approx(640.0));
  CHECK(assign_threads(loads, 10) == std::vector<std::uint32_t>{8, 2});
  const PassLoad no_dirs[] = {{8, 64, 1.0}, {0, 1, 4.0}};
  CHECK(assign_threads(no_dirs, 10) == std::vector<std::uint32_t>{10, 0});
}

TEST_CASE("worked examples") {
  SUBCASE("ties go to the lower index") {
    const PassLoad l[] = {{1, 1, 1.0}, {1, 1, 1.0}};
    CHECK(assign_threads(l, 3) == std::vector<std::uint32_t>{2, 1});
  }
  SUBCASE("no work means everything on the first open pass") {
    const PassLoad l[] = {{0, 1, 1.0}, {0, 1, 1.0}};
    CHECK(assign_threads(l, 6) == std::vector<std::uint32_t>{6, 0});
    const PassLoad closed[] = {{0, 1, 1.0, std::nullopt, false}, {0, 1, 1.0}};
    CHECK(assign_threads(closed, 6) == std::vector<std::uint32_t>{0, 6});
  }
  SUBCASE("a busy pass keeps at least one thread") {
    const PassLoad l[] = {{1000, 1, 1.0}, {1, 1, 1.0}};
    CHECK(assign_threads(l, 4) == std::vector<std::uint32_t>{3, 1});
    CHECK(assign_threads(l, 1) == std::vector<std::uint32_t>{1, 0});
  }
  SUBCASE("exact element total replaces q * n") {
    const PassLoad l[] = {{2, 2048, 1.0, 2100}, {0, 1, 1.0}};
    CHECK(l[0].units() == 2100);
  }
}

TEST_CASE("grid against the two-pass oracle") {
  const std::uint64_t qs[] = {0, 1, 8, 64};
  const std::uint64_t ws[] = {1, 4};
  std::size_t checked = 0;
  for (std::uint64_t q1 : qs)
    for (std::uint64_t n1 : qs)
      for (std::uint64_t q2 : qs)
        for (std::uint64_t n2 : qs)
          for (std::uint64_t w1 : ws)
            for (std::uint64_t w2 : ws)
              for (std::uint32_t C = 1; C <= 16; ++C) {
                const PassLoad l[] = {{q1, n1, double(w1)}, {q2, n2, double(w2)}};
                const auto t = assign_threads(l, C);
                const auto [o1, o2] = two_pass_oracle(q1 * n1, w1, q2 * n2, w2, C);
                CAPTURE(q1);
                CAPTURE(n1);
                CAPTURE(q2);
                CAPTURE(n2);
                CAPTURE(w1);
                CAPTURE(w2);
                CAPTURE(C);
                REQUIRE(t.size() == 2);
                CHECK(t[0] + t[1] == C);
                CHECK(t[0] == o1);
                CHECK(t[1] == o2);
                ++checked;
              }
  CHECK(checked == 4 * 4 * 4 * 4 * 2 * 2 * 16);
}

TEST_CASE("sum and scale invariance on random loads") {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 2000; ++i) {
    std::vector<PassLoad> l(1 + gen() % 4);
    for (auto& p : l) p = {gen() % 100, 1 + gen() % 50, 0.5 * double(1 + gen() % 8)};
    const std::uint32_t C = 1 + gen() % 32;
    const auto t = assign_threads(l, C);
    CHECK(std::accumulate(t.begin(), t.end(), 0u) == C);
    auto scaled = l;
    for (auto& p : scaled) p.q *= 7;
    CHECK(assign_threads(scaled, C) == t);
  }
}

TEST_CASE("core budget examples") {
  CHECK(core_budget({16, 12, 16}, 16) == 4);
  CHECK(core_budget({16, 0, 4}, 4) == 6);
  CHECK(core_budget({16, 0, 4}, 4, 8) == 12);
  CHECK(core_budget({16, 16, 1}, 1) == 1);
  CHECK(core_budget({16, 0, 16}, 16) == 16);
  CHECK(core_budget({8, 4, 4}, 4) == 4);
  // More idle cores never lowers the budget.
  for (std::uint32_t cur = 1; cur <= 16; ++cur)
    for (std::uint32_t busy = 1; busy <= 16; ++busy)
      CHECK(core_budget({16, busy - 1, cur}, cur) >= core_budget({16, busy, cur}, cur));
}

TEST_CASE("rsched budget tracks a scripted load") {
  std::vector<std::uint32_t> script(4, 12);
  script.resize(12, 0);
  Scheduler s({}, 16, std::make_unique<FakeUtilization>(16, script));
  std::vector<Role> roles = all(16, Role::P1);
  const PassLoad l[] = {{1000, 1, 1.0}, {0, 1, 4.0}};
  std::vector<std::uint32_t> budgets;
  for (int i = 0; i < 12; ++i) {
    roles = s.tick(l, roles);
    budgets.push_back(s.budget());
    const auto c = counts(roles);
    CHECK(c[0] + c[1] == s.budget());
  }
  CHECK(*std::min_element(budgets.begin(), budgets.begin() + 4) == 4);
  CHECK(std::find(budgets.begin() + 4, budgets.begin() + 10, 16u) != budgets.begin() + 10);
  CHECK(budgets.back() == 16);
}

TEST_CASE("plan_rebalance") {
  const std::vector<Role> cur = all(4, Role::P1);
  const std::uint32_t target[] = {2, 2};
  const auto next = plan_rebalance(cur, target);
  CHECK(counts(next) == std::array<std::uint32_t, 2>{2, 2});
  CHECK(moved(cur, next) == 2);
  CHECK(plan_rebalance(next, target) == next);

  std::vector<Role> mixed = {Role::Idle, Role::P2, Role::P1, Role::Idle};
  const std::uint32_t t31[] = {3, 1};
  const auto m = plan_rebalance(mixed, t31);
  CHECK(counts(m) == std::array<std::uint32_t, 2>{3, 1});
  CHECK(moved(mixed, m) == 2);

  const std::uint32_t shrink[] = {1, 0};
  const auto s = plan_rebalance(next, shrink);
  CHECK(counts(s) == std::array<std::uint32_t, 2>{1, 0});
  CHECK(std::count(s.begin(), s.end(), Role::Idle) == 3);
}

TEST_CASE("deterministic replay") {
  auto run = [] {
    Scheduler s({}, 8, std::make_unique<FakeUtilization>(8, std::vector<std::uint32_t>{0, 6, 6, 2, 0}));
    std::vector<Role> roles = all(8, Role::Idle);
    for (std::uint64_t k = 0; k < 10; ++k) {
      const PassLoad l[] = {{100 - 10 * k, 64, 1.0, std::nullopt, k < 9}, {k * 13, 1, 4.0}};
      roles = s.tick(l, roles);
    }
    return s.trace_text();
  };
  const std::string a = run();
  CHECK_FALSE(a.empty());
  CHECK(a == run());
}

TEST_CASE("sched pipeline starts on pass 1 and moves to pass 2 when it closes") {
  ImageSpec spec;
  spec.file_count = 1900;
  spec.dir_count = 20;
  spec.mean_file_blocks = 2;
  spec.total_inodes = 2400;
  spec.total_blocks = 64 + spec.file_count * 5 + spec.dir_count * 2;
  spec.seed = 77;
  auto built = build_image(spec);

  for (std::uint32_t C : {2u, 4u, 8u}) {
    CAPTURE(C);
    EventLog ev;
    CheckOptions opts;
    opts.events = &ev;
    opts.inode_range = 64;
    PipelineOptions po;
    po.split = PipelineSplit::Sched;
    po.sched.tick_ms = 1;
    std::vector<TickRecord> trace;
    po.trace = &trace;
    Image img = built.image.clone();
    const Report r = run_pipeline(img, C, po, opts);
    CHECK(r.clean());

    REQUIRE_FALSE(trace.empty());
    CHECK(trace[0].threads == std::vector<std::uint32_t>{C, 0});

    const auto closed = ev.of_kind(EventKind::Pass1Closed);
    REQUIRE(closed.size() == 1);
    std::vector<Event> after;
    for (const Event& e : ev.of_kind(EventKind::Tick))
      if (e.seq > closed[0].seq) after.push_back(e);
    REQUIRE_FALSE(after.empty());
    bool reached = false;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, after.size()); ++i)
      reached = reached || (after[i].b & 0xFFFFFFFFu) == C;
    CHECK(reached);
  }
}
