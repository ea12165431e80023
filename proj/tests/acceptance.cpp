// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sfs/bench.hpp"
#include "sfs/block_cache.hpp"
#include "sfs/corrupt.hpp"
#include "sfs/endian.hpp"
#include "sfs/error.hpp"
#include "sfs/event_log.hpp"
#include "sfs/generator.hpp"
#include "sfs/runner.hpp"

using namespace sfs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* name, const Outcome& o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  failures += o.pass ? 0 : 1;
}

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

constexpr std::uint64_t kMaxImageBytes = 64ull << 20;
constexpr std::array<std::uint32_t, 4> kThreads = {1, 2, 4, 8};
constexpr std::array<Mode, 4> kParallelModes = {Mode::DataPara, Mode::SplitEqual, Mode::SplitManual, Mode::Sched};

RunConfig mode_config(Mode mode, std::uint32_t threads) {
  RunConfig rc;
  rc.mode = mode;
  rc.threads = threads;
  if (mode == Mode::SplitManual) {
    rc.p2 = threads < 2 ? 0 : std::max(1u, threads / 4);
    rc.p1 = threads - rc.p2;
  }
  rc.config.sched.tick_ms = 2;
  return rc;
}

// --- randomized triples: equivalence, detection, idempotence ---------------

struct Triple {
  ImageSpec spec;
  CorruptionPlan plan;
  std::uint64_t seed = 0;
  Image image = Image::in_memory(1);
  CorruptionLedger ledger;
  bool scaled = false;
};

std::uint32_t plan_total(const CorruptionPlan& p) {
  std::uint32_t n = 0;
  for (const PlanItem& i : p) n += i.count;
  return n;
}

Triple make_triple(std::mt19937_64& gen) {
  Triple t;
  std::uint64_t files = 50 + gen() % 2500;
  const std::uint64_t dirs = 20 + gen() % 300;
  const auto mean = static_cast<std::uint32_t>(1 + gen() % 4);
  do {
    t.spec = sized_spec(files, dirs, mean, gen());
    files = files * 3 / 4;
  } while (t.spec.total_blocks * kBlockSize > kMaxImageBytes);
  t.spec.max_dir_fanout = static_cast<std::uint32_t>(2 + gen() % 10);

  const std::uint32_t total = static_cast<std::uint32_t>(gen() % 51);
  std::array<std::uint32_t, kAllCorruptionKinds.size()> counts{};
  for (std::uint32_t i = 0; i < total; ++i) ++counts[gen() % counts.size()];
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k]) t.plan.push_back({kAllCorruptionKinds[k], counts[k]});
  t.seed = gen();

  // A plan may ask for more targets of one kind than the image has; halve it.
  while (true) {
    auto built = build_image(t.spec);
    try {
      t.ledger = inject_corruptions(built.image, t.plan, t.seed);
      t.image = std::move(built.image);
      return t;
    } catch (const Error& e) {
      if (e.code() != Errc::NoEligibleTarget) throw;
      t.scaled = true;
      CorruptionPlan smaller;
      for (const PlanItem& i : t.plan)
        if (i.count / 2) smaller.push_back({i.kind, i.count / 2});
      t.plan = smaller;
    }
  }
}

struct TripleStats {
  std::size_t triples = 0, scaled = 0, runs = 0, mismatches = 0;
  std::size_t records = 0, detected = 0;
  std::size_t rechecks = 0, dirty_rechecks = 0;
  std::uint32_t max_corruptions = 0;
  std::uint64_t max_bytes = 0;
  std::string first_mismatch, first_miss, first_dirty;
};

TripleStats run_triples(std::size_t count) {
  std::mt19937_64 gen(20261016);
  TripleStats s;
  for (std::size_t i = 0; i < count; ++i) {
    Triple t = make_triple(gen);
    ++s.triples;
    s.scaled += t.scaled;
    s.max_corruptions = std::max(s.max_corruptions, plan_total(t.plan));
    s.max_bytes = std::max(s.max_bytes, t.spec.total_blocks * kBlockSize);

    Image oracle_img = t.image.clone();
    const Report oracle = run_check(oracle_img, mode_config(Mode::Serial, 1));
    const std::string oracle_text = oracle.canonical_text();
    const std::vector<std::uint8_t> oracle_bytes = oracle_img.snapshot();

    for (const CorruptionRecord& r : t.ledger.records) {
      ++s.records;
      const bool hit =
          std::any_of(oracle.findings.begin(), oracle.findings.end(), [&](const Finding& f) { return finding_matches(r, f); });
      s.detected += hit;
      if (!hit && s.first_miss.empty()) s.first_miss = cat("triple ", i, " kind ", to_string(r.kind), " inode ", r.inode);
    }

    auto recheck = [&](Image& img, Mode mode, std::uint32_t threads) {
      ++s.rechecks;
      const Report again = run_check(img, mode_config(mode, threads));
      if (!again.clean()) {
        ++s.dirty_rechecks;
        if (s.first_dirty.empty())
          s.first_dirty = cat("triple ", i, " ", to_string(mode), " t=", threads, ": ", format_finding(again.findings[0]));
      }
    };
    recheck(oracle_img, Mode::Serial, 1);

    for (Mode mode : kParallelModes)
      for (std::uint32_t threads : kThreads) {
        Image img = t.image.clone();
        const Report r = run_check(img, mode_config(mode, threads));
        ++s.runs;
        if (r.canonical_text() != oracle_text || img.snapshot() != oracle_bytes) {
          ++s.mismatches;
          if (s.first_mismatch.empty()) s.first_mismatch = cat("triple ", i, " ", to_string(mode), " t=", threads);
        }
        recheck(img, mode, threads);
      }
  }
  return s;
}

// --- single-kind detection ------------------------------------------------

Outcome single_kind_detection() {
  std::size_t cases = 0;
  for (CorruptionKind kind : kAllCorruptionKinds)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto built = build_image(sized_spec(400, 40, 2, seed));
      const CorruptionLedger ledger = inject_corruptions(built.image, {{kind, 1}}, seed * 31);
      const Report r = run_check(built.image, mode_config(Mode::Serial, 1));
      ++cases;
      const bool mapped = r.count(expected_code(kind)) > 0;
      const bool matched = std::any_of(r.findings.begin(), r.findings.end(),
                                       [&](const Finding& f) { return finding_matches(ledger.records.at(0), f); });
      if (!mapped || !matched)
        return {false, cat(to_string(kind), " seed ", seed, " produced no ", to_string(expected_code(kind)))};
    }
  return {true, cat(cases, " single injections, every kind reported with its mapped code")};
}

// --- scheduler ------------------------------------------------------------

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

Outcome scheduler_math() {
  const std::uint64_t vals[] = {0, 1, 8, 64};
  const std::uint64_t weights[] = {1, 4};
  std::size_t points = 0;
  for (std::uint64_t q1 : vals)
    for (std::uint64_t n1 : vals)
      for (std::uint64_t q2 : vals)
        for (std::uint64_t n2 : vals)
          for (std::uint64_t w1 : weights)
            for (std::uint64_t w2 : weights)
              for (std::uint32_t C = 1; C <= 16; ++C) {
                const PassLoad l[] = {{q1, n1, double(w1), std::nullopt, true}, {q2, n2, double(w2), std::nullopt, true}};
                const auto t = assign_threads(l, C);
                const auto [o1, o2] = two_pass_oracle(q1 * n1, w1, q2 * n2, w2, C);
                ++points;
                if (t.size() != 2 || t[0] + t[1] != C || t[0] != o1 || t[1] != o2)
                  return {false, cat("q=(", q1, ",", q2, ") n=(", n1, ",", n2, ") w=(", w1, ",", w2, ") C=", C)};
              }
  const PassLoad example[] = {{8, 64, 1.0, std::nullopt, true}, {32, 1, 4.0, std::nullopt, true}};
  if (outstanding_work(example) != 640.0 || assign_threads(example, 10) != std::vector<std::uint32_t>{8, 2})
    return {false, "worked example W=640, C=10 did not give (8,2)"};
  return {true, cat(points, " grid points match the exact two-pass reference, sum = C at each")};
}

Outcome scheduler_behavior() {
  const BuiltImage built = build_image(sized_spec(9500, 100, 2, 5));
  std::ostringstream detail;
  for (std::uint32_t C : {2u, 4u, 8u}) {
    EventLog ev;
    std::vector<TickRecord> trace;
    RunConfig rc = mode_config(Mode::Sched, C);
    rc.config.inode_range = 256;
    rc.events = &ev;
    rc.trace = &trace;
    Image img = built.image.clone();
    run_check(img, rc);
    if (trace.empty() || trace[0].threads != std::vector<std::uint32_t>{C, 0})
      return {false, cat("C=", C, ": first tick did not put every thread on pass 1")};
    const auto closed = ev.of_kind(EventKind::Pass1Closed);
    if (closed.size() != 1) return {false, cat("C=", C, ": expected one pass-1 close event")};
    std::size_t seen = 0, reached_at = 0;
    for (const Event& e : ev.of_kind(EventKind::Tick)) {
      if (e.seq < closed[0].seq) continue;
      ++seen;
      if ((e.b & 0xFFFFFFFFu) == C) {
        reached_at = seen;
        break;
      }
    }
    if (reached_at == 0 || reached_at > 2) return {false, cat("C=", C, ": pass 2 did not get all threads within 2 ticks")};
    detail << (C == 2 ? "" : "; ") << "C=" << C << " tick0=(" << C << ",0), all on pass 2 at tick +" << reached_at;
  }
  return {true, detail.str()};
}

Outcome resource_awareness() {
  std::vector<std::uint32_t> script(4, 12);
  script.resize(12, 0);
  Scheduler s({}, 16, std::make_unique<FakeUtilization>(16, script));
  std::vector<Role> roles(16, Role::P1);
  const PassLoad l[] = {{1000, 1, 1.0, std::nullopt, true}, {0, 1, 4.0, std::nullopt, true}};
  std::vector<std::uint32_t> budgets;
  for (int i = 0; i < 12; ++i) {
    roles = s.tick(l, roles);
    budgets.push_back(s.budget());
  }
  std::string trail;
  for (std::uint32_t b : budgets) trail += std::to_string(b) + " ";
  const auto down = std::find(budgets.begin(), budgets.begin() + 4, 4u);
  if (down == budgets.begin() + 4) return {false, "budget did not reach 4 within 4 ticks: " + trail};
  const auto up = std::find(budgets.begin() + 4, budgets.begin() + 10, 16u);
  if (up == budgets.begin() + 10) return {false, "budget did not reach 16 within 6 ticks: " + trail};
  return {true, cat("budget per tick: ", trail)};
}

// --- cache ----------------------------------------------------------------

Outcome cache_behavior() {
  Image img = Image::in_memory(8192);
  for (std::uint64_t b = 0; b < 8192; ++b) {
    Block data{};
    le::store<std::uint64_t>(data.data(), b);
    img.write_block(b, data);
  }
  BlockCache seq(img, {4096, 16, 8});
  for (std::uint64_t b = 0; b < 1024; ++b) seq.read(b, ScanHint::InodeScan);
  const double seq_rate = double(seq.stats().hits) / 1024.0;

  const CacheConfig cfg{512, 16, 8};
  auto scan = [&](BlockCache& c, std::uint64_t first) {
    for (int pass = 0; pass < 3; ++pass)
      for (std::uint64_t b = first; b < first + 4096; ++b) c.read(b, ScanHint::InodeScan);
  };
  auto rate = [](const BlockCache& c) { return double(c.stats().hits) / double(c.stats().hits + c.stats().misses); };
  BlockCache solo_a(img, cfg), solo_b(img, cfg), a(img, cfg), b(img, cfg);
  scan(solo_a, 0);
  scan(solo_b, 4096);
  std::thread ta([&] { scan(a, 0); });
  std::thread tb([&] { scan(b, 4096); });
  ta.join();
  tb.join();
  const double da = std::abs(rate(a) - rate(solo_a)) * 100, db = std::abs(rate(b) - rate(solo_b)) * 100;
  const bool ok = seq_rate >= 0.90 && da <= 2.0 && db <= 2.0;
  return {ok, cat("sequential hit rate ", seq_rate * 100, "%; concurrent deltas ", da, " and ", db, " points")};
}

// --- memory ---------------------------------------------------------------

Outcome memory_bound() {
  const fs::path dir = fs::temp_directory_path() / cat("sfs-accept-", ::getpid());
  fs::create_directories(dir);
  const fs::path img = dir / "dir.img";
  write_image_file(img, sized_spec(20000, 20000, 1, 7));
  auto peak = [&](const std::vector<std::string>& extra) {
    std::vector<double> v;
    for (int r = 0; r < 3; ++r) {
      std::vector<std::string> argv = {PFSCK, img.string(), "--report", "structured"};
      argv.insert(argv.end(), extra.begin(), extra.end());
      const ProcessRun pr = spawn(argv);
      if (pr.exit_code != 0) throw Error(Errc::Io, cat("pfsck exited ", pr.exit_code));
      v.push_back(double(nlohmann::json::parse(pr.out)["stats"]["counters"]["peak_rss_kib"].get<std::uint64_t>()));
    }
    return median(v);
  };
  const double serial = peak({});
  const double sched = peak({"--mode", "sched", "--threads", "8"});
  fs::remove_all(dir);
  const double ratio = sched / serial;
  return {ratio <= 1.5, cat("directory-intensive image (20000 files, 20000 dirs): serial ", serial, " KiB, sched t=8 ",
                            sched, " KiB, ratio ", ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t triples = 200;
  if (argc > 1) triples = std::stoul(argv[1]);
  const auto start = std::chrono::steady_clock::now();
  std::cout.setf(std::ios::fixed);
  std::cout.precision(3);

  try {
    const TripleStats s = run_triples(triples);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;
    report("oracle-equivalence",
           {s.mismatches == 0 && s.triples >= 200 && minutes < 10,
            cat(s.triples, " triples (", s.scaled, " plans halved for lack of targets, max ", s.max_corruptions,
                " corruptions, max image ", s.max_bytes >> 20, " MiB), ", s.runs, " parallel runs, ", s.mismatches,
                " mismatches, ", minutes, " min", s.first_mismatch.empty() ? "" : "; first: " + s.first_mismatch)});

    const Outcome single = single_kind_detection();
    const bool all_found = s.detected == s.records;
    report("detection-completeness",
           {single.pass && all_found,
            cat(single.detail, "; randomized suite detected ", s.detected, "/", s.records, " ledger records",
                s.first_miss.empty() ? "" : "; first miss: " + s.first_miss)});

    report("idempotence", {s.dirty_rechecks == 0, cat(s.rechecks, " rechecks of repaired images, ", s.dirty_rechecks,
                                                      " with findings", s.first_dirty.empty() ? "" : "; " + s.first_dirty)});
  } catch (const std::exception& e) {
    report("oracle-equivalence", {false, e.what()});
    report("detection-completeness", {false, "not evaluated"});
    report("idempotence", {false, "not evaluated"});
  }

  report("scheduler-math", scheduler_math());
  report("scheduler-behavior", scheduler_behavior());
  report("resource-awareness", resource_awareness());
  report("cache", cache_behavior());
  try {
    report("memory-bound", memory_bound());
  } catch (const std::exception& e) {
    report("memory-bound", {false, e.what()});
  }
  std::cout << "performance-direction: reported by acceptance_perf" << std::endl;
  return failures == 0 ? 0 : 1;
}
