// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>

#include "doctest.h"
#include "sfs/checker.hpp"
#include "sfs/corrupt.hpp"
#include "sfs/endian.hpp"
#include "sfs/error.hpp"
#include "sfs/generator.hpp"

using namespace sfs;

namespace {

const ImageSpec kSpec{.total_blocks = 8192, .total_inodes = 2048, .file_count = 1500, .dir_count = 120,
                      .mean_file_blocks = 4, .seed = 4};

std::size_t count_code(const Report& r, FindingCode c) {
  return static_cast<std::size_t>(std::count_if(r.findings.begin(), r.findings.end(),
                                                [&](const Finding& f) { return f.code == c; }));
}

// Independent recount straight from the on-disk bitmaps.
void check_conservation(const Image& img) {
  const Superblock sb = load_superblock(img);
  auto count_bits = [&](std::uint64_t start, std::uint64_t total) {
    std::uint64_t n = 0;
    for (std::uint64_t i = 0; i < total; ++i) {
      const Block b = img.read_block(start + i / kBitsPerBitmapBlock);
      n += bitmap_byte_test(b, i % kBitsPerBitmapBlock);
    }
    return n;
  };
  CHECK(count_bits(sb.block_bitmap_start, sb.total_blocks) + sb.free_blocks == sb.total_blocks);
  CHECK(count_bits(sb.inode_bitmap_start, sb.total_inodes) + sb.free_inodes == sb.total_inodes);
}

Inode load_inode(const Image& img, std::uint64_t ino) {
  const Superblock sb = img.superblock();
  const Block table = img.read_block(sb.inode_block(ino));
  return Inode::decode(std::span(table).subspan(sb.inode_offset(ino), kInodeSize));
}

// Rewrites the dirent naming `target` in directory `dir` to inode 0.
void unlink_entry(Image& img, const ManifestEntry& dir, std::uint64_t target) {
  for (std::uint64_t b : dir.blocks) {
    Block blk = img.read_block(b);
    for (const auto& r : iterate_dirents(blk).records) {
      if (r.entry.inode != target || r.entry.name == "." || r.entry.name == "..") continue;
      le::store<std::uint64_t>(blk.data() + r.offset, 0);
      seal_dir_block(blk);
      img.write_block(b, blk);
      return;
    }
  }
  FAIL("entry not found");
}

const ManifestEntry* dir_at_depth(const Manifest& m, int depth) {
  for (const ManifestEntry& e : m.entries) {
    if (e.type != FileType::Directory || e.inode < kFirstUserInode) continue;
    int d = 1;
    for (const ManifestEntry* p = m.find(e.parent); p && p->inode != kRootInode; p = m.find(p->parent)) ++d;
    if (d == depth) return &e;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("pristine images are clean") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    ImageSpec spec = kSpec;
    spec.seed = seed;
    spec.dir_count = 40 * seed;
    auto built = build_image(spec);
    const auto before = built.image.snapshot();
    const Report r = run_serial(built.image);
    CHECK(r.clean());
    CHECK(built.image.snapshot() == before);
    CHECK(r.passes[0].objects_checked == spec.total_inodes - 2);
    CHECK(r.passes[3].objects_checked == spec.file_count + spec.dir_count + 2);
  }
}

TEST_CASE("unrecognized images") {
  auto built = build_image({.total_blocks = 256, .total_inodes = 64});
  Image bad_magic = built.image.clone();
  bad_magic.write_bytes(0, 0, std::array<std::uint8_t, 4>{1, 2, 3, 4});
  Image bad_sum = built.image.clone();
  bad_sum.write_bytes(0, 20, std::array<std::uint8_t, 1>{0x55});
  for (Image* img : {&bad_magic, &bad_sum}) {
    try {
      run_serial(*img);
      FAIL("expected UnrecognizedImage");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnrecognizedImage);
    }
  }
}

TEST_CASE("each corruption kind is detected with its mapped code") {
  for (CorruptionKind kind : kAllCorruptionKinds) {
    CAPTURE(to_string(kind));
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      auto built = build_image(kSpec);
      const CorruptionLedger ledger = inject_corruptions(built.image, {{kind, 1}}, seed);
      REQUIRE(ledger.records.size() == 1);
      const CorruptionRecord& rec = ledger.records[0];
      const Report r = run_serial(built.image);
      const bool matched = std::any_of(r.findings.begin(), r.findings.end(), [&](const Finding& f) {
        return f.code == expected_code(kind) && finding_matches(rec, f);
      });
      CHECK(matched);
      if (!matched) MESSAGE(r.canonical_text());
      CHECK(run_serial(built.image).clean());
      check_conservation(built.image);
    }
  }
}

TEST_CASE("single-kind finding shapes") {
  SUBCASE("bitmap flip gives exactly one bitmap finding") {
    auto built = build_image(kSpec);
    inject_corruptions(built.image, {{CorruptionKind::BitmapBlockFlip, 1}}, 3);
    const Report r = run_serial(built.image);
    CHECK(count_code(r, FindingCode::BlockBitmapMismatch) + count_code(r, FindingCode::InodeBitmapMismatch) == 1);
  }

  SUBCASE("duplicate claim names both inodes, lowest keeps the block") {
    auto built = build_image(kSpec);
    const auto ledger = inject_corruptions(built.image, {{CorruptionKind::DuplicateBlockClaim, 1}}, 9);
    const CorruptionRecord& rec = ledger.records[0];
    const Report r = run_serial(built.image);
    REQUIRE(count_code(r, FindingCode::MultiplyClaimedBlock) == 1);
    const Finding& f = *std::find_if(r.findings.begin(), r.findings.end(),
                                     [](const Finding& x) { return x.code == FindingCode::MultiplyClaimedBlock; });
    const std::uint64_t keeper = std::min(rec.inode, rec.aux);
    const std::uint64_t victim = std::max(rec.inode, rec.aux);
    CHECK(f.inode == victim);
    CHECK(f.block == rec.block);
    CHECK(f.detail.find(std::to_string(keeper)) != std::string::npos);
    const Inode v = load_inode(built.image, victim);
    CHECK(std::find(v.direct.begin(), v.direct.end(), rec.block) == v.direct.end());
  }

  SUBCASE("out-of-range direct pointer is zeroed") {
    auto built = build_image(kSpec);
    const auto ledger = inject_corruptions(built.image, {{CorruptionKind::InodeBadPointer, 1}}, 2);
    const CorruptionRecord& rec = ledger.records[0];
    const Report r = run_serial(built.image);
    CHECK(count_code(r, FindingCode::PointerOutOfRange) == 1);
    CHECK(load_inode(built.image, rec.inode).direct[rec.offset] == 0);
  }

  SUBCASE("dangling dirent is merged into its neighbour") {
    auto built = build_image(kSpec);
    const auto ledger = inject_corruptions(built.image, {{CorruptionKind::DirentBadInode, 1}}, 5);
    const CorruptionRecord& rec = ledger.records[0];
    const Report r = run_serial(built.image);
    CHECK(count_code(r, FindingCode::DanglingDirent) == 1);
    const DirentScan scan = iterate_dirents(built.image.read_block(rec.block));
    CHECK_FALSE(scan.malformed_at);
    for (const auto& d : scan.records) CHECK(d.offset != rec.offset);
  }

  SUBCASE("bad links count is rewritten") {
    auto built = build_image(kSpec);
    const auto ledger = inject_corruptions(built.image, {{CorruptionKind::InodeBadLinks, 1}}, 1);
    const std::uint64_t ino = ledger.records[0].inode;
    const Report r = run_serial(built.image);
    CHECK(count_code(r, FindingCode::WrongLinksCount) == 1);
    const ManifestEntry* e = built.manifest.find(ino);
    std::uint64_t want = 1;
    if (e->type == FileType::Directory) {
      want = 2;
      for (const ManifestEntry& c : built.manifest.entries)
        if (c.type == FileType::Directory && c.parent == ino && c.inode != ino) ++want;
    }
    CHECK(load_inode(built.image, ino).links_count == want);
  }

  SUBCASE("orphaned directory lands in lost+found") {
    auto built = build_image(kSpec);
    const auto ledger = inject_corruptions(built.image, {{CorruptionKind::OrphanDirectory, 1}}, 6);
    const std::uint64_t child = ledger.records[0].aux;
    const Report r = run_serial(built.image);
    CHECK(count_code(r, FindingCode::UnreachableDirectory) == 1);
    bool found = false;
    const ManifestEntry* lf = built.manifest.find(kLostFoundInode);
    for (std::uint64_t b : lf->blocks)
      for (const auto& d : iterate_dirents(built.image.read_block(b)).records)
        if (d.entry.inode == child && d.entry.name == "#" + std::to_string(child)) found = true;
    CHECK(found);
  }
}

TEST_CASE("dotdot naming the wrong parent") {
  auto built = build_image(kSpec);
  const ManifestEntry* deep = dir_at_depth(built.manifest, 2);
  REQUIRE(deep != nullptr);
  REQUIRE(deep->parent != kRootInode);
  Block blk = built.image.read_block(deep->blocks[0]);
  const auto recs = iterate_dirents(blk).records;
  REQUIRE(recs[1].entry.name == "..");
  le::store<std::uint64_t>(blk.data() + recs[1].offset, kRootInode);
  seal_dir_block(blk);
  built.image.write_block(deep->blocks[0], blk);

  const Report r = run_serial(built.image);
  CHECK(count_code(r, FindingCode::DotDotMismatch) == 1);
  CHECK(read_dirent(built.image.read_block(deep->blocks[0]), recs[1].offset).inode == deep->parent);
  CHECK(run_serial(built.image).clean());
}

TEST_CASE("detached parent cycle") {
  auto built = build_image(kSpec);
  const ManifestEntry* a = dir_at_depth(built.manifest, 1);
  REQUIRE(a != nullptr);
  const ManifestEntry* b = nullptr;
  for (const ManifestEntry& e : built.manifest.entries)
    if (e.type == FileType::Directory && e.parent == a->inode && e.inode != a->inode) b = &e;
  REQUIRE(b != nullptr);

  unlink_entry(built.image, *built.manifest.find(a->parent), a->inode);
  Block blk = built.image.read_block(b->blocks[0]);
  REQUIRE(insert_dirent(blk, a->inode, FileType::Directory, "loop"));
  seal_dir_block(blk);
  built.image.write_block(b->blocks[0], blk);

  const Report r = run_serial(built.image);
  std::vector<std::uint64_t> unreachable;
  for (const Finding& f : r.findings)
    if (f.code == FindingCode::UnreachableDirectory) unreachable.push_back(f.inode);
  CHECK(std::count(unreachable.begin(), unreachable.end(), a->inode) == 1);
  CHECK(std::count(unreachable.begin(), unreachable.end(), b->inode) == 1);
  CHECK(run_serial(built.image).clean());
  check_conservation(built.image);
}

TEST_CASE("missing parent record is a sequencing error") {
  auto built = build_image(kSpec);
  CheckEnv env(built.image, load_superblock(built.image));
  ShadowState st;
  st.db_list.push_back({5, 100, 0});
  st.parent.assign(env.sb.total_inodes, 0);
  std::vector<Finding> findings;
  std::vector<Patch> patches;
  try {
    pass2_verify_dotdot(env, st, 5, findings, patches);
    FAIL("expected MissingParentRecord");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingParentRecord);
  }
}

TEST_CASE("randomized plans: every record detected, repair idempotent") {
  std::mt19937_64 gen(1234);
  for (int round = 0; round < 40; ++round) {
    ImageSpec spec = kSpec;
    spec.seed = gen();
    spec.file_count = 200 + gen() % 1500;
    spec.dir_count = 80 + gen() % 300;
    spec.mean_file_blocks = 1 + static_cast<std::uint32_t>(gen() % 8);
    spec.total_blocks = 64 + spec.file_count * (spec.mean_file_blocks * 3 / 2 + 2) + spec.dir_count * 2;
    auto built = build_image(spec);
    CorruptionPlan plan;
    for (CorruptionKind k : kAllCorruptionKinds)
      if (gen() % 2) plan.push_back({k, static_cast<std::uint32_t>(1 + gen() % 3)});
    const CorruptionLedger ledger = inject_corruptions(built.image, plan, gen());
    const Report r = run_serial(built.image);
    for (const CorruptionRecord& rec : ledger.records) {
      const bool hit = std::any_of(r.findings.begin(), r.findings.end(),
                                   [&](const Finding& f) { return finding_matches(rec, f); });
      CAPTURE(to_string(rec.kind));
      CAPTURE(rec.inode);
      CHECK(hit);
    }
    const Report again = run_serial(built.image);
    CHECK(again.clean());
    if (!again.clean()) MESSAGE(again.canonical_text());
    check_conservation(built.image);
  }
}

TEST_CASE("report canonical order ignores insertion order") {
  auto built = build_image(kSpec);
  CorruptionPlan plan;
  for (CorruptionKind k : kAllCorruptionKinds) plan.push_back({k, 2});
  inject_corruptions(built.image, plan, 77);
  Report r = run_serial(built.image);
  const std::string text = r.canonical_text();
  std::mt19937_64 gen(5);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(r.findings.begin(), r.findings.end(), gen);
    r.canonicalize();
    CHECK(r.canonical_text() == text);
  }
}
