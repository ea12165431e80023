// SPDX-License-Identifier: Apache-2.0
//
// The five check passes and the serial checker.
//
//   pass 1   inode table: checksums, modes, block pointers, block claims
//   pass 1b  multiply-claimed blocks (lowest inode keeps the block)
//   pass 2   directory blocks: tail checksum, dirent structure and targets,
//            then "..": verified once all directory blocks are certified
//   pass 3   connectivity: unreachable directories move to lost+found
//   pass 4   link counts
//   pass 5   on-disk bitmaps and superblock free counts
//
// Pass functions only touch the ThreadContext and patch list handed to them,
// plus the per-inode status slot of the inode being checked. The engine
// decides where patches are applied.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "sfs/bitmap.hpp"
#include "sfs/block_cache.hpp"
#include "sfs/image.hpp"
#include "sfs/report.hpp"

namespace sfs {

class EventLog;

struct DbEntry {
  std::uint64_t dir = 0;
  std::uint64_t block = 0;
  std::uint64_t logical = 0;

  auto operator<=>(const DbEntry&) const = default;
};

struct ParentCandidate {
  std::uint64_t child = 0;
  std::uint64_t dir = 0;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;

  auto location() const { return std::tuple(dir, block, offset); }
};

struct DotDotRecord {
  std::uint64_t dir = 0;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;
  std::uint64_t value = 0;

  bool operator==(const DotDotRecord&) const = default;
};

/// An out-of-range indirect entry. Zeroed after multi-claim resolution, and only
/// if the indirect block still belongs to the inode.
struct DeferredZero {
  std::uint64_t inode = 0;
  std::uint64_t indirect = 0;
  std::uint32_t entry = 0;

  auto operator<=>(const DeferredZero&) const = default;
};

/// A byte-range write produced by a repair.
struct Patch {
  FindingKey key;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;
  std::vector<std::uint8_t> bytes;
};

bool patch_less(const Patch& a, const Patch& b);
/// Applies patches in canonical order (block-granular read-modify-write).
/// Returns the distinct blocks written.
std::vector<std::uint64_t> apply_patches(Image& image, std::vector<Patch>& patches);

/// Pipeline-mode block claims: one bitmap guarded by 64 interleaved locks.
class ClaimTable {
 public:
  static constexpr std::size_t kShards = 64;

  explicit ClaimTable(std::uint64_t blocks) : bits_(blocks) {}

  /// Marks the block; false when it was already marked.
  bool claim(std::uint64_t b) {
    std::lock_guard lock(shards_[(b >> 6) % kShards]);
    return !bits_.test_and_set(b);
  }
  const Bitmap& bits() const { return bits_; }
  Bitmap take() { return std::move(bits_); }

 private:
  Bitmap bits_;
  std::array<std::mutex, kShards> shards_;
};

/// Shared, read-mostly state of one check run.
struct CheckEnv {
  Image& image;
  Superblock sb;
  /// Per inode: FileType byte when in use after pass 1, else 0. Slot i is
  /// written only by the worker checking inode i.
  std::vector<std::uint8_t> status;

  CheckEnv(Image& img, const Superblock& s) : image(img), sb(s), status(s.total_inodes, 0) {}
  bool in_use(std::uint64_t ino) const { return ino < status.size() && status[ino] != 0; }
};

/// Per-worker state, confined to one thread until merged.
struct ThreadContext {
  ThreadContext(unsigned id, const CheckEnv& env, CacheConfig cache_cfg, ClaimTable* shared = nullptr);

  void claim_block(std::uint64_t b);

  unsigned id;
  Bitmap claimed_blocks;
  Bitmap claimed_inodes;
  ClaimTable* shared_claims;
  std::vector<std::uint64_t> repeat_claims;  // blocks this context saw claimed again
  std::vector<DbEntry> db;
  std::vector<DeferredZero> deferred;
  std::vector<std::uint64_t> icount_log;
  std::vector<ParentCandidate> parents;
  std::vector<DotDotRecord> dotdots;
  std::vector<Finding> findings;
  std::uint64_t claims = 0;
  std::array<std::uint64_t, 5> objects{};
  BlockCache cache;
};

struct ShadowState {
  Bitmap claimed_blocks;
  Bitmap claimed_inodes;
  std::vector<std::uint64_t> multi_claimed;  // sorted, unique
  std::vector<DbEntry> db_list;              // sorted
  std::vector<DeferredZero> deferred;        // sorted
  std::vector<std::uint32_t> icount;
  std::vector<std::uint64_t> parent;         // per inode, 0 = none
  std::vector<DotDotRecord> dotdot;          // sorted by dir
  std::uint64_t claims = 0;
  std::array<std::uint64_t, 5> objects{};
  std::vector<Finding> findings;

  DotDotRecord* find_dotdot(std::uint64_t dir);
};

/// Pass-1 merge: ORs claim bitmaps (a bit set in two contexts is a
/// multi-claim), concatenates and sorts db_list, sums statistics.
ShadowState merge_contexts(std::span<ThreadContext* const> contexts, const Superblock& sb,
                           Bitmap* shared_claims = nullptr);
/// Pass-2 merge: icount logs, parent candidates (lowest location wins), "..".
void merge_directory_results(ShadowState& state, std::span<ThreadContext* const> contexts);

// --- pass 1 ---------------------------------------------------------------
void pass1_check_inode(CheckEnv& env, ThreadContext& ctx, std::uint64_t ino, std::span<const std::uint8_t> raw,
                       std::vector<Patch>& patches);
/// Checks inodes [first, first + count), reading the table through ctx.cache.
void pass1_check_range(CheckEnv& env, ThreadContext& ctx, std::uint64_t first, std::uint64_t count,
                       std::vector<Patch>& patches);
/// Pass 1b. Runs with exclusive image access; writes repairs directly. Also
/// marks metadata blocks and the reserved inodes as in use. Returns the
/// blocks it wrote, ascending.
std::vector<std::uint64_t> resolve_multiclaims(CheckEnv& env, ShadowState& state);

// --- pass 2 ---------------------------------------------------------------
struct ParsedDirent {
  std::uint64_t inode = 0;
  std::uint32_t offset = 0;
  std::uint16_t rec_len = 0;
  std::uint8_t name_len = 0;
  std::uint8_t file_type = 0;
  enum class Name : std::uint8_t { Normal, Dot, DotDot } name = Name::Normal;
};

struct ParsedDirBlock {
  DbEntry where;
  bool tail_ok = true;
  std::optional<std::uint32_t> malformed_at;
  std::vector<ParsedDirent> records;
};

/// Structural parse; needs nothing from pass 1 beyond the block's location.
ParsedDirBlock parse_dir_block(ThreadContext& ctx, const DbEntry& where);
/// Checks a parsed block against the final pass-1 inode status.
void certify_dir_block(const CheckEnv& env, ThreadContext& ctx, const ParsedDirBlock& parsed,
                       std::vector<Patch>& patches);
/// Compares a directory's ".." with its parent. Throws Error{MissingParentRecord}
/// when block 0 of the directory is known but has not been certified yet.
void pass2_verify_dotdot(const CheckEnv& env, ShadowState& state, std::uint64_t dir, std::vector<Finding>& findings,
                         std::vector<Patch>& patches);
/// Directories whose block 0 is in db_list, ascending.
std::vector<std::uint64_t> directories_with_dotdot(const ShadowState& state);

// --- passes 3-5 -----------------------------------------------------------
void pass3_connectivity(CheckEnv& env, ShadowState& state);
void pass4_refcounts(CheckEnv& env, ShadowState& state);

struct BitmapCompare {
  std::vector<Finding> findings;
  std::optional<Block> rewrite;
  std::uint64_t block = 0;
};
enum class BitmapKind : std::uint8_t { Blocks, Inodes };
/// Compares one on-disk bitmap block (index within its region) with the shadow state.
BitmapCompare pass5_compare_block(const CheckEnv& env, const ShadowState& state, BitmapKind kind,
                                  std::uint32_t index);
/// Free-count comparison; call after all bitmap blocks are rewritten.
void pass5_free_counts(CheckEnv& env, ShadowState& state);

// --- runs -----------------------------------------------------------------
struct CheckOptions {
  CacheConfig cache;
  std::uint32_t inode_range = 2048;
  EventLog* events = nullptr;
};

/// Decodes and validates the superblock; throws Error{UnrecognizedImage}.
Superblock load_superblock(const Image& image);

/// Single-threaded oracle.
Report run_serial(Image& image, const CheckOptions& opts = {});

/// Builds the report from the final state (findings, stats).
Report finish_report(ShadowState& state);

}  // namespace sfs
