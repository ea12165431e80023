// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "sfs/image.hpp"
#include "sfs/report.hpp"

namespace sfs {

enum class CorruptionKind : std::uint8_t {
  BitmapBlockFlip,
  BitmapInodeFlip,
  InodeBadMode,
  InodeBadPointer,
  InodeBadLinks,
  InodeBadChecksum,
  DirentBadInode,
  DirentBadRecLen,
  DirBlockBadChecksum,
  DuplicateBlockClaim,
  OrphanDirectory,
};

inline constexpr std::array<CorruptionKind, 11> kAllCorruptionKinds = {
    CorruptionKind::BitmapBlockFlip,   CorruptionKind::BitmapInodeFlip,  CorruptionKind::InodeBadMode,
    CorruptionKind::InodeBadPointer,   CorruptionKind::InodeBadLinks,    CorruptionKind::InodeBadChecksum,
    CorruptionKind::DirentBadInode,    CorruptionKind::DirentBadRecLen,  CorruptionKind::DirBlockBadChecksum,
    CorruptionKind::DuplicateBlockClaim, CorruptionKind::OrphanDirectory,
};

std::string_view to_string(CorruptionKind k) noexcept;
std::optional<CorruptionKind> parse_corruption_kind(std::string_view s) noexcept;

/// The finding code the checker must report for each kind.
FindingCode expected_code(CorruptionKind k) noexcept;

/// One applied corruption. Field meaning per kind:
///   BitmapBlockFlip       block = flipped block bit
///   BitmapInodeFlip       inode = flipped inode bit
///   Inode*                inode = target; InodeBadPointer also block = bad value, offset = slot
///   DirentBadInode        inode = directory, block/offset = dirent, aux = original target
///   DirentBadRecLen       inode = directory, block/offset = dirent
///   DirBlockBadChecksum   inode = directory, block = directory block
///   DuplicateBlockClaim   inode = A, offset = A's slot, block = B's block, aux = B
///   OrphanDirectory       inode = parent, block/offset = dirent, aux = orphaned directory
/// `at_block`/`at_offset` locate the modified byte range.
struct CorruptionRecord {
  CorruptionKind kind = CorruptionKind::BitmapBlockFlip;
  std::uint64_t inode = 0;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;
  std::uint64_t aux = 0;
  std::uint64_t at_block = 0;
  std::uint32_t at_offset = 0;
  std::vector<std::uint8_t> original;
  std::vector<std::uint8_t> corrupted;

  bool operator==(const CorruptionRecord&) const = default;
};

struct CorruptionLedger {
  std::vector<CorruptionRecord> records;

  /// Writes every record's original bytes back.
  void restore(Image& image) const;
  /// True when no two records share a byte.
  bool disjoint() const;

  void write(std::ostream& os) const;
  static CorruptionLedger read(std::istream& is);

  bool operator==(const CorruptionLedger&) const = default;
};

struct PlanItem {
  CorruptionKind kind;
  std::uint32_t count;
};
using CorruptionPlan = std::vector<PlanItem>;

/// "Kind:count,Kind:count". Throws Error{InvalidArgument}.
CorruptionPlan parse_plan(std::string_view text);

/// Applies the plan to a clean image. Throws Error{NoEligibleTarget} when some
/// corruption has no target left that is disjoint from earlier ones; the image
/// may then be partially modified.
CorruptionLedger inject_corruptions(Image& image, const CorruptionPlan& plan, std::uint64_t seed);

/// Whether `f` accounts for `r` (expected code and matching subject).
bool finding_matches(const CorruptionRecord& r, const Finding& f);

}  // namespace sfs
