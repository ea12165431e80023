// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace sfs {

// Declaration order is the canonical sort order.
enum class FindingCode : std::uint8_t {
  BadInodeChecksum,
  BadMode,
  PointerOutOfRange,
  MultiplyClaimedBlock,
  BadDirChecksum,
  BadDirent,
  DanglingDirent,
  DotDotMismatch,
  UnreachableDirectory,
  WrongLinksCount,
  ZeroLinkInUse,
  BlockBitmapMismatch,
  InodeBitmapMismatch,
  FreeCountMismatch,
};

enum class Repair : std::uint8_t {
  None,
  RecomputeChecksum,
  ClearInode,
  ZeroPointer,
  ClearDirent,
  FixFileType,
  FixDot,
  RewriteDotDot,
  TruncateDirBlock,
  ReconnectToLostFound,
  SetLinksCount,
  SetBitmapBit,
  ClearBitmapBit,
  RewriteSuperblockCount,
  NotRepaired,
};

std::string_view to_string(FindingCode c) noexcept;
std::string_view to_string(Repair r) noexcept;
std::optional<FindingCode> parse_finding_code(std::string_view s) noexcept;
std::optional<Repair> parse_repair(std::string_view s) noexcept;

using FindingKey = std::tuple<std::uint8_t, FindingCode, std::uint64_t, std::uint64_t, std::uint32_t>;

struct Finding {
  std::uint8_t pass = 0;
  FindingCode code = FindingCode::BadInodeChecksum;
  std::uint64_t inode = 0;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;
  std::string detail;
  Repair repair = Repair::None;

  FindingKey key() const { return {pass, code, inode, block, offset}; }
  bool operator==(const Finding&) const = default;
};

/// Total order: key, then repair, then detail.
bool canonical_less(const Finding& a, const Finding& b);

struct PassStats {
  std::uint64_t objects_checked = 0;
  double seconds = 0.0;
};

struct Report {
  std::vector<Finding> findings;
  std::array<PassStats, 5> passes{};
  /// Free-form counters (cache, queues, barrier); not part of the canonical bytes.
  std::map<std::string, std::uint64_t> counters;

  void canonicalize();
  bool clean() const { return findings.empty(); }
  std::uint64_t count(FindingCode c) const;

  /// One line per finding in canonical order. Byte-stable: two reports with the
  /// same finding multiset produce identical strings.
  std::string canonical_text() const;
  /// canonical_text() followed by '#'-prefixed stats lines.
  std::string to_text() const;
  /// JSON document with findings and stats. Findings are canonical.
  std::string to_json(int indent = 2) const;
};

std::string format_finding(const Finding& f);

}  // namespace sfs
