// SPDX-License-Identifier: Apache-2.0
//
// On-disk layout of an SFS image.
//
//   block 0                      superblock (first 128 bytes used, rest zero)
//   block_bitmap_start ...       one bit per block, LSB-first within each byte
//   inode_bitmap_start ...       one bit per inode
//   inode_table_start ...        32 inodes of 128 bytes per block
//   first_data_block ...         directory, indirect and file data blocks
//
// All integers are little-endian. Every checksum is CRC32C.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sfs {

inline constexpr std::uint32_t kMagic = 0x53465331;  // "SFS1"
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kBlockSize = 4096;
inline constexpr std::size_t kInodeSize = 128;
inline constexpr std::size_t kInodesPerBlock = kBlockSize / kInodeSize;
inline constexpr std::size_t kSuperblockSize = 128;
inline constexpr std::uint64_t kBitsPerBitmapBlock = std::uint64_t{kBlockSize} * 8;

inline constexpr std::size_t kDirectPointers = 10;
inline constexpr std::size_t kPointersPerIndirect = kBlockSize / 8;
inline constexpr std::size_t kMaxFileBlocks = kDirectPointers + kPointersPerIndirect;
// Pointer "slot" numbering used in findings: 0..9 direct, 10 the indirect
// pointer itself, 11 + k entry k of the indirect block.
inline constexpr std::uint32_t kIndirectSlot = kDirectPointers;
inline constexpr std::uint32_t kFirstIndirectEntrySlot = kDirectPointers + 1;

inline constexpr std::uint64_t kRootInode = 2;
inline constexpr std::uint64_t kLostFoundInode = 3;
inline constexpr std::uint64_t kFirstUserInode = 4;

inline constexpr std::size_t kInlineSymlinkMax = kDirectPointers * 8;

inline constexpr std::uint32_t kDirTailOffset = kBlockSize - 8;
inline constexpr std::uint32_t kDirTailMagic = 0x44424C4B;
inline constexpr std::uint32_t kDirentHeaderSize = 12;
inline constexpr std::size_t kMaxNameLen = 255;

using Block = std::array<std::uint8_t, kBlockSize>;
using BlockView = std::span<const std::uint8_t, kBlockSize>;
using MutableBlockView = std::span<std::uint8_t, kBlockSize>;

namespace mode {
inline constexpr std::uint16_t kTypeMask = 0xF000;
inline constexpr std::uint16_t kDirectory = 0x4000;
inline constexpr std::uint16_t kRegular = 0x8000;
inline constexpr std::uint16_t kSymlink = 0xA000;
inline constexpr std::uint16_t kPermMask = 0x0FFF;
}  // namespace mode

enum class FileType : std::uint8_t {
  Unknown = 0,
  Regular = 1,
  Directory = 2,
  Symlink = 7,
};

std::string_view to_string(FileType t) noexcept;
/// Dirent file_type byte for a mode, or Unknown when the type nibble is invalid.
FileType file_type_for_mode(std::uint16_t mode) noexcept;

struct Superblock {
  std::uint32_t magic = kMagic;
  std::uint32_t version = kVersion;
  std::uint32_t block_size = kBlockSize;
  std::uint64_t total_blocks = 0;
  std::uint64_t total_inodes = 0;
  std::uint64_t free_blocks = 0;
  std::uint64_t free_inodes = 0;
  std::uint64_t block_bitmap_start = 0;
  std::uint32_t block_bitmap_blocks = 0;
  std::uint64_t inode_bitmap_start = 0;
  std::uint32_t inode_bitmap_blocks = 0;
  std::uint64_t inode_table_start = 0;
  std::uint32_t inode_table_blocks = 0;
  std::uint64_t root_inode = kRootInode;
  std::uint64_t first_data_block = 0;
  std::uint32_t checksum = 0;

  // Byte offsets of the fields repaired by the checker.
  static constexpr std::uint32_t kFreeBlocksOffset = 28;
  static constexpr std::uint32_t kFreeInodesOffset = 36;

  /// Lays out the metadata regions for a filesystem of the given size. Free
  /// counts are set to "everything free except metadata and reserved inodes".
  static Superblock for_geometry(std::uint64_t total_blocks, std::uint64_t total_inodes);

  static Superblock decode(std::span<const std::uint8_t> bytes);
  /// Writes every field verbatim, including `checksum`.
  void encode(std::span<std::uint8_t> out) const;
  std::uint32_t compute_checksum() const;
  void seal() { checksum = compute_checksum(); }

  /// Structural validation against a device of `device_blocks` blocks.
  /// Returns a description of the first problem found.
  std::optional<std::string> validate(std::uint64_t device_blocks) const;

  std::uint64_t inode_block(std::uint64_t ino) const { return inode_table_start + ino / kInodesPerBlock; }
  std::uint32_t inode_offset(std::uint64_t ino) const {
    return static_cast<std::uint32_t>((ino % kInodesPerBlock) * kInodeSize);
  }
  bool data_block_in_range(std::uint64_t b) const { return b >= first_data_block && b < total_blocks; }

  bool operator==(const Superblock&) const = default;
};

bool superblock_checksum_ok(std::span<const std::uint8_t> bytes);

struct Inode {
  std::uint16_t mode = 0;
  std::uint16_t links_count = 0;
  std::uint32_t flags = 0;
  std::uint64_t size = 0;
  std::uint64_t mtime = 0;
  std::array<std::uint64_t, kDirectPointers> direct{};
  std::uint64_t indirect = 0;
  std::uint32_t checksum = 0;
  std::uint32_t reserved0 = 0;
  std::uint64_t reserved1 = 0;

  static constexpr std::uint32_t kModeOffset = 0;
  static constexpr std::uint32_t kLinksOffset = 2;
  static constexpr std::uint32_t kDirectOffset = 24;
  static constexpr std::uint32_t kIndirectOffset = 104;
  static constexpr std::uint32_t kChecksumOffset = 112;

  static Inode decode(std::span<const std::uint8_t> bytes);
  void encode(std::span<std::uint8_t> out) const;
  std::uint32_t compute_checksum() const;
  void seal() { checksum = compute_checksum(); }

  std::uint16_t type() const { return mode & mode::kTypeMask; }
  bool in_use() const { return mode != 0; }
  bool is_dir() const { return type() == mode::kDirectory; }
  bool is_regular() const { return type() == mode::kRegular; }
  bool is_symlink() const { return type() == mode::kSymlink; }
  bool valid_type() const { return is_dir() || is_regular() || is_symlink(); }
  /// Symlink whose target lives in the pointer bytes instead of a block.
  bool inline_target() const { return is_symlink() && size <= kInlineSymlinkMax; }

  bool operator==(const Inode&) const = default;
};

bool inode_checksum_ok(std::span<const std::uint8_t> raw);
bool inode_bytes_free(std::span<const std::uint8_t> raw);

// ---------------------------------------------------------------------------
// Directory blocks

struct Dirent {
  std::uint64_t inode = 0;
  std::uint16_t rec_len = 0;
  std::uint8_t name_len = 0;
  std::uint8_t file_type = 0;
  std::string name;

  bool operator==(const Dirent&) const = default;
};

struct DirentRecord {
  std::uint32_t offset = 0;
  Dirent entry;

  bool operator==(const DirentRecord&) const = default;
};

/// Result of walking a directory block. Walking stops at the first record that
/// breaks tiling; `malformed_at` then holds that record's offset.
struct DirentScan {
  std::vector<DirentRecord> records;
  std::optional<std::uint32_t> malformed_at;

  bool operator==(const DirentScan&) const = default;
};

constexpr std::uint32_t dirent_min_len(std::size_t name_len) {
  return static_cast<std::uint32_t>((kDirentHeaderSize + name_len + 3) & ~std::size_t{3});
}

DirentScan iterate_dirents(BlockView block);

Dirent read_dirent(BlockView block, std::uint32_t offset);
void write_dirent(MutableBlockView block, std::uint32_t offset, const Dirent& d);

bool dir_tail_ok(BlockView block);
/// Writes the tail magic and the checksum over [0, kDirTailOffset).
void seal_dir_block(MutableBlockView block);

/// Packs entries sequentially into one directory block.
class DirBlockBuilder {
 public:
  DirBlockBuilder();

  /// False when the entry does not fit; the block is unchanged then.
  bool add(std::uint64_t inode, FileType type, std::string_view name);
  bool empty() const { return last_offset_ < 0; }
  /// Extends the last record to the tail (or writes one empty record) and seals.
  Block finish();

 private:
  Block block_{};
  std::uint32_t used_ = 0;
  long last_offset_ = -1;
};

/// Inserts an entry into the slack of an existing, well-formed block.
/// Returns false when no record has room. Does not reseal the tail.
bool insert_dirent(MutableBlockView block, std::uint64_t inode, FileType type, std::string_view name);

}  // namespace sfs
