// SPDX-License-Identifier: Apache-2.0
#include "sfs/format.hpp"

#include <algorithm>
#include <cstring>

#include "sfs/crc32c.hpp"
#include "sfs/endian.hpp"
#include "sfs/error.hpp"

namespace sfs {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::SpecInfeasible: return "SpecInfeasible";
    case Errc::NoEligibleTarget: return "NoEligibleTarget";
    case Errc::UnrecognizedImage: return "UnrecognizedImage";
    case Errc::MissingParentRecord: return "MissingParentRecord";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(FileType t) noexcept {
  switch (t) {
    case FileType::Regular: return "file";
    case FileType::Directory: return "dir";
    case FileType::Symlink: return "symlink";
    case FileType::Unknown: break;
  }
  return "unknown";
}

FileType file_type_for_mode(std::uint16_t m) noexcept {
  switch (m & mode::kTypeMask) {
    case mode::kRegular: return FileType::Regular;
    case mode::kDirectory: return FileType::Directory;
    case mode::kSymlink: return FileType::Symlink;
    default: return FileType::Unknown;
  }
}

namespace {

std::uint64_t div_ceil(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void require_size(std::span<const std::uint8_t> bytes, std::size_t n, const char* what) {
  if (bytes.size() < n) throw Error(Errc::InvalidArgument, std::string(what) + ": buffer too small");
}

}  // namespace

// ---------------------------------------------------------------------------
// Superblock

Superblock Superblock::for_geometry(std::uint64_t total_blocks, std::uint64_t total_inodes) {
  Superblock sb;
  sb.total_blocks = total_blocks;
  sb.total_inodes = total_inodes;
  sb.block_bitmap_start = 1;
  sb.block_bitmap_blocks = static_cast<std::uint32_t>(div_ceil(total_blocks, kBitsPerBitmapBlock));
  sb.inode_bitmap_start = sb.block_bitmap_start + sb.block_bitmap_blocks;
  sb.inode_bitmap_blocks = static_cast<std::uint32_t>(div_ceil(total_inodes, kBitsPerBitmapBlock));
  sb.inode_table_start = sb.inode_bitmap_start + sb.inode_bitmap_blocks;
  sb.inode_table_blocks = static_cast<std::uint32_t>(div_ceil(total_inodes, kInodesPerBlock));
  sb.first_data_block = sb.inode_table_start + sb.inode_table_blocks;
  sb.free_blocks = total_blocks > sb.first_data_block ? total_blocks - sb.first_data_block : 0;
  sb.free_inodes = total_inodes > 2 ? total_inodes - 2 : 0;
  return sb;
}

Superblock Superblock::decode(std::span<const std::uint8_t> bytes) {
  require_size(bytes, kSuperblockSize, "superblock");
  const std::uint8_t* p = bytes.data();
  Superblock sb;
  sb.magic = le::load32(p + 0);
  sb.version = le::load32(p + 4);
  sb.block_size = le::load32(p + 8);
  sb.total_blocks = le::load64(p + 12);
  sb.total_inodes = le::load64(p + 20);
  sb.free_blocks = le::load64(p + 28);
  sb.free_inodes = le::load64(p + 36);
  sb.block_bitmap_start = le::load64(p + 44);
  sb.block_bitmap_blocks = le::load32(p + 52);
  sb.inode_bitmap_start = le::load64(p + 56);
  sb.inode_bitmap_blocks = le::load32(p + 64);
  sb.inode_table_start = le::load64(p + 68);
  sb.inode_table_blocks = le::load32(p + 76);
  sb.root_inode = le::load64(p + 80);
  sb.first_data_block = le::load64(p + 88);
  sb.checksum = le::load32(p + 96);
  return sb;
}

void Superblock::encode(std::span<std::uint8_t> out) const {
  if (out.size() < kSuperblockSize) throw Error(Errc::InvalidArgument, "superblock: buffer too small");
  std::uint8_t* p = out.data();
  std::memset(p, 0, kSuperblockSize);
  le::store(p + 0, magic);
  le::store(p + 4, version);
  le::store(p + 8, block_size);
  le::store(p + 12, total_blocks);
  le::store(p + 20, total_inodes);
  le::store(p + 28, free_blocks);
  le::store(p + 36, free_inodes);
  le::store(p + 44, block_bitmap_start);
  le::store(p + 52, block_bitmap_blocks);
  le::store(p + 56, inode_bitmap_start);
  le::store(p + 64, inode_bitmap_blocks);
  le::store(p + 68, inode_table_start);
  le::store(p + 76, inode_table_blocks);
  le::store(p + 80, root_inode);
  le::store(p + 88, first_data_block);
  le::store(p + 96, checksum);
}

std::uint32_t Superblock::compute_checksum() const {
  std::array<std::uint8_t, kSuperblockSize> buf{};
  Superblock copy = *this;
  copy.checksum = 0;
  copy.encode(buf);
  return crc32c(buf);
}

bool superblock_checksum_ok(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSuperblockSize) return false;
  std::array<std::uint8_t, kSuperblockSize> buf{};
  std::copy_n(bytes.begin(), kSuperblockSize, buf.begin());
  const std::uint32_t stored = le::load32(buf.data() + 96);
  le::store<std::uint32_t>(buf.data() + 96, 0);
  return crc32c(buf) == stored;
}

std::optional<std::string> Superblock::validate(std::uint64_t device_blocks) const {
  if (magic != kMagic) return "bad magic";
  if (version != kVersion) return "unsupported version " + std::to_string(version);
  if (block_size != kBlockSize) return "unsupported block size " + std::to_string(block_size);
  if (root_inode != kRootInode) return "root inode is not 2";
  if (total_inodes < 3) return "fewer than 3 inodes";
  if (total_blocks > device_blocks) return "image shorter than total_blocks";

  struct Region {
    std::uint64_t start, len;
    const char* name;
  };
  const Region regions[] = {{0, 1, "superblock"},
                            {block_bitmap_start, block_bitmap_blocks, "block bitmap"},
                            {inode_bitmap_start, inode_bitmap_blocks, "inode bitmap"},
                            {inode_table_start, inode_table_blocks, "inode table"}};
  for (const auto& r : regions) {
    if (r.len == 0) return std::string(r.name) + " is empty";
    if (r.start > first_data_block || r.len > first_data_block - r.start)
      return std::string(r.name) + " overlaps the data area";
  }
  for (std::size_t i = 0; i < std::size(regions); ++i) {
    for (std::size_t j = i + 1; j < std::size(regions); ++j) {
      const auto& a = regions[i];
      const auto& b = regions[j];
      if (a.start < b.start + b.len && b.start < a.start + a.len)
        return std::string(a.name) + " overlaps " + b.name;
    }
  }
  if (first_data_block > total_blocks) return "metadata exceeds total_blocks";
  if (std::uint64_t{block_bitmap_blocks} * kBitsPerBitmapBlock < total_blocks) return "block bitmap too small";
  if (std::uint64_t{inode_bitmap_blocks} * kBitsPerBitmapBlock < total_inodes) return "inode bitmap too small";
  if (std::uint64_t{inode_table_blocks} * kInodesPerBlock < total_inodes) return "inode table too small";
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Inode

Inode Inode::decode(std::span<const std::uint8_t> bytes) {
  require_size(bytes, kInodeSize, "inode");
  const std::uint8_t* p = bytes.data();
  Inode ino;
  ino.mode = le::load16(p + 0);
  ino.links_count = le::load16(p + 2);
  ino.flags = le::load32(p + 4);
  ino.size = le::load64(p + 8);
  ino.mtime = le::load64(p + 16);
  for (std::size_t i = 0; i < kDirectPointers; ++i) ino.direct[i] = le::load64(p + kDirectOffset + 8 * i);
  ino.indirect = le::load64(p + kIndirectOffset);
  ino.checksum = le::load32(p + kChecksumOffset);
  ino.reserved0 = le::load32(p + 116);
  ino.reserved1 = le::load64(p + 120);
  return ino;
}

void Inode::encode(std::span<std::uint8_t> out) const {
  if (out.size() < kInodeSize) throw Error(Errc::InvalidArgument, "inode: buffer too small");
  std::uint8_t* p = out.data();
  le::store(p + 0, mode);
  le::store(p + 2, links_count);
  le::store(p + 4, flags);
  le::store(p + 8, size);
  le::store(p + 16, mtime);
  for (std::size_t i = 0; i < kDirectPointers; ++i) le::store(p + kDirectOffset + 8 * i, direct[i]);
  le::store(p + kIndirectOffset, indirect);
  le::store(p + kChecksumOffset, checksum);
  le::store(p + 116, reserved0);
  le::store(p + 120, reserved1);
}

std::uint32_t Inode::compute_checksum() const {
  std::array<std::uint8_t, kInodeSize> buf{};
  Inode copy = *this;
  copy.checksum = 0;
  copy.encode(buf);
  return crc32c(buf);
}

bool inode_checksum_ok(std::span<const std::uint8_t> raw) {
  if (raw.size() < kInodeSize) return false;
  std::array<std::uint8_t, kInodeSize> buf{};
  std::copy_n(raw.begin(), kInodeSize, buf.begin());
  const std::uint32_t stored = le::load32(buf.data() + Inode::kChecksumOffset);
  le::store<std::uint32_t>(buf.data() + Inode::kChecksumOffset, 0);
  return crc32c(buf) == stored;
}

bool inode_bytes_free(std::span<const std::uint8_t> raw) { return le::load16(raw.data()) == 0; }

// ---------------------------------------------------------------------------
// Directory blocks

DirentScan iterate_dirents(BlockView block) {
  DirentScan scan;
  std::uint32_t off = 0;
  while (off < kDirTailOffset) {
    if (kDirTailOffset - off < kDirentHeaderSize) {
      scan.malformed_at = off;
      break;
    }
    const std::uint8_t* p = block.data() + off;
    const std::uint16_t rec_len = le::load16(p + 8);
    const std::uint8_t name_len = p[10];
    if (rec_len < kDirentHeaderSize || rec_len % 4 != 0 || rec_len > kDirTailOffset - off ||
        rec_len < dirent_min_len(name_len)) {
      scan.malformed_at = off;
      break;
    }
    DirentRecord rec;
    rec.offset = off;
    rec.entry.inode = le::load64(p);
    rec.entry.rec_len = rec_len;
    rec.entry.name_len = name_len;
    rec.entry.file_type = p[11];
    rec.entry.name.assign(reinterpret_cast<const char*>(p + kDirentHeaderSize), name_len);
    scan.records.push_back(std::move(rec));
    off += rec_len;
  }
  return scan;
}

Dirent read_dirent(BlockView block, std::uint32_t offset) {
  if (offset > kDirTailOffset - kDirentHeaderSize) throw Error(Errc::OutOfRange, "dirent offset");
  const std::uint8_t* p = block.data() + offset;
  Dirent d;
  d.inode = le::load64(p);
  d.rec_len = le::load16(p + 8);
  d.name_len = p[10];
  d.file_type = p[11];
  const std::size_t n = std::min<std::size_t>(d.name_len, kDirTailOffset - offset - kDirentHeaderSize);
  d.name.assign(reinterpret_cast<const char*>(p + kDirentHeaderSize), n);
  return d;
}

void write_dirent(MutableBlockView block, std::uint32_t offset, const Dirent& d) {
  if (offset + kDirentHeaderSize + d.name.size() > kDirTailOffset) throw Error(Errc::OutOfRange, "dirent offset");
  std::uint8_t* p = block.data() + offset;
  le::store(p, d.inode);
  le::store(p + 8, d.rec_len);
  p[10] = d.name_len;
  p[11] = d.file_type;
  std::memcpy(p + kDirentHeaderSize, d.name.data(), d.name.size());
}

bool dir_tail_ok(BlockView block) {
  if (le::load32(block.data() + kDirTailOffset) != kDirTailMagic) return false;
  return crc32c(block.first(kDirTailOffset)) == le::load32(block.data() + kDirTailOffset + 4);
}

void seal_dir_block(MutableBlockView block) {
  le::store(block.data() + kDirTailOffset, kDirTailMagic);
  le::store(block.data() + kDirTailOffset + 4, crc32c(std::span<const std::uint8_t>(block).first(kDirTailOffset)));
}

DirBlockBuilder::DirBlockBuilder() = default;

bool DirBlockBuilder::add(std::uint64_t inode, FileType type, std::string_view name) {
  if (name.empty() || name.size() > kMaxNameLen) throw Error(Errc::InvalidArgument, "dirent name length");
  const std::uint32_t len = dirent_min_len(name.size());
  if (used_ + len > kDirTailOffset) return false;
  Dirent d{inode, static_cast<std::uint16_t>(len), static_cast<std::uint8_t>(name.size()),
           static_cast<std::uint8_t>(type), std::string(name)};
  write_dirent(block_, used_, d);
  last_offset_ = used_;
  used_ += len;
  return true;
}

Block DirBlockBuilder::finish() {
  if (last_offset_ < 0) {
    Dirent empty{0, static_cast<std::uint16_t>(kDirTailOffset), 0, 0, {}};
    write_dirent(block_, 0, empty);
  } else {
    const auto off = static_cast<std::uint32_t>(last_offset_);
    le::store<std::uint16_t>(block_.data() + off + 8, static_cast<std::uint16_t>(kDirTailOffset - off));
  }
  seal_dir_block(block_);
  Block out = block_;
  block_ = Block{};
  used_ = 0;
  last_offset_ = -1;
  return out;
}

bool insert_dirent(MutableBlockView block, std::uint64_t inode, FileType type, std::string_view name) {
  const std::uint32_t need = dirent_min_len(name.size());
  const DirentScan scan = iterate_dirents(block);
  if (scan.malformed_at) return false;
  for (const auto& rec : scan.records) {
    const Dirent& e = rec.entry;
    if (e.inode == 0 && e.rec_len >= need) {
      Dirent d{inode, e.rec_len, static_cast<std::uint8_t>(name.size()), static_cast<std::uint8_t>(type),
               std::string(name)};
      write_dirent(block, rec.offset, d);
      return true;
    }
    const std::uint32_t used = dirent_min_len(e.name_len);
    if (e.inode != 0 && e.rec_len >= used + need) {
      const std::uint32_t new_off = rec.offset + used;
      Dirent d{inode, static_cast<std::uint16_t>(e.rec_len - used), static_cast<std::uint8_t>(name.size()),
               static_cast<std::uint8_t>(type), std::string(name)};
      le::store<std::uint16_t>(block.data() + rec.offset + 8, static_cast<std::uint16_t>(used));
      write_dirent(block, new_off, d);
      return true;
    }
  }
  return false;
}

}  // namespace sfs
