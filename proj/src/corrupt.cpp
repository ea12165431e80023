// SPDX-License-Identifier: Apache-2.0
#include "sfs/corrupt.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "sfs/endian.hpp"
#include "sfs/error.hpp"
#include "sfs/rng.hpp"

namespace sfs {
namespace {

constexpr std::array<std::string_view, 11> kKindNames = {
    "BitmapBlockFlip", "BitmapInodeFlip", "InodeBadMode",        "InodeBadPointer",     "InodeBadLinks",
    "InodeBadChecksum", "DirentBadInode", "DirentBadRecLen",     "DirBlockBadChecksum", "DuplicateBlockClaim",
    "OrphanDirectory",
};

struct InodeInfo {
  std::uint64_t ino = 0;
  Inode inode;
  std::vector<std::uint64_t> direct_blocks;  // mapped direct pointers, by slot (0 = hole)
  std::vector<std::uint64_t> all_blocks;     // every data block plus the indirect block
};

struct DirentInfo {
  std::uint64_t dir = 0;
  std::uint64_t block = 0;
  std::uint32_t offset = 0;
  std::uint64_t target = 0;
  bool protected_entry = false;  // ".", ".." and root's lost+found entry
  std::size_t block_end = 0;  // index one past the last dirent of the same block
};

/// What a pristine image contains, gathered once before injecting.
struct Catalog {
  Superblock sb;
  std::vector<InodeInfo> inodes;  // in use, ascending
  std::vector<std::uint64_t> owner;  // per block, 0 when unowned
  std::vector<bool> in_use;
  std::vector<DirentInfo> dirents;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> dir_blocks;  // (dir, block)

  const InodeInfo* find(std::uint64_t ino) const {
    auto it = std::lower_bound(inodes.begin(), inodes.end(), ino,
                               [](const InodeInfo& i, std::uint64_t v) { return i.ino < v; });
    return it != inodes.end() && it->ino == ino ? &*it : nullptr;
  }
};

Catalog scan(const Image& image) {
  Catalog c;
  c.sb = image.superblock();
  const Superblock& sb = c.sb;
  c.owner.assign(sb.total_blocks, 0);
  c.in_use.assign(sb.total_inodes, false);

  std::vector<std::uint8_t> table(std::size_t{sb.inode_table_blocks} * kBlockSize);
  image.read_blocks(sb.inode_table_start, sb.inode_table_blocks, table);
  for (std::uint64_t ino = kRootInode; ino < sb.total_inodes; ++ino) {
    const auto raw = std::span<const std::uint8_t>(table).subspan(ino * kInodeSize, kInodeSize);
    if (inode_bytes_free(raw)) continue;
    InodeInfo info;
    info.ino = ino;
    info.inode = Inode::decode(raw);
    c.in_use[ino] = true;
    if (!info.inode.inline_target()) {
      for (std::size_t i = 0; i < kDirectPointers; ++i) {
        info.direct_blocks.push_back(info.inode.direct[i]);
        if (info.inode.direct[i] != 0) info.all_blocks.push_back(info.inode.direct[i]);
      }
      if (info.inode.indirect != 0) {
        info.all_blocks.push_back(info.inode.indirect);
        const Block ind = image.read_block(info.inode.indirect);
        for (std::size_t k = 0; k < kPointersPerIndirect; ++k) {
          const std::uint64_t b = le::load64(ind.data() + k * 8);
          if (b != 0) info.all_blocks.push_back(b);
        }
      }
    }
    for (std::uint64_t b : info.all_blocks) c.owner[b] = ino;
    c.inodes.push_back(std::move(info));
  }

  for (const InodeInfo& info : c.inodes) {
    if (!info.inode.is_dir()) continue;
    std::vector<std::uint64_t> data;
    for (std::uint64_t b : info.all_blocks)
      if (b != info.inode.indirect) data.push_back(b);
    for (std::size_t logical = 0; logical < data.size(); ++logical) {
      const std::uint64_t b = data[logical];
      c.dir_blocks.emplace_back(info.ino, b);
      const Block blk = image.read_block(b);
      const DirentScan s = iterate_dirents(blk);
      const std::size_t first = c.dirents.size();
      for (std::size_t i = 0; i < s.records.size(); ++i) {
        const auto& r = s.records[i];
        if (r.entry.inode == 0) continue;
        DirentInfo d;
        d.dir = info.ino;
        d.block = b;
        d.offset = r.offset;
        d.target = r.entry.inode;
        d.protected_entry = (logical == 0 && i < 2) || r.entry.inode == kLostFoundInode || r.entry.inode == kRootInode;
        c.dirents.push_back(std::move(d));
      }
      for (std::size_t i = first; i < c.dirents.size(); ++i) c.dirents[i].block_end = c.dirents.size();
    }
  }
  return c;
}

/// Tracks which objects earlier records depend on so records stay disjoint and
/// each one remains independently detectable.
class Reservations {
 public:
  bool inode_free(std::uint64_t ino) const { return !exclusive_.count(ino) && !guarded_.count(ino); }
  bool dir_guardable(std::uint64_t dir) const { return !exclusive_.count(dir); }
  bool block_free(std::uint64_t b) const { return !blocks_.count(b); }
  bool byte_free(std::uint64_t b, std::uint32_t off) const { return !bytes_.count({b, off}); }

  void take_inode(std::uint64_t ino) { exclusive_.insert(ino); }
  void guard_dir(std::uint64_t dir) { guarded_.insert(dir); }
  void take_block(std::uint64_t b) { blocks_.insert(b); }
  void take_byte(std::uint64_t b, std::uint32_t off) { bytes_.insert({b, off}); }

 private:
  std::set<std::uint64_t> exclusive_;
  std::set<std::uint64_t> guarded_;
  std::set<std::uint64_t> blocks_;
  std::set<std::pair<std::uint64_t, std::uint32_t>> bytes_;
};

class Injector {
 public:
  Injector(Image& image, std::uint64_t seed) : image_(image), cat_(scan(image)), rng_(seed) {}

  CorruptionRecord apply(CorruptionKind kind) {
    switch (kind) {
      case CorruptionKind::BitmapBlockFlip: return bitmap_block_flip();
      case CorruptionKind::BitmapInodeFlip: return bitmap_inode_flip();
      case CorruptionKind::InodeBadMode:
      case CorruptionKind::InodeBadPointer:
      case CorruptionKind::InodeBadLinks:
      case CorruptionKind::InodeBadChecksum: return inode_kind(kind);
      case CorruptionKind::DirentBadInode:
      case CorruptionKind::DirentBadRecLen:
      case CorruptionKind::OrphanDirectory: return dirent_kind(kind);
      case CorruptionKind::DirBlockBadChecksum: return dir_checksum();
      case CorruptionKind::DuplicateBlockClaim: return duplicate_claim();
    }
    throw Error(Errc::InvalidArgument, "unknown corruption kind");
  }

 private:
  /// Probes candidates 0..n-1 starting at a random index; returns the first accepted.
  template <typename Pred>
  std::optional<std::uint64_t> pick(std::uint64_t n, Pred ok) {
    if (n == 0) return std::nullopt;
    const std::uint64_t start = rng_.below(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t idx = (start + i) % n;
      if (ok(idx)) return idx;
    }
    return std::nullopt;
  }

  [[noreturn]] static void none(CorruptionKind k) {
    throw Error(Errc::NoEligibleTarget, "no eligible target left for " + std::string(to_string(k)));
  }

  CorruptionRecord record_bytes(CorruptionKind kind, std::uint64_t block, std::uint32_t off, std::uint32_t len) {
    CorruptionRecord r;
    r.kind = kind;
    r.at_block = block;
    r.at_offset = off;
    const Block b = image_.read_block(block);
    r.original.assign(b.begin() + off, b.begin() + off + len);
    return r;
  }

  void commit(CorruptionRecord& r, const Block& updated) {
    r.corrupted.assign(updated.begin() + r.at_offset, updated.begin() + r.at_offset + r.original.size());
    image_.write_block(r.at_block, updated);
  }

  CorruptionRecord bitmap_block_flip() {
    const Superblock& sb = cat_.sb;
    const std::uint64_t span = sb.total_blocks - sb.first_data_block;
    auto idx = pick(span, [&](std::uint64_t i) {
      const std::uint64_t b = sb.first_data_block + i;
      const std::uint64_t owner = cat_.owner[b];
      return res_.byte_free(sb.block_bitmap_start + b / kBitsPerBitmapBlock,
                            static_cast<std::uint32_t>((b % kBitsPerBitmapBlock) / 8)) &&
             (owner == 0 || res_.inode_free(owner));
    });
    if (!idx) none(CorruptionKind::BitmapBlockFlip);
    const std::uint64_t b = sb.first_data_block + *idx;
    return flip_bit(CorruptionKind::BitmapBlockFlip, sb.block_bitmap_start, b, [&](CorruptionRecord& r) {
      r.block = b;
      if (cat_.owner[b] != 0) res_.take_inode(cat_.owner[b]);
    });
  }

  CorruptionRecord bitmap_inode_flip() {
    const Superblock& sb = cat_.sb;
    const std::uint64_t span = sb.total_inodes - kFirstUserInode;
    auto idx = pick(span, [&](std::uint64_t i) {
      const std::uint64_t ino = kFirstUserInode + i;
      return res_.byte_free(sb.inode_bitmap_start + ino / kBitsPerBitmapBlock,
                            static_cast<std::uint32_t>((ino % kBitsPerBitmapBlock) / 8)) &&
             res_.inode_free(ino);
    });
    if (!idx) none(CorruptionKind::BitmapInodeFlip);
    const std::uint64_t ino = kFirstUserInode + *idx;
    return flip_bit(CorruptionKind::BitmapInodeFlip, sb.inode_bitmap_start, ino, [&](CorruptionRecord& r) {
      r.inode = ino;
      res_.take_inode(ino);
    });
  }

  template <typename Fill>
  CorruptionRecord flip_bit(CorruptionKind kind, std::uint64_t region, std::uint64_t bit, Fill fill) {
    const std::uint64_t blk = region + bit / kBitsPerBitmapBlock;
    const auto off = static_cast<std::uint32_t>((bit % kBitsPerBitmapBlock) / 8);
    CorruptionRecord r = record_bytes(kind, blk, off, 1);
    Block b = image_.read_block(blk);
    b[off] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    res_.take_byte(blk, off);
    fill(r);
    commit(r, b);
    return r;
  }

  CorruptionRecord inode_kind(CorruptionKind kind) {
    const auto& inodes = cat_.inodes;
    auto idx = pick(inodes.size(), [&](std::uint64_t i) {
      const InodeInfo& info = inodes[i];
      if (info.ino < kFirstUserInode || !res_.inode_free(info.ino)) return false;
      if (kind == CorruptionKind::InodeBadPointer)
        return std::any_of(info.direct_blocks.begin(), info.direct_blocks.end(), [](std::uint64_t b) { return b != 0; });
      return true;
    });
    if (!idx) none(kind);
    const InodeInfo& info = inodes[*idx];
    const Superblock& sb = cat_.sb;
    const std::uint64_t blk = sb.inode_block(info.ino);
    const std::uint32_t off = sb.inode_offset(info.ino);
    CorruptionRecord r = record_bytes(kind, blk, off, kInodeSize);
    r.inode = info.ino;
    Block b = image_.read_block(blk);
    const auto raw = std::span(b).subspan(off, kInodeSize);
    Inode in = Inode::decode(raw);
    switch (kind) {
      case CorruptionKind::InodeBadMode: {
        // Type nibbles that are not dir, regular or symlink.
        static constexpr std::array<std::uint16_t, 6> kBad = {0x1000, 0x2000, 0x3000, 0x6000, 0xC000, 0xF000};
        in.mode = static_cast<std::uint16_t>(kBad[rng_.below(kBad.size())] | (in.mode & mode::kPermMask));
        in.encode(raw);  // checksum left stale
        break;
      }
      case CorruptionKind::InodeBadPointer: {
        std::vector<std::uint32_t> slots;
        for (std::uint32_t s = 0; s < kDirectPointers; ++s)
          if (info.direct_blocks[s] != 0) slots.push_back(s);
        const std::uint32_t slot = slots[rng_.below(slots.size())];
        in.direct[slot] = sb.total_blocks + 1 + rng_.below(1u << 20);
        r.block = in.direct[slot];
        r.offset = slot;
        in.seal();
        in.encode(raw);
        break;
      }
      case CorruptionKind::InodeBadLinks:
        in.links_count = static_cast<std::uint16_t>(in.links_count + 7 + rng_.below(50));
        in.seal();
        in.encode(raw);
        break;
      default: {  // InodeBadChecksum
        const std::uint32_t pos = off + Inode::kChecksumOffset + static_cast<std::uint32_t>(rng_.below(4));
        b[pos] ^= static_cast<std::uint8_t>(1 + rng_.below(255));
        break;
      }
    }
    res_.take_inode(info.ino);
    commit(r, b);
    return r;
  }

  bool dir_block_ok(std::uint64_t dir, std::uint64_t block) const {
    return res_.dir_guardable(dir) && res_.block_free(block);
  }

  CorruptionRecord dirent_kind(CorruptionKind kind) {
    const auto& ds = cat_.dirents;
    auto idx = pick(ds.size(), [&](std::uint64_t i) {
      const DirentInfo& d = ds[i];
      if (d.protected_entry || !dir_block_ok(d.dir, d.block)) return false;
      if (kind == CorruptionKind::OrphanDirectory) {
        const InodeInfo* t = cat_.find(d.target);
        if (t == nullptr || !t->inode.is_dir()) return false;
      }
      if (kind == CorruptionKind::DirentBadRecLen) {
        for (std::size_t j = i; j < d.block_end; ++j)
          if (ds[j].target < kFirstUserInode || !res_.inode_free(ds[j].target)) return false;
        return true;
      }
      return res_.inode_free(d.target);
    });
    if (!idx) none(kind);
    const DirentInfo& d = ds[*idx];

    std::uint64_t free_ino = 0;
    if (kind == CorruptionKind::DirentBadInode) {
      const std::uint64_t span = cat_.sb.total_inodes - kFirstUserInode;
      auto f = pick(span, [&](std::uint64_t i) {
        const std::uint64_t ino = kFirstUserInode + i;
        return !cat_.in_use[ino] && res_.inode_free(ino);
      });
      if (!f) none(kind);
      free_ino = kFirstUserInode + *f;
    }

    CorruptionRecord r = record_bytes(kind, d.block, 0, kBlockSize);
    r.inode = d.dir;
    r.block = d.block;
    r.offset = d.offset;
    Block b = image_.read_block(d.block);
    std::uint8_t* p = b.data() + d.offset;
    switch (kind) {
      case CorruptionKind::DirentBadInode:
        le::store<std::uint64_t>(p, free_ino);
        r.aux = d.target;
        res_.take_inode(d.target);
        res_.take_inode(free_ino);
        break;
      case CorruptionKind::OrphanDirectory:
        le::store<std::uint64_t>(p, 0);
        r.aux = d.target;
        res_.take_inode(d.target);
        break;
      default: {  // DirentBadRecLen
        const std::uint16_t rec_len = le::load16(p + 8);
        const std::array<std::uint16_t, 3> bad = {6, static_cast<std::uint16_t>(rec_len + 2),
                                                  static_cast<std::uint16_t>(kBlockSize)};
        le::store<std::uint16_t>(p + 8, bad[rng_.below(bad.size())]);
        for (std::size_t j = *idx; j < d.block_end; ++j) res_.take_inode(ds[j].target);
        break;
      }
    }
    seal_dir_block(b);
    res_.guard_dir(d.dir);
    res_.take_block(d.block);
    commit(r, b);
    return r;
  }

  CorruptionRecord dir_checksum() {
    const auto& blocks = cat_.dir_blocks;
    auto idx = pick(blocks.size(), [&](std::uint64_t i) { return dir_block_ok(blocks[i].first, blocks[i].second); });
    if (!idx) none(CorruptionKind::DirBlockBadChecksum);
    const auto [dir, block] = blocks[*idx];
    CorruptionRecord r = record_bytes(CorruptionKind::DirBlockBadChecksum, block, 0, kBlockSize);
    r.inode = dir;
    r.block = block;
    r.offset = kDirTailOffset;
    Block b = image_.read_block(block);
    b[kDirTailOffset + 4 + rng_.below(4)] ^= static_cast<std::uint8_t>(1 + rng_.below(255));
    res_.guard_dir(dir);
    res_.take_block(block);
    commit(r, b);
    return r;
  }

  CorruptionRecord duplicate_claim() {
    const auto& inodes = cat_.inodes;
    auto has_direct = [](const InodeInfo& i) {
      return std::any_of(i.direct_blocks.begin(), i.direct_blocks.end(), [](std::uint64_t b) { return b != 0; });
    };
    auto eligible = [&](const InodeInfo& i) {
      return i.ino >= kFirstUserInode && i.inode.is_regular() && has_direct(i) && res_.inode_free(i.ino);
    };
    auto a_idx = pick(inodes.size(), [&](std::uint64_t i) { return eligible(inodes[i]); });
    if (!a_idx) none(CorruptionKind::DuplicateBlockClaim);
    const InodeInfo& a = inodes[*a_idx];
    auto b_idx = pick(inodes.size(), [&](std::uint64_t i) { return inodes[i].ino != a.ino && eligible(inodes[i]); });
    if (!b_idx) none(CorruptionKind::DuplicateBlockClaim);
    const InodeInfo& bi = inodes[*b_idx];

    std::vector<std::uint32_t> a_slots;
    for (std::uint32_t s = 0; s < kDirectPointers; ++s)
      if (a.direct_blocks[s] != 0) a_slots.push_back(s);
    std::vector<std::uint64_t> b_blocks;
    for (std::uint64_t blk : bi.direct_blocks)
      if (blk != 0) b_blocks.push_back(blk);
    const std::uint32_t slot = a_slots[rng_.below(a_slots.size())];
    const std::uint64_t stolen = b_blocks[rng_.below(b_blocks.size())];

    const Superblock& sb = cat_.sb;
    const std::uint64_t blk = sb.inode_block(a.ino);
    const std::uint32_t off = sb.inode_offset(a.ino);
    CorruptionRecord r = record_bytes(CorruptionKind::DuplicateBlockClaim, blk, off, kInodeSize);
    r.inode = a.ino;
    r.offset = slot;
    r.block = stolen;
    r.aux = bi.ino;
    Block b = image_.read_block(blk);
    const auto raw = std::span(b).subspan(off, kInodeSize);
    Inode in = Inode::decode(raw);
    in.direct[slot] = stolen;
    in.seal();
    in.encode(raw);
    res_.take_inode(a.ino);
    res_.take_inode(bi.ino);
    commit(r, b);
    return r;
  }

  Image& image_;
  Catalog cat_;
  Rng rng_;
  Reservations res_;
};

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t v : bytes) {
    out += kDigits[v >> 4];
    out += kDigits[v & 15];
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) throw Error(Errc::InvalidArgument, "ledger: odd hex length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(Errc::InvalidArgument, "ledger: bad hex digit");
  };
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
  return out;
}

template <typename T>
T parse_num(std::string_view s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw Error(Errc::InvalidArgument, std::string(what) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view to_string(CorruptionKind k) noexcept { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<CorruptionKind> parse_corruption_kind(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<CorruptionKind>(i);
  return std::nullopt;
}

FindingCode expected_code(CorruptionKind k) noexcept {
  switch (k) {
    case CorruptionKind::BitmapBlockFlip: return FindingCode::BlockBitmapMismatch;
    case CorruptionKind::BitmapInodeFlip: return FindingCode::InodeBitmapMismatch;
    case CorruptionKind::InodeBadMode: return FindingCode::BadMode;
    case CorruptionKind::InodeBadPointer: return FindingCode::PointerOutOfRange;
    case CorruptionKind::InodeBadLinks: return FindingCode::WrongLinksCount;
    case CorruptionKind::InodeBadChecksum: return FindingCode::BadInodeChecksum;
    case CorruptionKind::DirentBadInode: return FindingCode::DanglingDirent;
    case CorruptionKind::DirentBadRecLen: return FindingCode::BadDirent;
    case CorruptionKind::DirBlockBadChecksum: return FindingCode::BadDirChecksum;
    case CorruptionKind::DuplicateBlockClaim: return FindingCode::MultiplyClaimedBlock;
    case CorruptionKind::OrphanDirectory: return FindingCode::UnreachableDirectory;
  }
  return FindingCode::BadInodeChecksum;
}

bool finding_matches(const CorruptionRecord& r, const Finding& f) {
  if (f.code != expected_code(r.kind)) return false;
  switch (r.kind) {
    case CorruptionKind::BitmapBlockFlip: return f.block == r.block;
    case CorruptionKind::BitmapInodeFlip:
    case CorruptionKind::InodeBadMode:
    case CorruptionKind::InodeBadLinks:
    case CorruptionKind::InodeBadChecksum: return f.inode == r.inode;
    case CorruptionKind::InodeBadPointer: return f.inode == r.inode && f.offset == r.offset;
    case CorruptionKind::DirentBadInode:
    case CorruptionKind::DirentBadRecLen: return f.inode == r.inode && f.block == r.block && f.offset == r.offset;
    case CorruptionKind::DirBlockBadChecksum: return f.inode == r.inode && f.block == r.block;
    case CorruptionKind::DuplicateBlockClaim: return f.block == r.block && (f.inode == r.inode || f.inode == r.aux);
    case CorruptionKind::OrphanDirectory: return f.inode == r.aux;
  }
  return false;
}

CorruptionPlan parse_plan(std::string_view text) {
  CorruptionPlan plan;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const std::size_t colon = item.find(':');
    const auto kind = parse_corruption_kind(item.substr(0, colon));
    if (!kind) throw Error(Errc::InvalidArgument, "unknown corruption kind '" + std::string(item.substr(0, colon)) + "'");
    const std::uint32_t count =
        colon == std::string_view::npos ? 1 : parse_num<std::uint32_t>(item.substr(colon + 1), "plan");
    plan.push_back({*kind, count});
  }
  return plan;
}

CorruptionLedger inject_corruptions(Image& image, const CorruptionPlan& plan, std::uint64_t seed) {
  CorruptionLedger ledger;
  std::uint64_t total = 0;
  for (const PlanItem& p : plan) total += p.count;
  if (total == 0) return ledger;
  Injector inj(image, seed);
  for (const PlanItem& p : plan)
    for (std::uint32_t i = 0; i < p.count; ++i) ledger.records.push_back(inj.apply(p.kind));
  return ledger;
}

// ---------------------------------------------------------------------------

void CorruptionLedger::restore(Image& image) const {
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    image.write_bytes(it->at_block, it->at_offset, it->original);
}

bool CorruptionLedger::disjoint() const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;  // [first, last) absolute byte offsets
  for (const auto& r : records) {
    const std::uint64_t first = r.at_block * kBlockSize + r.at_offset;
    ranges.emplace_back(first, first + r.original.size());
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second) return false;
  return true;
}

void CorruptionLedger::write(std::ostream& os) const {
  os << "# sfs corruption ledger v1\n";
  for (const auto& r : records) {
    os << "kind=" << to_string(r.kind) << " inode=" << r.inode << " block=" << r.block << " offset=" << r.offset
       << " aux=" << r.aux << " at=" << r.at_block << ':' << r.at_offset << " orig=" << to_hex(r.original)
       << " new=" << to_hex(r.corrupted) << '\n';
  }
}

CorruptionLedger CorruptionLedger::read(std::istream& is) {
  CorruptionLedger ledger;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    CorruptionRecord r;
    std::istringstream fields(line);
    std::string tok;
    while (fields >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "ledger: malformed field '" + tok + "'");
      const std::string_view key = std::string_view(tok).substr(0, eq);
      const std::string_view val = std::string_view(tok).substr(eq + 1);
      if (key == "kind") {
        const auto k = parse_corruption_kind(val);
        if (!k) throw Error(Errc::InvalidArgument, "ledger: unknown kind '" + std::string(val) + "'");
        r.kind = *k;
      } else if (key == "inode") {
        r.inode = parse_num<std::uint64_t>(val, "ledger");
      } else if (key == "block") {
        r.block = parse_num<std::uint64_t>(val, "ledger");
      } else if (key == "offset") {
        r.offset = parse_num<std::uint32_t>(val, "ledger");
      } else if (key == "aux") {
        r.aux = parse_num<std::uint64_t>(val, "ledger");
      } else if (key == "at") {
        const auto colon = val.find(':');
        if (colon == std::string_view::npos) throw Error(Errc::InvalidArgument, "ledger: bad at= field");
        r.at_block = parse_num<std::uint64_t>(val.substr(0, colon), "ledger");
        r.at_offset = parse_num<std::uint32_t>(val.substr(colon + 1), "ledger");
      } else if (key == "orig") {
        r.original = from_hex(val);
      } else if (key == "new") {
        r.corrupted = from_hex(val);
      }
    }
    ledger.records.push_back(std::move(r));
  }
  return ledger;
}

}  // namespace sfs
