// SPDX-License-Identifier: Apache-2.0
#include "sfs/checker.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include "sfs/endian.hpp"
#include "sfs/error.hpp"

namespace sfs {
namespace {

Finding make(std::uint8_t pass, FindingCode code, std::uint64_t inode, std::uint64_t block, std::uint32_t offset,
             Repair repair, std::string detail = {}) {
  return Finding{pass, code, inode, block, offset, std::move(detail), repair};
}

std::string hex16(std::uint16_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%04x", v);
  return buf;
}

Inode read_inode(const Image& image, const Superblock& sb, std::uint64_t ino) {
  const Block b = image.read_block(sb.inode_block(ino));
  return Inode::decode(std::span(b).subspan(sb.inode_offset(ino), kInodeSize));
}

void write_inode(Image& image, const Superblock& sb, std::uint64_t ino, Inode in) {
  in.seal();
  std::array<std::uint8_t, kInodeSize> raw{};
  in.encode(raw);
  image.write_bytes(sb.inode_block(ino), sb.inode_offset(ino), raw);
}

void write_superblock(Image& image, Superblock& sb) {
  sb.seal();
  std::array<std::uint8_t, kSuperblockSize> raw{};
  sb.encode(raw);
  image.write_bytes(0, 0, raw);
}

bool is_dir_status(std::uint8_t s) { return s == static_cast<std::uint8_t>(FileType::Directory); }

/// Adds names to directories during passes 3 and 4, growing the directory by
/// one block when no existing block has room.
class Linker {
 public:
  Linker(CheckEnv& env, ShadowState& state) : env_(env), state_(state) {}

  bool add_entry(std::uint64_t dir, std::uint64_t ino, FileType type, const std::string& name) {
    if (!env_.in_use(dir) || !is_dir_status(env_.status[dir])) return false;
    std::vector<DbEntry> blocks;
    for (auto it = std::lower_bound(state_.db_list.begin(), state_.db_list.end(), DbEntry{dir, 0, 0});
         it != state_.db_list.end() && it->dir == dir; ++it)
      blocks.push_back(*it);
    std::sort(blocks.begin(), blocks.end(), [](const DbEntry& a, const DbEntry& b) { return a.logical < b.logical; });
    for (const DbEntry& e : blocks) {
      Block blk = env_.image.read_block(e.block);
      if (insert_dirent(blk, ino, type, name)) {
        seal_dir_block(blk);
        env_.image.write_block(e.block, blk);
        return true;
      }
    }
    return grow(dir, ino, type, name);
  }

 private:
  std::optional<std::uint64_t> allocate() {
    const Superblock& sb = env_.sb;
    for (std::uint64_t b = sb.first_data_block; b < sb.total_blocks; ++b) {
      if (state_.claimed_blocks.test(b)) continue;
      const std::uint64_t bm = sb.block_bitmap_start + b / kBitsPerBitmapBlock;
      const auto byte = static_cast<std::uint32_t>((b % kBitsPerBitmapBlock) / 8);
      Block bits = env_.image.read_block(bm);
      const auto mask = static_cast<std::uint8_t>(1u << (b % 8));
      if (bits[byte] & mask) continue;
      bits[byte] |= mask;
      env_.image.write_block(bm, bits);
      state_.claimed_blocks.set(b);
      if (env_.sb.free_blocks > 0) --env_.sb.free_blocks;
      write_superblock(env_.image, env_.sb);
      return b;
    }
    return std::nullopt;
  }

  bool grow(std::uint64_t dir, std::uint64_t ino, FileType type, const std::string& name) {
    const Superblock& sb = env_.sb;
    Inode in = read_inode(env_.image, sb, dir);
    std::uint64_t next = 0;
    for (std::size_t i = 0; i < kDirectPointers; ++i)
      if (in.direct[i] != 0) next = i + 1;
    Block ind{};
    if (in.indirect != 0) {
      ind = env_.image.read_block(in.indirect);
      for (std::size_t k = 0; k < kPointersPerIndirect; ++k)
        if (le::load64(ind.data() + k * 8) != 0) next = kDirectPointers + k + 1;
    }
    if (next >= kMaxFileBlocks) return false;
    if (next >= kDirectPointers && in.indirect == 0) {
      const auto ib = allocate();
      if (!ib) return false;
      in.indirect = *ib;
      ind.fill(0);
    }
    const auto nb = allocate();
    if (!nb) return false;

    DirBlockBuilder builder;
    builder.add(ino, type, name);
    env_.image.write_block(*nb, builder.finish());
    if (next < kDirectPointers) {
      in.direct[next] = *nb;
    } else {
      le::store<std::uint64_t>(ind.data() + (next - kDirectPointers) * 8, *nb);
      env_.image.write_block(in.indirect, ind);
    }
    in.size = std::max<std::uint64_t>(in.size, (next + 1) * kBlockSize);
    write_inode(env_.image, sb, dir, in);
    const DbEntry e{dir, *nb, next};
    state_.db_list.insert(std::upper_bound(state_.db_list.begin(), state_.db_list.end(), e), e);
    return true;
  }

  CheckEnv& env_;
  ShadowState& state_;
};

void rewrite_dotdot(Image& image, DotDotRecord& rec, std::uint64_t value) {
  Block blk = image.read_block(rec.block);
  le::store<std::uint64_t>(blk.data() + rec.offset, value);
  seal_dir_block(blk);
  image.write_block(rec.block, blk);
  rec.value = value;
}

}  // namespace

// ---------------------------------------------------------------------------

bool patch_less(const Patch& a, const Patch& b) {
  return std::tie(a.key, a.block, a.offset) < std::tie(b.key, b.block, b.offset);
}

std::vector<std::uint64_t> apply_patches(Image& image, std::vector<Patch>& patches) {
  std::sort(patches.begin(), patches.end(), patch_less);
  std::vector<std::uint64_t> written;
  for (const Patch& p : patches) {
    if (p.offset == 0 && p.bytes.size() == kBlockSize)
      image.write_block(p.block, BlockView(p.bytes.data(), kBlockSize));
    else
      image.write_bytes(p.block, p.offset, p.bytes);
    written.push_back(p.block);
  }
  std::sort(written.begin(), written.end());
  written.erase(std::unique(written.begin(), written.end()), written.end());
  return written;
}

ThreadContext::ThreadContext(unsigned worker, const CheckEnv& env, CacheConfig cache_cfg, ClaimTable* shared)
    : id(worker),
      claimed_blocks(shared ? 0 : env.sb.total_blocks),
      claimed_inodes(env.sb.total_inodes),
      shared_claims(shared),
      cache(env.image, cache_cfg) {}

void ThreadContext::claim_block(std::uint64_t b) {
  ++claims;
  const bool fresh = shared_claims ? shared_claims->claim(b) : !claimed_blocks.test_and_set(b);
  if (!fresh) repeat_claims.push_back(b);
}

DotDotRecord* ShadowState::find_dotdot(std::uint64_t dir) {
  auto it = std::lower_bound(dotdot.begin(), dotdot.end(), dir,
                             [](const DotDotRecord& r, std::uint64_t d) { return r.dir < d; });
  return it != dotdot.end() && it->dir == dir ? &*it : nullptr;
}

Superblock load_superblock(const Image& image) {
  if (image.total_blocks() == 0) throw Error(Errc::UnrecognizedImage, "image is shorter than one block");
  const Block b0 = image.read_block(0);
  const Superblock sb = Superblock::decode(b0);
  if (sb.magic != kMagic) throw Error(Errc::UnrecognizedImage, "bad superblock magic");
  if (!superblock_checksum_ok(b0)) throw Error(Errc::UnrecognizedImage, "superblock checksum mismatch");
  if (auto problem = sb.validate(image.total_blocks()))
    throw Error(Errc::UnrecognizedImage, "invalid superblock: " + *problem);
  return sb;
}

// ---------------------------------------------------------------------------
// Merge

ShadowState merge_contexts(std::span<ThreadContext* const> contexts, const Superblock& sb, Bitmap* shared_claims) {
  ShadowState st;
  st.claimed_blocks = shared_claims ? std::move(*shared_claims) : Bitmap(sb.total_blocks);
  st.claimed_inodes = Bitmap(sb.total_inodes);
  st.icount.assign(sb.total_inodes, 0);
  st.parent.assign(sb.total_inodes, 0);

  auto acc = st.claimed_blocks.words();
  for (ThreadContext* ctx : contexts) {
    if (!shared_claims) {
      const auto w = ctx->claimed_blocks.words();
      for (std::size_t i = 0; i < acc.size(); ++i) {
        std::uint64_t dup = acc[i] & w[i];
        while (dup != 0) {
          st.multi_claimed.push_back(i * 64 + static_cast<std::uint64_t>(std::countr_zero(dup)));
          dup &= dup - 1;
        }
        acc[i] |= w[i];
      }
    }
    auto in_acc = st.claimed_inodes.words();
    const auto in_w = ctx->claimed_inodes.words();
    for (std::size_t i = 0; i < in_acc.size(); ++i) in_acc[i] |= in_w[i];

    st.multi_claimed.insert(st.multi_claimed.end(), ctx->repeat_claims.begin(), ctx->repeat_claims.end());
    st.db_list.insert(st.db_list.end(), ctx->db.begin(), ctx->db.end());
    st.deferred.insert(st.deferred.end(), ctx->deferred.begin(), ctx->deferred.end());
    std::move(ctx->findings.begin(), ctx->findings.end(), std::back_inserter(st.findings));
    st.claims += ctx->claims;
    st.objects[0] += ctx->objects[0];

    ctx->repeat_claims.clear();
    ctx->db.clear();
    ctx->deferred.clear();
    ctx->findings.clear();
  }
  std::sort(st.multi_claimed.begin(), st.multi_claimed.end());
  st.multi_claimed.erase(std::unique(st.multi_claimed.begin(), st.multi_claimed.end()), st.multi_claimed.end());
  std::sort(st.db_list.begin(), st.db_list.end());
  std::sort(st.deferred.begin(), st.deferred.end());
  return st;
}

void merge_directory_results(ShadowState& st, std::span<ThreadContext* const> contexts) {
  std::vector<ParentCandidate> cands;
  for (ThreadContext* ctx : contexts) {
    for (std::uint64_t t : ctx->icount_log) ++st.icount[t];
    cands.insert(cands.end(), ctx->parents.begin(), ctx->parents.end());
    st.dotdot.insert(st.dotdot.end(), ctx->dotdots.begin(), ctx->dotdots.end());
    std::move(ctx->findings.begin(), ctx->findings.end(), std::back_inserter(st.findings));
    st.objects[1] += ctx->objects[1];
    ctx->icount_log.clear();
    ctx->parents.clear();
    ctx->dotdots.clear();
    ctx->findings.clear();
  }
  std::sort(cands.begin(), cands.end(), [](const ParentCandidate& a, const ParentCandidate& b) {
    return std::tuple(a.child, a.location()) < std::tuple(b.child, b.location());
  });
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (i == 0 || cands[i].child != cands[i - 1].child) st.parent[cands[i].child] = cands[i].dir;
  std::sort(st.dotdot.begin(), st.dotdot.end(),
            [](const DotDotRecord& a, const DotDotRecord& b) { return a.dir < b.dir; });
}

// ---------------------------------------------------------------------------
// Pass 1

void pass1_check_inode(CheckEnv& env, ThreadContext& ctx, std::uint64_t ino, std::span<const std::uint8_t> raw,
                       std::vector<Patch>& patches) {
  if (inode_bytes_free(raw)) return;
  const Superblock& sb = env.sb;
  Inode in = Inode::decode(raw);
  const bool sum_ok = inode_checksum_ok(raw);
  const std::uint64_t tblock = sb.inode_block(ino);
  const std::uint32_t toff = sb.inode_offset(ino);

  if (!in.valid_type()) {
    ctx.findings.push_back(make(1, FindingCode::BadMode, ino, 0, 0, Repair::ClearInode, "mode " + hex16(in.mode)));
    if (!sum_ok) ctx.findings.push_back(make(1, FindingCode::BadInodeChecksum, ino, 0, 0, Repair::ClearInode));
    patches.push_back({ctx.findings.back().key(), tblock, toff, std::vector<std::uint8_t>(kInodeSize, 0)});
    return;
  }

  std::optional<FindingKey> first_key;
  auto report = [&](Finding f) {
    if (!first_key) first_key = f.key();
    ctx.findings.push_back(std::move(f));
  };

  const bool dir = in.is_dir();
  if (!in.inline_target()) {
    long before = -1;  // highest mapped logical block as found
    long after = -1;   // highest mapped logical block after zeroing
    bool lost_indirect = false;
    for (std::uint32_t i = 0; i < kDirectPointers; ++i) {
      const std::uint64_t b = in.direct[i];
      if (b == 0) continue;
      before = i;
      if (!sb.data_block_in_range(b)) {
        report(make(1, FindingCode::PointerOutOfRange, ino, b, i, Repair::ZeroPointer, "direct pointer"));
        in.direct[i] = 0;
        continue;
      }
      after = i;
      ctx.claim_block(b);
      if (dir) ctx.db.push_back({ino, b, i});
    }
    if (in.indirect != 0) {
      const std::uint64_t ib = in.indirect;
      if (!sb.data_block_in_range(ib)) {
        report(make(1, FindingCode::PointerOutOfRange, ino, ib, kIndirectSlot, Repair::ZeroPointer,
                    "indirect pointer"));
        in.indirect = 0;
        lost_indirect = true;
      } else {
        ctx.claim_block(ib);
        const Block entries = ctx.cache.read(ib, ScanHint::Single);
        for (std::uint32_t k = 0; k < kPointersPerIndirect; ++k) {
          const std::uint64_t b = le::load64(entries.data() + std::size_t{k} * 8);
          if (b == 0) continue;
          const long logical = static_cast<long>(kDirectPointers + k);
          before = logical;
          if (!sb.data_block_in_range(b)) {
            report(make(1, FindingCode::PointerOutOfRange, ino, b, kFirstIndirectEntrySlot + k, Repair::ZeroPointer,
                        "indirect entry"));
            ctx.deferred.push_back({ino, ib, k});
            continue;
          }
          after = logical;
          ctx.claim_block(b);
          if (dir) ctx.db.push_back({ino, b, static_cast<std::uint64_t>(logical)});
        }
      }
    }
    if (before > after || lost_indirect) {
      const std::uint64_t limit = static_cast<std::uint64_t>(after + 1) * kBlockSize;
      if (in.size > limit) in.size = limit;
    }
  }

  if (!sum_ok) report(make(1, FindingCode::BadInodeChecksum, ino, 0, 0, Repair::RecomputeChecksum));
  if (first_key) {
    in.seal();
    Patch p{*first_key, tblock, toff, std::vector<std::uint8_t>(kInodeSize)};
    in.encode(p.bytes);
    patches.push_back(std::move(p));
  }
  env.status[ino] = static_cast<std::uint8_t>(file_type_for_mode(in.mode));
  ctx.claimed_inodes.set(ino);
}

void pass1_check_range(CheckEnv& env, ThreadContext& ctx, std::uint64_t first, std::uint64_t count,
                       std::vector<Patch>& patches) {
  Block table{};
  std::uint64_t loaded = ~std::uint64_t{0};
  const std::uint64_t end = std::min(first + count, env.sb.total_inodes);
  for (std::uint64_t ino = std::max(first, kRootInode); ino < end; ++ino) {
    const std::uint64_t tb = env.sb.inode_block(ino);
    if (tb != loaded) {
      ctx.cache.read(tb, ScanHint::InodeScan, table);
      loaded = tb;
    }
    pass1_check_inode(env, ctx, ino, std::span(table).subspan(env.sb.inode_offset(ino), kInodeSize), patches);
    ++ctx.objects[0];
  }
}

std::vector<std::uint64_t> resolve_multiclaims(CheckEnv& env, ShadowState& st) {
  const Superblock& sb = env.sb;
  std::vector<std::uint64_t> written;
  std::set<std::uint64_t> losing_indirect;  // inodes whose indirect pointer is zeroed here

  if (!st.multi_claimed.empty()) {
    const auto& dup = st.multi_claimed;
    auto is_dup = [&](std::uint64_t b) { return std::binary_search(dup.begin(), dup.end(), b); };

    struct Claimant {
      std::uint64_t ino;
      std::uint32_t slot;
      auto operator<=>(const Claimant&) const = default;
    };
    std::map<std::uint64_t, std::vector<Claimant>> claimants;

    Block table{};
    std::uint64_t loaded = ~std::uint64_t{0};
    for (std::uint64_t ino = kRootInode; ino < sb.total_inodes; ++ino) {
      if (!env.in_use(ino)) continue;
      if (sb.inode_block(ino) != loaded) {
        loaded = sb.inode_block(ino);
        env.image.read_block(loaded, table);
      }
      const Inode in = Inode::decode(std::span(table).subspan(sb.inode_offset(ino), kInodeSize));
      if (in.inline_target()) continue;
      for (std::uint32_t i = 0; i < kDirectPointers; ++i)
        if (in.direct[i] != 0 && is_dup(in.direct[i])) claimants[in.direct[i]].push_back({ino, i});
      if (in.indirect == 0) continue;
      if (is_dup(in.indirect)) claimants[in.indirect].push_back({ino, kIndirectSlot});
      const Block entries = env.image.read_block(in.indirect);
      for (std::uint32_t k = 0; k < kPointersPerIndirect; ++k) {
        const std::uint64_t b = le::load64(entries.data() + std::size_t{k} * 8);
        if (b != 0 && sb.data_block_in_range(b) && is_dup(b))
          claimants[b].push_back({ino, kFirstIndirectEntrySlot + k});
      }
    }
    for (auto& [b, list] : claimants) std::sort(list.begin(), list.end());

    // A losing indirect pointer takes its entries' claims with it, which can
    // change the keeper of other blocks; iterate until stable.
    for (bool changed = true; changed;) {
      changed = false;
      for (auto& [b, list] : claimants) {
        for (std::size_t i = 1; i < list.size(); ++i) {
          const Claimant c = list[i];
          if (c.slot != kIndirectSlot || !losing_indirect.insert(c.ino).second) continue;
          changed = true;
          const Block entries = env.image.read_block(b);
          for (std::uint32_t k = 0; k < kPointersPerIndirect; ++k) {
            const std::uint64_t e = le::load64(entries.data() + std::size_t{k} * 8);
            if (e == 0 || !sb.data_block_in_range(e)) continue;
            auto it = claimants.find(e);
            if (it == claimants.end()) {
              st.claimed_blocks.reset(e);
              continue;
            }
            auto& l = it->second;
            l.erase(std::remove(l.begin(), l.end(), Claimant{c.ino, kFirstIndirectEntrySlot + k}), l.end());
            if (l.empty()) st.claimed_blocks.reset(e);
          }
        }
      }
    }

    std::map<std::uint64_t, Inode> inode_edits;
    std::map<std::uint64_t, Block> indirect_edits;
    std::vector<DbEntry> dropped;
    std::set<std::uint64_t> dropped_tail;  // directories losing every block from logical 10 on
    for (const auto& [b, list] : claimants) {
      for (std::size_t i = 1; i < list.size(); ++i) {
        const Claimant c = list[i];
        st.findings.push_back(make(1, FindingCode::MultiplyClaimedBlock, c.ino, b, c.slot, Repair::ZeroPointer,
                                   "also claimed by inode " + std::to_string(list[0].ino)));
        auto [it, fresh] = inode_edits.try_emplace(c.ino);
        if (fresh) it->second = read_inode(env.image, sb, c.ino);
        Inode& in = it->second;
        if (c.slot < kDirectPointers) {
          in.direct[c.slot] = 0;
          dropped.push_back({c.ino, b, c.slot});
        } else if (c.slot == kIndirectSlot) {
          in.indirect = 0;
          dropped_tail.insert(c.ino);
        } else {
          auto [bit, bfresh] = indirect_edits.try_emplace(in.indirect);
          if (bfresh) bit->second = env.image.read_block(in.indirect);
          le::store<std::uint64_t>(bit->second.data() + std::size_t{c.slot - kFirstIndirectEntrySlot} * 8, 0);
          dropped.push_back({c.ino, b, c.slot - 1});
        }
      }
    }
    for (auto& [ino, in] : inode_edits) {
      write_inode(env.image, sb, ino, in);
      written.push_back(sb.inode_block(ino));
    }
    for (auto& [blk, data] : indirect_edits) {
      env.image.write_block(blk, data);
      written.push_back(blk);
    }

    std::sort(dropped.begin(), dropped.end());
    std::erase_if(st.db_list, [&](const DbEntry& e) {
      return std::binary_search(dropped.begin(), dropped.end(), e) ||
             (e.logical >= kDirectPointers && dropped_tail.count(e.dir));
    });
  }

  std::map<std::uint64_t, Block> zeroed;
  for (const DeferredZero& d : st.deferred) {
    if (losing_indirect.count(d.inode)) continue;
    auto [it, fresh] = zeroed.try_emplace(d.indirect);
    if (fresh) it->second = env.image.read_block(d.indirect);
    le::store<std::uint64_t>(it->second.data() + std::size_t{d.entry} * 8, 0);
  }
  for (auto& [blk, data] : zeroed) {
    env.image.write_block(blk, data);
    written.push_back(blk);
  }

  st.claimed_blocks.set_range(0, sb.first_data_block);
  st.claimed_inodes.set(0);
  if (sb.total_inodes > 1) st.claimed_inodes.set(1);
  std::sort(written.begin(), written.end());
  written.erase(std::unique(written.begin(), written.end()), written.end());
  return written;
}

// ---------------------------------------------------------------------------
// Pass 2

ParsedDirBlock parse_dir_block(ThreadContext& ctx, const DbEntry& where) {
  ParsedDirBlock p;
  p.where = where;
  Block blk;
  ctx.cache.read(where.block, ScanHint::DirScan, blk);
  p.tail_ok = dir_tail_ok(blk);
  const DirentScan scan = iterate_dirents(blk);
  p.malformed_at = scan.malformed_at;
  p.records.reserve(scan.records.size());
  for (const DirentRecord& r : scan.records) {
    ParsedDirent d;
    d.inode = r.entry.inode;
    d.offset = r.offset;
    d.rec_len = r.entry.rec_len;
    d.name_len = r.entry.name_len;
    d.file_type = r.entry.file_type;
    if (r.entry.name == ".") d.name = ParsedDirent::Name::Dot;
    if (r.entry.name == "..") d.name = ParsedDirent::Name::DotDot;
    p.records.push_back(d);
  }
  return p;
}

void certify_dir_block(const CheckEnv& env, ThreadContext& ctx, const ParsedDirBlock& parsed,
                       std::vector<Patch>& patches) {
  const std::uint64_t d = parsed.where.dir;
  const std::uint64_t b = parsed.where.block;
  const auto dirtype = static_cast<std::uint8_t>(FileType::Directory);
  ++ctx.objects[1];

  struct Rec {
    ParsedDirent e;
    bool header_dirty = false;
    const char* new_name = nullptr;
  };
  std::vector<Rec> recs;
  recs.reserve(parsed.records.size() + 1);
  for (const ParsedDirent& e : parsed.records) recs.push_back({e});
  bool dirty = false;
  std::optional<FindingKey> first_key;
  auto report = [&](Finding f) {
    if (!first_key || f.key() < *first_key) first_key = f.key();
    ctx.findings.push_back(std::move(f));
    dirty = true;
  };

  if (!parsed.tail_ok)
    report(make(2, FindingCode::BadDirChecksum, d, b, kDirTailOffset, Repair::RecomputeChecksum));
  if (parsed.malformed_at) {
    report(make(2, FindingCode::BadDirent, d, b, *parsed.malformed_at, Repair::TruncateDirBlock,
                "record breaks block tiling"));
    if (recs.empty()) {
      recs.push_back({ParsedDirent{0, 0, static_cast<std::uint16_t>(kDirTailOffset), 0, 0}, true});
    } else {
      recs.back().e.rec_len = static_cast<std::uint16_t>(kDirTailOffset - recs.back().e.offset);
      recs.back().header_dirty = true;
    }
  }

  // Grows recs[i] over its successors until it can hold a name of `len` bytes.
  auto absorb = [&](std::size_t i, std::size_t len) {
    while (recs[i].e.rec_len < dirent_min_len(len) && i + 1 < recs.size()) {
      recs[i].e.rec_len = static_cast<std::uint16_t>(recs[i].e.rec_len + recs[i + 1].e.rec_len);
      recs.erase(recs.begin() + static_cast<long>(i) + 1);
    }
  };

  std::size_t start = 0;
  if (parsed.where.logical == 0) {
    Rec& dot = recs[0];
    if (dot.e.name != ParsedDirent::Name::Dot) {
      report(make(2, FindingCode::BadDirent, d, b, 0, Repair::FixDot, "first entry is not '.'"));
      absorb(0, 1);
      recs[0].e = {d, 0, recs[0].e.rec_len, 1, dirtype, ParsedDirent::Name::Dot};
      recs[0].header_dirty = true;
      recs[0].new_name = ".";
    } else if (dot.e.inode != d || dot.e.file_type != dirtype) {
      report(make(2, FindingCode::BadDirent, d, b, 0, Repair::FixDot, "'.' names inode " + std::to_string(dot.e.inode)));
      dot.e.inode = d;
      dot.e.file_type = dirtype;
      dot.header_dirty = true;
    }

    if (recs.size() < 2) {
      // Split "." to make room for "..".
      const std::uint32_t dot_len = dirent_min_len(1);
      Rec dd{{kRootInode, dot_len, static_cast<std::uint16_t>(recs[0].e.rec_len - dot_len), 2, dirtype,
              ParsedDirent::Name::DotDot},
             true, ".."};
      report(make(2, FindingCode::BadDirent, d, b, dot_len, Repair::RewriteDotDot, "missing '..'"));
      recs[0].e.rec_len = static_cast<std::uint16_t>(dot_len);
      recs[0].header_dirty = true;
      recs.push_back(dd);
    } else if (recs[1].e.name != ParsedDirent::Name::DotDot) {
      report(make(2, FindingCode::BadDirent, d, b, recs[1].e.offset, Repair::RewriteDotDot,
                  "second entry is not '..'"));
      absorb(1, 2);
      recs[1].e = {kRootInode, recs[1].e.offset, recs[1].e.rec_len, 2, dirtype, ParsedDirent::Name::DotDot};
      recs[1].header_dirty = true;
      recs[1].new_name = "..";
    } else if (recs[1].e.file_type != dirtype) {
      report(make(2, FindingCode::BadDirent, d, b, recs[1].e.offset, Repair::FixFileType, "'..' file type"));
      recs[1].e.file_type = dirtype;
      recs[1].header_dirty = true;
    }
    ctx.dotdots.push_back({d, b, recs[1].e.offset, recs[1].e.inode});
    start = 2;
  }

  std::vector<bool> removed(recs.size(), false);
  long prev = start == 0 ? -1 : static_cast<long>(start) - 1;
  for (std::size_t i = start; i < recs.size(); ++i) {
    ParsedDirent& e = recs[i].e;
    if (e.inode == 0) {
      prev = static_cast<long>(i);
      continue;
    }
    const std::uint32_t off = e.offset;
    std::optional<Finding> clear;
    if (e.name != ParsedDirent::Name::Normal || e.name_len == 0) {
      clear = make(2, FindingCode::BadDirent, d, b, off, Repair::ClearDirent, "misplaced or empty name");
    } else if (e.inode < kRootInode || e.inode >= env.sb.total_inodes) {
      clear = make(2, FindingCode::DanglingDirent, d, b, off, Repair::ClearDirent,
                   "inode " + std::to_string(e.inode) + " out of range");
    } else if (!env.in_use(e.inode)) {
      clear = make(2, FindingCode::DanglingDirent, d, b, off, Repair::ClearDirent,
                   "inode " + std::to_string(e.inode) + " not in use");
    } else if (e.inode == kRootInode || e.inode == d) {
      clear = make(2, FindingCode::BadDirent, d, b, off, Repair::ClearDirent,
                   e.inode == d ? "entry names its own directory" : "entry names the root");
    }
    if (clear) {
      report(std::move(*clear));
      if (prev >= 0) {
        Rec& p = recs[static_cast<std::size_t>(prev)];
        p.e.rec_len = static_cast<std::uint16_t>(e.offset + e.rec_len - p.e.offset);
        p.header_dirty = true;
        removed[i] = true;
      } else {
        e.inode = 0;
        recs[i].header_dirty = true;
        prev = static_cast<long>(i);
      }
      continue;
    }
    const std::uint8_t want = env.status[e.inode];
    if (e.file_type != want) {
      report(make(2, FindingCode::BadDirent, d, b, off, Repair::FixFileType,
                  "file type " + std::to_string(e.file_type) + ", inode is " + std::to_string(want)));
      e.file_type = want;
      recs[i].header_dirty = true;
    }
    ctx.icount_log.push_back(e.inode);
    if (is_dir_status(want)) ctx.parents.push_back({e.inode, d, b, off});
    prev = static_cast<long>(i);
  }

  if (!dirty) return;
  Block blk;
  ctx.cache.read(b, ScanHint::DirScan, blk);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (removed[i] || !recs[i].header_dirty) continue;
    const ParsedDirent& e = recs[i].e;
    std::uint8_t* p = blk.data() + e.offset;
    le::store<std::uint64_t>(p, e.inode);
    le::store<std::uint16_t>(p + 8, e.rec_len);
    if (recs[i].new_name) {
      p[10] = e.name_len;
      std::memcpy(p + kDirentHeaderSize, recs[i].new_name, e.name_len);
    }
    p[11] = e.file_type;
  }
  seal_dir_block(blk);
  patches.push_back({*first_key, b, 0, std::vector<std::uint8_t>(blk.begin(), blk.end())});
}

std::vector<std::uint64_t> directories_with_dotdot(const ShadowState& st) {
  std::vector<std::uint64_t> dirs;
  for (const DbEntry& e : st.db_list)
    if (e.logical == 0 && (dirs.empty() || dirs.back() != e.dir)) dirs.push_back(e.dir);
  return dirs;
}

void pass2_verify_dotdot(const CheckEnv& env, ShadowState& st, std::uint64_t dir, std::vector<Finding>& findings,
                         std::vector<Patch>& patches) {
  DotDotRecord* rec = st.find_dotdot(dir);
  if (rec == nullptr) {
    const bool known = std::any_of(st.db_list.begin(), st.db_list.end(),
                                   [&](const DbEntry& e) { return e.dir == dir && e.logical == 0; });
    if (known)
      throw Error(Errc::MissingParentRecord, "'..' of directory " + std::to_string(dir) + " checked before its block");
    return;
  }
  const std::uint64_t expected = dir == kRootInode ? kRootInode : st.parent[dir];
  if (expected == 0 || rec->value == expected) return;
  Finding f = make(2, FindingCode::DotDotMismatch, dir, rec->block, rec->offset, Repair::RewriteDotDot,
                   "'..' names " + std::to_string(rec->value) + ", parent is " + std::to_string(expected));
  Block blk = env.image.read_block(rec->block);
  le::store<std::uint64_t>(blk.data() + rec->offset, expected);
  seal_dir_block(blk);
  patches.push_back({f.key(), rec->block, 0, std::vector<std::uint8_t>(blk.begin(), blk.end())});
  findings.push_back(std::move(f));
  rec->value = expected;
}

// ---------------------------------------------------------------------------
// Passes 3 and 4

void pass3_connectivity(CheckEnv& env, ShadowState& st) {
  const std::uint64_t n = env.sb.total_inodes;
  std::vector<std::vector<std::uint64_t>> children(n);
  std::vector<std::uint64_t> dirs;
  for (std::uint64_t ino = kRootInode; ino < n; ++ino) {
    if (!is_dir_status(env.status[ino])) continue;
    dirs.push_back(ino);
    if (ino != kRootInode && st.parent[ino] != 0) children[st.parent[ino]].push_back(ino);
  }
  st.objects[2] += dirs.size();

  std::vector<bool> reached(n, false);
  if (is_dir_status(env.status[kRootInode])) {
    std::vector<std::uint64_t> stack{kRootInode};
    reached[kRootInode] = true;
    while (!stack.empty()) {
      const std::uint64_t x = stack.back();
      stack.pop_back();
      for (std::uint64_t c : children[x])
        if (!reached[c]) {
          reached[c] = true;
          stack.push_back(c);
        }
    }
  }

  Linker linker(env, st);
  auto reconnect = [&](std::uint64_t ino, std::uint64_t into, const std::string& name) {
    if (!linker.add_entry(into, ino, FileType::Directory, name)) return false;
    if (DotDotRecord* rec = st.find_dotdot(ino); rec && rec->value != into) rewrite_dotdot(env.image, *rec, into);
    st.parent[ino] = into;
    ++st.icount[ino];
    return true;
  };

  if (is_dir_status(env.status[kLostFoundInode]) && !reached[kLostFoundInode]) {
    const bool ok = reconnect(kLostFoundInode, kRootInode, "lost+found");
    st.findings.push_back(make(3, FindingCode::UnreachableDirectory, kLostFoundInode, 0, 0,
                               ok ? Repair::ReconnectToLostFound : Repair::NotRepaired, "linked into root"));
  }
  for (std::uint64_t ino : dirs) {
    if (ino == kRootInode || ino == kLostFoundInode || reached[ino]) continue;
    const bool ok = reconnect(ino, kLostFoundInode, "#" + std::to_string(ino));
    st.findings.push_back(make(3, FindingCode::UnreachableDirectory, ino, 0, 0,
                               ok ? Repair::ReconnectToLostFound : Repair::NotRepaired));
  }
}

void pass4_refcounts(CheckEnv& env, ShadowState& st) {
  const Superblock& sb = env.sb;
  const std::uint64_t n = sb.total_inodes;
  Linker linker(env, st);
  for (std::uint64_t ino = kRootInode; ino < n; ++ino) {
    if (!env.in_use(ino) || st.icount[ino] != 0 || ino == kRootInode || ino == kLostFoundInode) continue;
    const auto type = static_cast<FileType>(env.status[ino]);
    const bool ok = linker.add_entry(kLostFoundInode, ino, type, "#" + std::to_string(ino));
    st.findings.push_back(make(4, FindingCode::ZeroLinkInUse, ino, 0, 0,
                               ok ? Repair::ReconnectToLostFound : Repair::NotRepaired, "no directory entry"));
    if (!ok) continue;
    st.icount[ino] = 1;
    if (type == FileType::Directory) {
      if (DotDotRecord* rec = st.find_dotdot(ino); rec && rec->value != kLostFoundInode)
        rewrite_dotdot(env.image, *rec, kLostFoundInode);
      st.parent[ino] = kLostFoundInode;
    }
  }

  std::vector<std::uint32_t> subdirs(n, 0);
  for (const DotDotRecord& r : st.dotdot)
    if (is_dir_status(env.status[r.dir]) && r.value < n) ++subdirs[r.value];

  Block table{};
  std::uint64_t loaded = ~std::uint64_t{0};
  for (std::uint64_t ino = kRootInode; ino < n; ++ino) {
    if (!env.in_use(ino)) continue;
    ++st.objects[3];
    if (sb.inode_block(ino) != loaded) {
      loaded = sb.inode_block(ino);
      env.image.read_block(loaded, table);
    }
    const auto raw = std::span(table).subspan(sb.inode_offset(ino), kInodeSize);
    Inode in = Inode::decode(raw);
    std::uint64_t expected = st.icount[ino];
    if (is_dir_status(env.status[ino])) expected += 1 + subdirs[ino];
    expected = std::min<std::uint64_t>(expected, 0xFFFF);
    if (in.links_count == expected) continue;
    st.findings.push_back(make(4, FindingCode::WrongLinksCount, ino, 0, 0, Repair::SetLinksCount,
                               "links_count " + std::to_string(in.links_count) + ", counted " +
                                   std::to_string(expected)));
    in.links_count = static_cast<std::uint16_t>(expected);
    in.seal();
    in.encode(raw);
    env.image.write_block(loaded, table);
  }
}

// ---------------------------------------------------------------------------
// Pass 5

BitmapCompare pass5_compare_block(const CheckEnv& env, const ShadowState& st, BitmapKind kind, std::uint32_t index) {
  const Superblock& sb = env.sb;
  const bool blocks = kind == BitmapKind::Blocks;
  const Bitmap& want = blocks ? st.claimed_blocks : st.claimed_inodes;
  const std::uint64_t total = blocks ? sb.total_blocks : sb.total_inodes;
  BitmapCompare out;
  out.block = (blocks ? sb.block_bitmap_start : sb.inode_bitmap_start) + index;
  Block disk = env.image.read_block(out.block);
  Block fixed = disk;
  const std::uint64_t base = std::uint64_t{index} * kBitsPerBitmapBlock;
  if (base >= total) return out;
  const std::uint64_t limit = std::min(total - base, kBitsPerBitmapBlock);
  bool changed = false;
  for (std::uint64_t byte = 0; byte * 8 < limit; ++byte) {
    const std::uint64_t bits = std::min<std::uint64_t>(8, limit - byte * 8);
    const auto mask = static_cast<std::uint8_t>((1u << bits) - 1);
    std::uint8_t w = 0;
    for (std::uint64_t k = 0; k < bits; ++k)
      if (want.test(base + byte * 8 + k)) w |= static_cast<std::uint8_t>(1u << k);
    const std::uint8_t diff = static_cast<std::uint8_t>((disk[byte] ^ w) & mask);
    if (diff == 0) continue;
    for (std::uint64_t k = 0; k < bits; ++k) {
      if (!(diff & (1u << k))) continue;
      const std::uint64_t i = base + byte * 8 + k;
      const Repair r = (w >> k) & 1 ? Repair::SetBitmapBit : Repair::ClearBitmapBit;
      out.findings.push_back(blocks ? make(5, FindingCode::BlockBitmapMismatch, 0, i, 0, r)
                                    : make(5, FindingCode::InodeBitmapMismatch, i, 0, 0, r));
    }
    fixed[byte] = static_cast<std::uint8_t>((disk[byte] & ~mask) | w);
    changed = true;
  }
  if (changed) out.rewrite = fixed;
  return out;
}

void pass5_free_counts(CheckEnv& env, ShadowState& st) {
  Superblock& sb = env.sb;
  st.objects[4] += sb.total_blocks + sb.total_inodes;
  const std::uint64_t free_blocks = sb.total_blocks - st.claimed_blocks.count();
  const std::uint64_t free_inodes = sb.total_inodes - st.claimed_inodes.count();
  bool dirty = false;
  if (sb.free_blocks != free_blocks) {
    st.findings.push_back(make(5, FindingCode::FreeCountMismatch, 0, 0, Superblock::kFreeBlocksOffset,
                               Repair::RewriteSuperblockCount,
                               "free_blocks " + std::to_string(sb.free_blocks) + ", counted " +
                                   std::to_string(free_blocks)));
    sb.free_blocks = free_blocks;
    dirty = true;
  }
  if (sb.free_inodes != free_inodes) {
    st.findings.push_back(make(5, FindingCode::FreeCountMismatch, 0, 0, Superblock::kFreeInodesOffset,
                               Repair::RewriteSuperblockCount,
                               "free_inodes " + std::to_string(sb.free_inodes) + ", counted " +
                                   std::to_string(free_inodes)));
    sb.free_inodes = free_inodes;
    dirty = true;
  }
  if (dirty) write_superblock(env.image, sb);
}

// ---------------------------------------------------------------------------

Report finish_report(ShadowState& st) {
  Report r;
  r.findings = std::move(st.findings);
  r.canonicalize();
  for (std::size_t p = 0; p < 5; ++p) r.passes[p].objects_checked = st.objects[p];
  r.counters["claims"] = st.claims;
  return r;
}

Report run_serial(Image& image, const CheckOptions& opts) {
  using Clock = std::chrono::steady_clock;
  std::array<double, 5> secs{};
  auto lap = [t = Clock::now()]() mutable {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  };

  CheckEnv env(image, load_superblock(image));
  ThreadContext ctx(0, env, opts.cache);
  ThreadContext* const ctxs[] = {&ctx};

  std::vector<Patch> patches;
  pass1_check_range(env, ctx, kRootInode, env.sb.total_inodes - kRootInode, patches);
  apply_patches(image, patches);
  patches.clear();
  ShadowState st = merge_contexts(ctxs, env.sb);
  resolve_multiclaims(env, st);
  ctx.cache.invalidate_all();
  secs[0] = lap();

  for (const DbEntry& e : st.db_list) {
    certify_dir_block(env, ctx, parse_dir_block(ctx, e), patches);
    for (std::uint64_t b : apply_patches(image, patches)) ctx.cache.invalidate(b);
    patches.clear();
  }
  merge_directory_results(st, ctxs);
  for (std::uint64_t dir : directories_with_dotdot(st)) pass2_verify_dotdot(env, st, dir, st.findings, patches);
  apply_patches(image, patches);
  patches.clear();
  secs[1] = lap();

  pass3_connectivity(env, st);
  secs[2] = lap();
  pass4_refcounts(env, st);
  secs[3] = lap();

  for (BitmapKind kind : {BitmapKind::Blocks, BitmapKind::Inodes}) {
    const std::uint32_t count = kind == BitmapKind::Blocks ? env.sb.block_bitmap_blocks : env.sb.inode_bitmap_blocks;
    for (std::uint32_t i = 0; i < count; ++i) {
      BitmapCompare c = pass5_compare_block(env, st, kind, i);
      std::move(c.findings.begin(), c.findings.end(), std::back_inserter(st.findings));
      if (c.rewrite) image.write_block(c.block, *c.rewrite);
    }
  }
  pass5_free_counts(env, st);
  secs[4] = lap();
  image.flush();

  Report r = finish_report(st);
  for (std::size_t p = 0; p < 5; ++p) r.passes[p].seconds = secs[p];
  const CacheStats cs = ctx.cache.stats();
  r.counters["cache.hits"] = cs.hits;
  r.counters["cache.misses"] = cs.misses;
  r.counters["cache.evictions"] = cs.evictions;
  return r;
}

}  // namespace sfs
