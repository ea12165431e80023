// SPDX-License-Identifier: Apache-2.0
#include "sfs/block_cache.hpp"

#include <algorithm>
#include <cstring>

#include "sfs/error.hpp"

namespace sfs {

BlockCache::BlockCache(const Image& image, CacheConfig cfg) : image_(image), cfg_(cfg) {
  cfg_.capacity_blocks = std::max<std::uint32_t>(cfg_.capacity_blocks, 1);
}

std::uint32_t BlockCache::readahead_for(ScanHint hint) const {
  std::uint32_t ra = 1;
  if (hint == ScanHint::InodeScan) ra = cfg_.readahead_inode_scan;
  if (hint == ScanHint::DirScan) ra = cfg_.readahead_dir_scan;
  return std::clamp<std::uint32_t>(ra, 1, cfg_.capacity_blocks);
}

void BlockCache::read(std::uint64_t block, ScanHint hint, MutableBlockView out) {
  if (block >= image_.total_blocks())
    throw Error(Errc::OutOfRange, "block " + std::to_string(block) + " beyond image");
  if (auto it = index_.find(block); it != index_.end()) {
    ++stats_.hits;
    lru_.splice(lru_.begin(), lru_, it->second);
    std::memcpy(out.data(), slab_.data() + std::size_t{it->second->slot} * kBlockSize, kBlockSize);
    return;
  }
  ++stats_.misses;
  const std::uint64_t n = std::min<std::uint64_t>(readahead_for(hint), image_.total_blocks() - block);
  scratch_.resize(n * kBlockSize);
  image_.read_blocks(block, n, scratch_);
  // Reverse order so the requested block ends up most recently used.
  for (std::uint64_t i = n; i-- > 0;) insert(block + i, scratch_.data() + i * kBlockSize);
  std::memcpy(out.data(), scratch_.data(), kBlockSize);
}

void BlockCache::insert(std::uint64_t block, const std::uint8_t* data) {
  if (auto it = index_.find(block); it != index_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    std::memcpy(slab_.data() + std::size_t{it->second->slot} * kBlockSize, data, kBlockSize);
    return;
  }
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else if (slots_used_ < cfg_.capacity_blocks) {
    slot = slots_used_++;
    if (slab_.size() < std::size_t{slots_used_} * kBlockSize)
      slab_.resize(std::min<std::size_t>(std::max<std::size_t>(slab_.size() * 2, 16 * kBlockSize),
                                         std::size_t{cfg_.capacity_blocks} * kBlockSize));
  } else {
    const Entry victim = lru_.back();
    lru_.pop_back();
    index_.erase(victim.block);
    slot = victim.slot;
    ++stats_.evictions;
  }
  std::memcpy(slab_.data() + std::size_t{slot} * kBlockSize, data, kBlockSize);
  lru_.push_front({block, slot});
  index_[block] = lru_.begin();
}

void BlockCache::invalidate(std::uint64_t block) {
  auto it = index_.find(block);
  if (it == index_.end()) return;
  free_slots_.push_back(it->second->slot);
  lru_.erase(it->second);
  index_.erase(it);
}

void BlockCache::invalidate_all() {
  for (const Entry& e : lru_) free_slots_.push_back(e.slot);
  lru_.clear();
  index_.clear();
}

}  // namespace sfs
