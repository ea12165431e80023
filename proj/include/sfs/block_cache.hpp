// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <list>
#include <unordered_map>
#include <vector>

#include "sfs/image.hpp"

namespace sfs {

enum class ScanHint : std::uint8_t { InodeScan, DirScan, Single };

struct CacheConfig {
  std::uint32_t capacity_blocks = 4096;
  std::uint32_t readahead_inode_scan = 16;
  std::uint32_t readahead_dir_scan = 8;
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;

  CacheStats& operator+=(const CacheStats& o) {
    hits += o.hits;
    misses += o.misses;
    evictions += o.evictions;
    return *this;
  }
  bool operator==(const CacheStats&) const = default;
};

/// LRU block cache owned by one thread. A miss reads the requested block and
/// the following readahead-1 blocks with one device read.
class BlockCache {
 public:
  BlockCache(const Image& image, CacheConfig cfg);

  void read(std::uint64_t block, ScanHint hint, MutableBlockView out);
  Block read(std::uint64_t block, ScanHint hint) {
    Block b;
    read(block, hint, b);
    return b;
  }

  void invalidate(std::uint64_t block);
  void invalidate_all();

  CacheStats stats() const { return stats_; }
  std::size_t size() const { return index_.size(); }
  const CacheConfig& config() const { return cfg_; }

 private:
  struct Entry {
    std::uint64_t block;
    std::uint32_t slot;
  };

  std::uint32_t readahead_for(ScanHint hint) const;
  void insert(std::uint64_t block, const std::uint8_t* data);

  const Image& image_;
  CacheConfig cfg_;
  std::vector<std::uint8_t> slab_;        // capacity * kBlockSize, grown on demand
  std::vector<std::uint32_t> free_slots_;
  std::uint32_t slots_used_ = 0;
  std::list<Entry> lru_;                  // front = most recent
  std::unordered_map<std::uint64_t, std::list<Entry>::iterator> index_;
  std::vector<std::uint8_t> scratch_;
  CacheStats stats_;
};

}  // namespace sfs
