// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "sfs/block_cache.hpp"
#include "sfs/endian.hpp"
#include "sfs/error.hpp"

using namespace sfs;

namespace {

Image numbered_image(std::uint64_t blocks) {
  Image img = Image::in_memory(blocks);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    Block data{};
    for (std::size_t i = 0; i < kBlockSize; i += 8) le::store<std::uint64_t>(data.data() + i, b * 131 + i);
    img.write_block(b, data);
  }
  return img;
}

}  // namespace

TEST_CASE("stats accounting") {
  Image img = numbered_image(64);
  BlockCache cache(img, {64, 16, 8});
  CHECK(cache.stats() == CacheStats{0, 0, 0});
  cache.read(3, ScanHint::Single);
  CHECK(cache.stats() == CacheStats{0, 1, 0});
  std::mt19937_64 gen(1);
  for (int i = 0; i < 500; ++i) cache.read(gen() % 64, i % 2 ? ScanHint::InodeScan : ScanHint::DirScan);
  const CacheStats s = cache.stats();
  CHECK(s.hits + s.misses == 501);
  CHECK_THROWS_AS(cache.read(64, ScanHint::Single), Error);
}

TEST_CASE("sequential inode-table scan with readahead 16") {
  Image img = numbered_image(1100);
  BlockCache cache(img, {4096, 16, 8});
  for (std::uint64_t b = 0; b < 1024; ++b) cache.read(b, ScanHint::InodeScan);
  // One miss opens each 16-block window; the other 15 reads hit.
  const std::uint64_t windows = 1024 / 16;
  CHECK(cache.stats().misses == windows);
  CHECK(cache.stats().hits == 1024 - windows);
  CHECK(double(cache.stats().hits) / 1024 >= 0.90);
}

TEST_CASE("capacity one thrashes") {
  Image img = numbered_image(16);
  BlockCache cache(img, {1, 1, 1});
  cache.read(5, ScanHint::Single);
  cache.read(6, ScanHint::Single);
  const CacheStats after_pair = cache.stats();
  for (int i = 0; i < 20; ++i) cache.read(i % 2 ? 6 : 5, ScanHint::Single);
  CHECK(cache.stats().hits == after_pair.hits);
  CHECK(cache.stats().hits == 0);
  CHECK(cache.stats().evictions == 21);
}

TEST_CASE("transparency, including after writes and invalidation") {
  Image img = numbered_image(256);
  BlockCache cache(img, {32, 16, 8});
  std::mt19937_64 gen(9);
  for (int i = 0; i < 5000; ++i) {
    const std::uint64_t b = gen() % 256;
    if (gen() % 10 == 0) {
      Block data = img.read_block(b);
      data[gen() % kBlockSize] ^= 0x5A;
      img.write_block(b, data);
      cache.invalidate(b);
    }
    const auto hint = static_cast<ScanHint>(gen() % 3);
    REQUIRE(cache.read(b, hint) == img.read_block(b));
  }
  CHECK(cache.size() <= 32);
}

TEST_CASE("concurrent disjoint scans keep their hit rates") {
  Image img = numbered_image(8192);
  const CacheConfig cfg{512, 16, 8};
  auto scan = [&](BlockCache& c, std::uint64_t first) {
    for (int pass = 0; pass < 3; ++pass)
      for (std::uint64_t b = first; b < first + 4096; ++b) c.read(b, ScanHint::InodeScan);
  };
  auto rate = [](const BlockCache& c) { return double(c.stats().hits) / double(c.stats().hits + c.stats().misses); };

  BlockCache solo_a(img, cfg), solo_b(img, cfg);
  scan(solo_a, 0);
  scan(solo_b, 4096);

  BlockCache a(img, cfg), b(img, cfg);
  std::thread ta([&] { scan(a, 0); });
  std::thread tb([&] { scan(b, 4096); });
  ta.join();
  tb.join();
  CHECK(std::abs(rate(a) - rate(solo_a)) <= 0.02);
  CHECK(std::abs(rate(b) - rate(solo_b)) <= 0.02);
  // Isolation: each cache's evictions are its own.
  CHECK(a.stats().evictions == solo_a.stats().evictions);
  CHECK(b.stats().evictions == solo_b.stats().evictions);
}
