// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

namespace sfs {

/// Dynamic bitset with the on-disk bit order (bit i is bit i%8 of byte i/8).
class Bitmap {
 public:
  Bitmap() = default;
  explicit Bitmap(std::uint64_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

  std::uint64_t size() const { return bits_; }

  bool test(std::uint64_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::uint64_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::uint64_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  /// Sets bit i and returns its previous value.
  bool test_and_set(std::uint64_t i) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    const bool was = words_[i >> 6] & mask;
    words_[i >> 6] |= mask;
    return was;
  }
  void set_range(std::uint64_t first, std::uint64_t last) {
    for (std::uint64_t i = first; i < last; ++i) set(i);
  }

  std::uint64_t count() const {
    std::uint64_t n = 0;
    for (auto w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
    return n;
  }

  /// Lowest clear bit at or after `from`, or size() when none.
  std::uint64_t find_first_clear(std::uint64_t from) const {
    for (std::uint64_t i = from; i < bits_; ++i)
      if (!test(i)) return i;
    return bits_;
  }

  std::span<std::uint64_t> words() { return words_; }
  std::span<const std::uint64_t> words() const { return words_; }

  /// Byte image as stored on disk (padding bits zero).
  void to_bytes(std::span<std::uint8_t> out, std::uint64_t first_bit) const;

  bool operator==(const Bitmap&) const = default;

 private:
  std::uint64_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

inline void Bitmap::to_bytes(std::span<std::uint8_t> out, std::uint64_t first_bit) const {
  for (std::size_t byte = 0; byte < out.size(); ++byte) {
    std::uint8_t v = 0;
    for (int bit = 0; bit < 8; ++bit) {
      const std::uint64_t i = first_bit + byte * 8 + static_cast<std::uint64_t>(bit);
      if (i < bits_ && test(i)) v |= static_cast<std::uint8_t>(1u << bit);
    }
    out[byte] = v;
  }
}

inline bool bitmap_byte_test(std::span<const std::uint8_t> bytes, std::uint64_t bit) {
  return (bytes[bit >> 3] >> (bit & 7)) & 1u;
}

}  // namespace sfs
