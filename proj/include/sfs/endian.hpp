// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

// Little-endian field access independent of host byte order.
namespace sfs::le {

template <typename T>
inline T load(const std::uint8_t* p) noexcept {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

template <typename T>
inline void store(std::uint8_t* p, T v) noexcept {
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint16_t load16(const std::uint8_t* p) noexcept { return load<std::uint16_t>(p); }
inline std::uint32_t load32(const std::uint8_t* p) noexcept { return load<std::uint32_t>(p); }
inline std::uint64_t load64(const std::uint8_t* p) noexcept { return load<std::uint64_t>(p); }

}  // namespace sfs::le
