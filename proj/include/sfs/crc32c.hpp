// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

namespace sfs {

/// CRC32C (Castagnoli, reflected polynomial 0x82F63B78, init and final XOR
/// 0xFFFFFFFF). Dispatches to the SSE4.2 crc32 instruction when the CPU has it.
std::uint32_t crc32c(std::span<const std::uint8_t> bytes) noexcept;

/// Continues a running CRC. `crc` is the value returned by a previous call
/// (already final-XORed), so crc32c_extend(crc32c(a), b) == crc32c(a ++ b).
std::uint32_t crc32c_extend(std::uint32_t crc, std::span<const std::uint8_t> bytes) noexcept;

/// Table-driven path, exposed so tests can compare both implementations.
std::uint32_t crc32c_portable(std::uint32_t crc, std::span<const std::uint8_t> bytes) noexcept;

/// Hardware path; only valid when crc32c_hardware_available() is true.
std::uint32_t crc32c_hardware(std::uint32_t crc, std::span<const std::uint8_t> bytes) noexcept;

bool crc32c_hardware_available() noexcept;

}  // namespace sfs
