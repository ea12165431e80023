// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "sfs/format.hpp"

namespace sfs {

/// Fixed-size array of 4 KiB blocks. Implementations allow concurrent readers;
/// writers must be exclusive.
class BlockDevice {
 public:
  virtual ~BlockDevice() = default;

  virtual std::uint64_t block_count() const = 0;
  /// Reads `out.size() / kBlockSize` consecutive blocks starting at `first`.
  virtual void read(std::uint64_t first, std::span<std::uint8_t> out) const = 0;
  virtual void write(std::uint64_t first, std::span<const std::uint8_t> in) = 0;
  virtual void flush() {}
};

class MemoryDevice final : public BlockDevice {
 public:
  explicit MemoryDevice(std::uint64_t blocks);
  explicit MemoryDevice(std::vector<std::uint8_t> bytes);

  std::uint64_t block_count() const override { return bytes_.size() / kBlockSize; }
  void read(std::uint64_t first, std::span<std::uint8_t> out) const override;
  void write(std::uint64_t first, std::span<const std::uint8_t> in) override;

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// pread/pwrite on an image file. A trailing partial block is ignored.
class FileDevice final : public BlockDevice {
 public:
  FileDevice(const std::filesystem::path& path, bool writable);
  ~FileDevice() override;
  FileDevice(const FileDevice&) = delete;
  FileDevice& operator=(const FileDevice&) = delete;

  /// Creates (or truncates) a sparse file of `blocks` blocks.
  static std::unique_ptr<FileDevice> create(const std::filesystem::path& path, std::uint64_t blocks);

  std::uint64_t block_count() const override { return blocks_; }
  void read(std::uint64_t first, std::span<std::uint8_t> out) const override;
  void write(std::uint64_t first, std::span<const std::uint8_t> in) override;
  void flush() override;

 private:
  int fd_ = -1;
  std::uint64_t blocks_ = 0;
};

/// Block-addressed image. Reads are thread-safe; writes must not race reads
/// of the same block (the checker serializes them behind its repair barrier).
class Image {
 public:
  explicit Image(std::unique_ptr<BlockDevice> device);

  static Image in_memory(std::uint64_t blocks);
  static Image from_bytes(std::vector<std::uint8_t> bytes);
  static Image open(const std::filesystem::path& path, bool writable);

  std::uint64_t total_blocks() const { return device_->block_count(); }

  Block read_block(std::uint64_t b) const;
  void read_block(std::uint64_t b, MutableBlockView out) const;
  void read_blocks(std::uint64_t first, std::uint64_t count, std::span<std::uint8_t> out) const;
  void write_block(std::uint64_t b, BlockView data);
  /// Partial update inside one block.
  void write_bytes(std::uint64_t b, std::uint32_t offset, std::span<const std::uint8_t> data);

  Superblock superblock() const;
  void flush() { device_->flush(); }

  /// Full byte copy (tests and equivalence checks).
  std::vector<std::uint8_t> snapshot() const;
  Image clone() const;

  BlockDevice& device() { return *device_; }

 private:
  void check_range(std::uint64_t first, std::uint64_t count) const;

  std::unique_ptr<BlockDevice> device_;
};

}  // namespace sfs
