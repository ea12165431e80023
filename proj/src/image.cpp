// SPDX-License-Identifier: Apache-2.0
#include "sfs/image.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "sfs/error.hpp"

namespace sfs {
namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(Errc::Io, what + ": " + std::strerror(errno));
}

std::uint64_t span_blocks(std::size_t bytes) {
  if (bytes % kBlockSize != 0) throw Error(Errc::InvalidArgument, "buffer is not a whole number of blocks");
  return bytes / kBlockSize;
}

}  // namespace

// ---------------------------------------------------------------------------

MemoryDevice::MemoryDevice(std::uint64_t blocks) : bytes_(blocks * kBlockSize, 0) {}

MemoryDevice::MemoryDevice(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
  bytes_.resize(bytes_.size() / kBlockSize * kBlockSize);
}

void MemoryDevice::read(std::uint64_t first, std::span<std::uint8_t> out) const {
  std::memcpy(out.data(), bytes_.data() + first * kBlockSize, out.size());
}

void MemoryDevice::write(std::uint64_t first, std::span<const std::uint8_t> in) {
  std::memcpy(bytes_.data() + first * kBlockSize, in.data(), in.size());
}

// ---------------------------------------------------------------------------

FileDevice::FileDevice(const std::filesystem::path& path, bool writable) {
  fd_ = ::open(path.c_str(), (writable ? O_RDWR : O_RDONLY) | O_CLOEXEC);
  if (fd_ < 0) throw_errno("open " + path.string());
  struct stat st {};
  if (::fstat(fd_, &st) != 0) {
    ::close(fd_);
    throw_errno("stat " + path.string());
  }
  blocks_ = static_cast<std::uint64_t>(st.st_size) / kBlockSize;
}

FileDevice::~FileDevice() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<FileDevice> FileDevice::create(const std::filesystem::path& path, std::uint64_t blocks) {
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("create " + path.string());
  if (::ftruncate(fd, static_cast<off_t>(blocks * kBlockSize)) != 0) {
    ::close(fd);
    throw_errno("truncate " + path.string());
  }
  ::close(fd);
  return std::make_unique<FileDevice>(path, true);
}

void FileDevice::read(std::uint64_t first, std::span<std::uint8_t> out) const {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                              static_cast<off_t>(first * kBlockSize + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("pread");
    }
    if (n == 0) throw Error(Errc::Io, "pread: unexpected end of file");
    done += static_cast<std::size_t>(n);
  }
}

void FileDevice::write(std::uint64_t first, std::span<const std::uint8_t> in) {
  std::size_t done = 0;
  while (done < in.size()) {
    const ssize_t n = ::pwrite(fd_, in.data() + done, in.size() - done,
                               static_cast<off_t>(first * kBlockSize + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("pwrite");
    }
    done += static_cast<std::size_t>(n);
  }
}

void FileDevice::flush() {
  if (::fsync(fd_) != 0 && errno != EINVAL) throw_errno("fsync");
}

// ---------------------------------------------------------------------------

Image::Image(std::unique_ptr<BlockDevice> device) : device_(std::move(device)) {}

Image Image::in_memory(std::uint64_t blocks) { return Image(std::make_unique<MemoryDevice>(blocks)); }

Image Image::from_bytes(std::vector<std::uint8_t> bytes) {
  return Image(std::make_unique<MemoryDevice>(std::move(bytes)));
}

Image Image::open(const std::filesystem::path& path, bool writable) {
  return Image(std::make_unique<FileDevice>(path, writable));
}

void Image::check_range(std::uint64_t first, std::uint64_t count) const {
  const std::uint64_t total = total_blocks();
  if (first >= total || count > total - first) {
    throw Error(Errc::OutOfRange, "block " + std::to_string(first + (first >= total ? 0 : count - 1)) +
                                      " beyond image of " + std::to_string(total) + " blocks");
  }
}

Block Image::read_block(std::uint64_t b) const {
  Block out;
  read_block(b, out);
  return out;
}

void Image::read_block(std::uint64_t b, MutableBlockView out) const {
  check_range(b, 1);
  device_->read(b, out);
}

void Image::read_blocks(std::uint64_t first, std::uint64_t count, std::span<std::uint8_t> out) const {
  if (count == 0) return;
  check_range(first, count);
  if (span_blocks(out.size()) < count) throw Error(Errc::InvalidArgument, "read_blocks: buffer too small");
  device_->read(first, out.first(count * kBlockSize));
}

void Image::write_block(std::uint64_t b, BlockView data) {
  check_range(b, 1);
  device_->write(b, data);
}

void Image::write_bytes(std::uint64_t b, std::uint32_t offset, std::span<const std::uint8_t> data) {
  if (offset + data.size() > kBlockSize) throw Error(Errc::OutOfRange, "write_bytes crosses a block boundary");
  Block blk = read_block(b);
  std::memcpy(blk.data() + offset, data.data(), data.size());
  write_block(b, blk);
}

Superblock Image::superblock() const {
  if (total_blocks() == 0) throw Error(Errc::UnrecognizedImage, "image shorter than one block");
  const Block b0 = read_block(0);
  return Superblock::decode(b0);
}

std::vector<std::uint8_t> Image::snapshot() const {
  std::vector<std::uint8_t> out(total_blocks() * kBlockSize);
  constexpr std::uint64_t kChunk = 256;
  for (std::uint64_t b = 0; b < total_blocks(); b += kChunk) {
    const std::uint64_t n = std::min(kChunk, total_blocks() - b);
    device_->read(b, std::span(out).subspan(b * kBlockSize, n * kBlockSize));
  }
  return out;
}

Image Image::clone() const { return from_bytes(snapshot()); }

}  // namespace sfs
