// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfs/format.hpp"
#include "sfs/image.hpp"

namespace sfs {

struct ImageSpec {
  std::uint64_t total_blocks = 4096;
  std::uint64_t total_inodes = 1024;
  std::uint64_t file_count = 0;
  std::uint64_t dir_count = 0;
  std::uint32_t mean_file_blocks = 1;
  std::uint32_t max_dir_fanout = 8;
  std::uint64_t seed = 1;
};

struct ManifestEntry {
  std::uint64_t inode = 0;
  FileType type = FileType::Unknown;
  std::uint64_t parent = 0;
  std::string name;
  std::uint64_t size = 0;
  std::uint64_t indirect = 0;
  std::vector<std::uint64_t> blocks;  // data blocks in logical order

  bool operator==(const ManifestEntry&) const = default;
};

/// Every object created by build_image, ordered by inode number.
struct Manifest {
  std::vector<ManifestEntry> entries;

  std::uint64_t count(FileType t) const;
  const ManifestEntry* find(std::uint64_t inode) const;

  /// Line format documented in docs/FORMATS.md.
  void write(std::ostream& os) const;
  static Manifest read(std::istream& is);

  bool operator==(const Manifest&) const = default;
};

/// Populates `image` (which must have spec.total_blocks blocks, all zero)
/// with a clean filesystem. Throws Error{SpecInfeasible}.
Manifest build_image_into(Image& image, const ImageSpec& spec);

struct BuiltImage {
  Image image;
  Manifest manifest;
};

BuiltImage build_image(const ImageSpec& spec);

/// A spec with room for the requested content plus some free space.
ImageSpec sized_spec(std::uint64_t files, std::uint64_t dirs, std::uint32_t mean_file_blocks, std::uint64_t seed);

/// Whether file slot `file_index` is generated as a symlink (every 50th slot;
/// every 4th symlink has a target too long to store inline).
bool generated_as_symlink(std::uint64_t file_index);

}  // namespace sfs
