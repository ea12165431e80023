// SPDX-License-Identifier: Apache-2.0
#include "sfs/generator.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "sfs/endian.hpp"
#include "sfs/error.hpp"
#include "sfs/rng.hpp"

namespace sfs {
namespace {

constexpr std::uint64_t kLostFoundBlocks = 4;
constexpr std::uint64_t kMtimeBase = 1'600'000'000;

struct Object {
  std::uint64_t ino = 0;
  FileType type = FileType::Unknown;
  std::uint64_t parent = 0;
  std::string name;
  std::uint64_t size = 0;
  std::uint64_t nblocks = 0;
  std::uint64_t mtime = 0;
  std::uint16_t links = 1;
  bool long_target = false;
  std::string target;              // symlinks only
  std::vector<Block> dir_blocks;   // directories only
  std::vector<std::uint64_t> blocks;
  std::uint64_t indirect = 0;
};

std::vector<Block> pack_directory(std::uint64_t self, std::uint64_t parent, const std::vector<const Object*>& children,
                                  std::uint64_t min_blocks) {
  std::vector<Block> out;
  DirBlockBuilder cur;
  cur.add(self, FileType::Directory, ".");
  cur.add(parent, FileType::Directory, "..");
  for (const Object* c : children) {
    if (!cur.add(c->ino, c->type, c->name)) {
      out.push_back(cur.finish());
      cur = DirBlockBuilder();
      cur.add(c->ino, c->type, c->name);
    }
  }
  out.push_back(cur.finish());
  while (out.size() < min_blocks) out.push_back(DirBlockBuilder().finish());
  return out;
}

void write_prefix_bitmap(Image& image, std::uint64_t start, std::uint32_t nblocks, std::uint64_t set_bits) {
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    Block blk{};
    const std::uint64_t first = std::uint64_t{i} * kBitsPerBitmapBlock;
    if (set_bits > first) {
      const std::uint64_t n = std::min(set_bits - first, kBitsPerBitmapBlock);
      std::fill_n(blk.begin(), n / 8, std::uint8_t{0xFF});
      if (n % 8 != 0) blk[n / 8] = static_cast<std::uint8_t>((1u << (n % 8)) - 1);
    }
    image.write_block(start + i, blk);
  }
}

std::string_view type_token(FileType t) {
  switch (t) {
    case FileType::Directory: return "dir";
    case FileType::Regular: return "file";
    case FileType::Symlink: return "symlink";
    default: return "unknown";
  }
}

FileType parse_type_token(std::string_view s) {
  if (s == "dir") return FileType::Directory;
  if (s == "file") return FileType::Regular;
  if (s == "symlink") return FileType::Symlink;
  throw Error(Errc::InvalidArgument, "manifest: unknown type '" + std::string(s) + "'");
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw Error(Errc::InvalidArgument, "manifest: bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

bool generated_as_symlink(std::uint64_t file_index) { return file_index % 50 == 49; }

ImageSpec sized_spec(std::uint64_t files, std::uint64_t dirs, std::uint32_t mean_file_blocks, std::uint64_t seed) {
  ImageSpec spec;
  spec.file_count = files;
  spec.dir_count = dirs;
  spec.mean_file_blocks = mean_file_blocks;
  spec.seed = seed;
  const std::uint64_t objects = files + dirs;
  spec.total_inodes = kFirstUserInode + objects + 64 + objects / 16;

  const std::uint64_t per_file = mean_file_blocks + mean_file_blocks / 2;
  std::uint64_t data = files * (per_file + (per_file > kDirectPointers ? 1 : 0)) + files / 100;
  data += dirs + 2 + kLostFoundBlocks + objects / 64;
  data += data / 16 + 64;  // room for repairs
  std::uint64_t blocks = data + 64;
  while (true) {
    const Superblock sb = Superblock::for_geometry(blocks, spec.total_inodes);
    if (sb.first_data_block < blocks && blocks - sb.first_data_block >= data) break;
    blocks += data - (blocks > sb.first_data_block ? blocks - sb.first_data_block : 0);
  }
  spec.total_blocks = blocks;
  return spec;
}

Manifest build_image_into(Image& image, const ImageSpec& spec) {
  const std::uint64_t user_objects = spec.file_count + spec.dir_count;
  if (spec.total_inodes < kFirstUserInode || user_objects > spec.total_inodes - kFirstUserInode)
    throw Error(Errc::SpecInfeasible, "not enough inodes: need " + std::to_string(user_objects + kFirstUserInode) +
                                          ", have " + std::to_string(spec.total_inodes));
  if (spec.dir_count > 0 && spec.max_dir_fanout == 0)
    throw Error(Errc::SpecInfeasible, "max_dir_fanout must be positive when directories are requested");
  if (image.total_blocks() != spec.total_blocks)
    throw Error(Errc::InvalidArgument, "image size does not match spec.total_blocks");

  Superblock sb = Superblock::for_geometry(spec.total_blocks, spec.total_inodes);
  if (sb.first_data_block >= spec.total_blocks)
    throw Error(Errc::SpecInfeasible, "metadata regions leave no data blocks");

  Rng rng(spec.seed);

  // Directory k (0 = root) has parent (k - 1) / fanout: a complete tree filled
  // breadth-first. File j lives in directory j % (dirs + 1).
  const std::uint64_t ndirs = spec.dir_count + 1;
  const std::uint64_t fanout = std::max<std::uint64_t>(spec.max_dir_fanout, 1);
  std::vector<std::uint64_t> dir_ino(ndirs, 0);
  dir_ino[0] = kRootInode;

  std::vector<Object> objs(kFirstUserInode + user_objects);
  for (std::uint64_t ino : {kRootInode, kLostFoundInode}) {
    objs[ino].ino = ino;
    objs[ino].type = FileType::Directory;
    objs[ino].parent = kRootInode;
  }
  objs[kRootInode].name = "/";
  objs[kLostFoundInode].name = "lost+found";

  std::uint64_t next = kFirstUserInode;
  for (std::uint64_t k = 0; k < ndirs; ++k) {
    const std::uint64_t self = dir_ino[k];
    const std::uint64_t nfiles = spec.file_count / ndirs + (k < spec.file_count % ndirs ? 1 : 0);
    for (std::uint64_t i = 0; i < nfiles; ++i) {
      const std::uint64_t j = k + i * ndirs;
      Object& o = objs[next];
      o.ino = next++;
      o.parent = self;
      o.type = generated_as_symlink(j) ? FileType::Symlink : FileType::Regular;
      o.long_target = (j / 50) % 4 == 3;
      o.name = (o.type == FileType::Symlink ? "l" : "f") + std::to_string(o.ino);
    }
    const std::uint64_t first_child = k * fanout + 1;
    for (std::uint64_t c = first_child; c < std::min(first_child + fanout, ndirs); ++c) {
      Object& o = objs[next];
      o.ino = next++;
      o.parent = self;
      o.type = FileType::Directory;
      o.name = "d" + std::to_string(o.ino);
      dir_ino[c] = o.ino;
    }
  }

  std::vector<std::vector<const Object*>> children(objs.size());
  children[kRootInode].push_back(&objs[kLostFoundInode]);
  for (std::uint64_t ino = kFirstUserInode; ino < objs.size(); ++ino) children[objs[ino].parent].push_back(&objs[ino]);

  const std::uint64_t max_blocks = kMaxFileBlocks;
  for (std::uint64_t ino = kRootInode; ino < objs.size(); ++ino) {
    Object& o = objs[ino];
    o.mtime = kMtimeBase + rng.below(100'000'000);
    switch (o.type) {
      case FileType::Directory: {
        std::uint16_t subdirs = 0;
        for (const Object* c : children[ino]) subdirs += c->type == FileType::Directory ? 1 : 0;
        o.links = static_cast<std::uint16_t>(2 + subdirs);
        o.dir_blocks = pack_directory(ino, o.parent, children[ino], ino == kLostFoundInode ? kLostFoundBlocks : 1);
        o.nblocks = o.dir_blocks.size();
        o.size = o.nblocks * kBlockSize;
        break;
      }
      case FileType::Regular: {
        const std::uint64_t mean = spec.mean_file_blocks;
        o.nblocks = mean == 0 ? 0 : std::min(rng.between(mean - mean / 2, mean + mean / 2), max_blocks);
        o.size = o.nblocks == 0 ? 0 : (o.nblocks - 1) * kBlockSize + rng.between(1, kBlockSize);
        break;
      }
      case FileType::Symlink: {
        const std::uint64_t len = o.long_target ? rng.between(kInlineSymlinkMax + 1, 200) : rng.between(1, kInlineSymlinkMax);
        o.target = "../t" + std::to_string(ino) + "/";
        o.target.resize(len, 'x');
        o.size = len;
        o.nblocks = o.long_target ? 1 : 0;
        break;
      }
      default: break;
    }
  }

  std::uint64_t needed = 0;
  for (const Object& o : objs) needed += o.nblocks + (o.nblocks > kDirectPointers ? 1 : 0);
  const std::uint64_t data_blocks = spec.total_blocks - sb.first_data_block;
  if (needed > data_blocks)
    throw Error(Errc::SpecInfeasible, "content needs " + std::to_string(needed) + " data blocks, image has " +
                                          std::to_string(data_blocks));

  std::uint64_t cursor = sb.first_data_block;
  for (std::uint64_t ino = kRootInode; ino < objs.size(); ++ino) {
    Object& o = objs[ino];
    for (std::uint64_t i = 0; i < o.nblocks; ++i) {
      if (i == kDirectPointers) o.indirect = cursor++;
      o.blocks.push_back(cursor++);
    }
  }

  // Inode table, one table block at a time.
  Block table{};
  std::uint64_t table_block = sb.inode_block(kRootInode);
  auto flush_table = [&] {
    image.write_block(table_block, table);
    table.fill(0);
  };
  for (std::uint64_t ino = kRootInode; ino < objs.size(); ++ino) {
    const Object& o = objs[ino];
    if (sb.inode_block(ino) != table_block) {
      flush_table();
      table_block = sb.inode_block(ino);
    }
    Inode in;
    in.links_count = o.links;
    in.size = o.size;
    in.mtime = o.mtime;
    switch (o.type) {
      case FileType::Directory: in.mode = mode::kDirectory | 0755; break;
      case FileType::Regular: in.mode = mode::kRegular | 0644; break;
      default: in.mode = mode::kSymlink | 0777; break;
    }
    if (o.type == FileType::Symlink && o.nblocks == 0) {
      std::array<std::uint8_t, kInlineSymlinkMax> raw{};
      std::copy(o.target.begin(), o.target.end(), raw.begin());
      for (std::size_t i = 0; i < kDirectPointers; ++i) in.direct[i] = le::load64(raw.data() + i * 8);
    } else {
      for (std::size_t i = 0; i < std::min<std::size_t>(o.blocks.size(), kDirectPointers); ++i) in.direct[i] = o.blocks[i];
      in.indirect = o.indirect;
    }
    in.seal();
    in.encode(std::span(table).subspan(sb.inode_offset(ino), kInodeSize));
  }
  flush_table();

  for (const Object& o : objs) {
    if (o.type == FileType::Directory) {
      for (std::size_t i = 0; i < o.dir_blocks.size(); ++i) image.write_block(o.blocks[i], o.dir_blocks[i]);
    } else if (o.type == FileType::Symlink && o.nblocks == 1) {
      Block blk{};
      std::copy(o.target.begin(), o.target.end(), blk.begin());
      image.write_block(o.blocks[0], blk);
    }
    if (o.indirect != 0) {
      Block blk{};
      for (std::size_t i = kDirectPointers; i < o.blocks.size(); ++i)
        le::store<std::uint64_t>(blk.data() + (i - kDirectPointers) * 8, o.blocks[i]);
      image.write_block(o.indirect, blk);
    }
  }

  const std::uint64_t used_inodes = objs.size();
  write_prefix_bitmap(image, sb.block_bitmap_start, sb.block_bitmap_blocks, cursor);
  write_prefix_bitmap(image, sb.inode_bitmap_start, sb.inode_bitmap_blocks, used_inodes);
  sb.free_blocks = spec.total_blocks - cursor;
  sb.free_inodes = spec.total_inodes - used_inodes;
  sb.seal();
  Block b0{};
  sb.encode(b0);
  image.write_block(0, b0);

  Manifest m;
  m.entries.reserve(objs.size() - kRootInode);
  for (std::uint64_t ino = kRootInode; ino < objs.size(); ++ino) {
    const Object& o = objs[ino];
    m.entries.push_back({.inode = o.ino, .type = o.type, .parent = o.parent, .name = o.name, .size = o.size,
                         .indirect = o.indirect, .blocks = o.blocks});
  }
  return m;
}

BuiltImage build_image(const ImageSpec& spec) {
  Image image = Image::in_memory(spec.total_blocks);
  Manifest m = build_image_into(image, spec);
  return {std::move(image), std::move(m)};
}

// ---------------------------------------------------------------------------

std::uint64_t Manifest::count(FileType t) const {
  return static_cast<std::uint64_t>(
      std::count_if(entries.begin(), entries.end(), [t](const ManifestEntry& e) { return e.type == t; }));
}

const ManifestEntry* Manifest::find(std::uint64_t inode) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), inode,
                             [](const ManifestEntry& e, std::uint64_t i) { return e.inode < i; });
  return it != entries.end() && it->inode == inode ? &*it : nullptr;
}

void Manifest::write(std::ostream& os) const {
  os << "# sfs manifest v1\n";
  for (const ManifestEntry& e : entries) {
    os << "inode=" << e.inode << " type=" << type_token(e.type) << " parent=" << e.parent << " size=" << e.size
       << " indirect=" << e.indirect << " blocks=";
    if (e.blocks.empty()) os << '-';
    for (std::size_t i = 0; i < e.blocks.size(); ++i) os << (i ? "," : "") << e.blocks[i];
    os << " name=" << e.name << '\n';
  }
}

Manifest Manifest::read(std::istream& is) {
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    ManifestEntry e;
    std::istringstream fields(line);
    std::string tok;
    while (fields >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "manifest: malformed field '" + tok + "'");
      const std::string_view key = std::string_view(tok).substr(0, eq);
      const std::string_view val = std::string_view(tok).substr(eq + 1);
      if (key == "inode") e.inode = parse_u64(val);
      else if (key == "type") e.type = parse_type_token(val);
      else if (key == "parent") e.parent = parse_u64(val);
      else if (key == "size") e.size = parse_u64(val);
      else if (key == "indirect") e.indirect = parse_u64(val);
      else if (key == "name") e.name = std::string(val);
      else if (key == "blocks") {
        if (val == "-") continue;
        std::size_t pos = 0;
        while (pos <= val.size()) {
          const std::size_t comma = std::min(val.find(',', pos), val.size());
          e.blocks.push_back(parse_u64(val.substr(pos, comma - pos)));
          pos = comma + 1;
        }
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace sfs
