// SPDX-License-Identifier: Apache-2.0
// pmkfs: write a generated image and its manifest.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sfs/bench.hpp"
#include "sfs/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Create a populated filesystem image"};
  std::string out, manifest_path;
  std::uint64_t files = 0, dirs = 0, seed = 1, blocks = 0, inodes = 0;
  std::uint32_t mean = 1, fanout = 8;
  app.add_option("output", out, "Image file to create")->required();
  app.add_option("--files", files, "Regular files and symlinks");
  app.add_option("--dirs", dirs, "Directories besides root and lost+found");
  app.add_option("--mean-blocks", mean, "Mean data blocks per file");
  app.add_option("--fanout", fanout, "Maximum subdirectories per directory");
  app.add_option("--blocks", blocks, "Total blocks (default: sized to fit)");
  app.add_option("--inodes", inodes, "Total inodes (default: sized to fit)");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--manifest", manifest_path, "Manifest path (default: <output>.manifest)");
  CLI11_PARSE(app, argc, argv);

  sfs::ImageSpec spec = sfs::sized_spec(files, dirs, mean, seed);
  spec.max_dir_fanout = fanout;
  if (blocks) spec.total_blocks = blocks;
  if (inodes) spec.total_inodes = inodes;
  if (manifest_path.empty()) manifest_path = out + ".manifest";

  try {
    const sfs::Manifest m = sfs::write_image_file(out, spec);
    std::ofstream mf(manifest_path);
    m.write(mf);
    if (!mf) throw sfs::Error(sfs::Errc::Io, "cannot write " + manifest_path);
    std::cout << "image=" << out << " blocks=" << spec.total_blocks << " inodes=" << spec.total_inodes
              << " files=" << files << " dirs=" << dirs << " manifest=" << manifest_path << '\n';
  } catch (const sfs::Error& e) {
    std::cerr << "pmkfs: " << sfs::to_string(e.code()) << ": " << e.what() << '\n';
    std::filesystem::remove(out);
    return 1;
  }
  return 0;
}
