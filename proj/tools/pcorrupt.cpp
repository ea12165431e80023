// SPDX-License-Identifier: Apache-2.0
// pcorrupt: inject a corruption plan into an image and write the ledger.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sfs/corrupt.hpp"
#include "sfs/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Inject known corruptions into an image"};
  std::string image_path, plan_text, ledger_path;
  std::uint64_t seed = 1;
  bool restore = false;
  app.add_option("image", image_path, "Image file, modified in place")->required()->check(CLI::ExistingFile);
  app.add_option("--plan", plan_text, "Kind:count[,Kind:count...]");
  app.add_option("--seed", seed, "Target selection seed");
  app.add_option("--ledger", ledger_path, "Ledger path (default: <image>.ledger)");
  app.add_flag("--restore", restore, "Undo the corruptions recorded in the ledger instead");
  CLI11_PARSE(app, argc, argv);
  if (ledger_path.empty()) ledger_path = image_path + ".ledger";

  try {
    sfs::Image image = sfs::Image::open(image_path, true);
    if (restore) {
      std::ifstream in(ledger_path);
      if (!in) throw sfs::Error(sfs::Errc::Io, "cannot read " + ledger_path);
      sfs::CorruptionLedger::read(in).restore(image);
      image.flush();
      return 0;
    }
    const sfs::CorruptionLedger ledger = sfs::inject_corruptions(image, sfs::parse_plan(plan_text), seed);
    image.flush();
    std::ofstream out(ledger_path);
    ledger.write(out);
    if (!out) throw sfs::Error(sfs::Errc::Io, "cannot write " + ledger_path);
    std::cout << "records=" << ledger.records.size() << " ledger=" << ledger_path << '\n';
  } catch (const sfs::Error& e) {
    std::cerr << "pcorrupt: " << sfs::to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
