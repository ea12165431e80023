// SPDX-License-Identifier: Apache-2.0
// Performance direction on a large file-intensive image. Prints one PASS/FAIL
// line with the measured ratios. Exits 77 (skipped) when the host has fewer
// than 8 hardware threads, since the criterion cannot be met there.
#include <filesystem>
#include <iostream>
#include <thread>

#include "json.hpp"
#include "sfs/bench.hpp"
#include "sfs/error.hpp"

using namespace sfs;
namespace fs = std::filesystem;

namespace {

constexpr int kSkipped = 77;

double median_wall(const fs::path& img, std::vector<std::string> extra) {
  std::vector<double> v;
  for (int r = 0; r < 3; ++r) {
    std::vector<std::string> argv = {PFSCK, img.string(), "--report", "structured"};
    argv.insert(argv.end(), extra.begin(), extra.end());
    const ProcessRun pr = spawn(argv);
    if (pr.exit_code != 0) throw Error(Errc::Io, "pfsck exited " + std::to_string(pr.exit_code));
    v.push_back(pr.wall_seconds);
  }
  return median(v);
}

}  // namespace

int main() {
  const unsigned hw = std::thread::hardware_concurrency();
  const fs::path dir = fs::temp_directory_path() / ("sfs-perf-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path img = dir / "file.img";
  try {
    const ImageSpec spec = sized_spec(500000, 5263, 1, 11);
    write_image_file(img, spec);
    const double gib = double(spec.total_blocks * kBlockSize) / double(1ull << 30);

    const double serial = median_wall(img, {});
    const double sched8 = median_wall(img, {"--mode", "sched", "--threads", "8"});
    const double dp1 = median_wall(img, {"--mode", "datapara", "--threads", "1"});
    const double dp4 = median_wall(img, {"--mode", "datapara", "--threads", "4"});
    const double dp16 = median_wall(img, {"--mode", "datapara", "--threads", "16"});
    fs::remove_all(dir);

    const double sched_ratio = sched8 / serial;
    const double s4 = serial / dp4, s16 = serial / dp16;
    // Directional: speedup at 4 threads, and 16 threads no better than 4 (5% noise allowance).
    const bool ok = sched_ratio <= 0.67 && s4 > 1.0 && s16 <= s4 * 1.05;
    std::cout.setf(std::ios::fixed);
    std::cout.precision(3);
    std::cout << (ok ? "PASS" : "FAIL") << " performance-direction: image " << gib << " GiB, " << spec.total_inodes
              << " inodes, " << hw << " hardware threads; serial " << serial << " s, sched t=8 " << sched8
              << " s (ratio " << sched_ratio << ", need <= 0.67); datapara speedup t=1 " << serial / dp1 << ", t=4 "
              << s4 << ", t=16 " << s16 << std::endl;
    if (ok) return 0;
    if (hw < 8) {
      std::cout << "skipped: fewer than 8 hardware threads, the speedup criterion is not attainable on this host"
                << std::endl;
      return kSkipped;
    }
    return 1;
  } catch (const std::exception& e) {
    fs::remove_all(dir);
    std::cout << "FAIL performance-direction: " << e.what() << std::endl;
    return 1;
  }
}
