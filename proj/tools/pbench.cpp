// SPDX-License-Identifier: Apache-2.0
// pbench: timing table over image configurations, modes and thread counts.
// Each run is a separate pfsck process; its report must match the serial run.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sfs/bench.hpp"
#include "sfs/corrupt.hpp"
#include "sfs/error.hpp"
#include "sfs/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ImageConfig {
  std::string name;
  std::uint64_t files;
  std::uint64_t dirs;
  std::uint32_t mean_blocks;
};

// file: 95 files per directory. dir: one file per directory.
const std::map<std::string, ImageConfig> kConfigs = {
    {"file", {"file", 95000, 1000, 2}},
    {"dir", {"dir", 20000, 20000, 1}},
};

struct Sample {
  double wall = 0;
  std::array<double, 5> pass{};
  std::array<std::uint64_t, 5> objects{};
  std::uint64_t rss_kib = 0;
  std::string findings;
  int exit_code = 0;
};

std::pair<std::uint32_t, std::uint32_t> manual_split(std::uint32_t t) {
  if (t < 2) return {1, 0};
  const std::uint32_t p2 = std::max(1u, t / 4);
  return {t - p2, p2};
}

Sample run_once(const fs::path& pfsck, const fs::path& image, const fs::path& pristine, bool copy, sfs::Mode mode,
                std::uint32_t threads, const std::string& config) {
  if (copy) fs::copy_file(pristine, image, fs::copy_options::overwrite_existing);
  std::vector<std::string> argv = {pfsck.string(), copy ? image.string() : pristine.string(), "--mode",
                                   std::string(sfs::to_string(mode)), "--threads", std::to_string(threads),
                                   "--report", "structured"};
  if (mode == sfs::Mode::SplitManual) {
    const auto [p1, p2] = manual_split(threads);
    argv.insert(argv.end(), {"--split", std::to_string(p1) + ":" + std::to_string(p2)});
  }
  if (!config.empty()) argv.insert(argv.end(), {"--config", config});

  const sfs::ProcessRun pr = sfs::spawn(argv);
  if (pr.exit_code != 0 && pr.exit_code != 1)
    throw sfs::Error(sfs::Errc::Io, "pfsck exited with " + std::to_string(pr.exit_code));
  const json doc = json::parse(pr.out);
  Sample s;
  s.wall = pr.wall_seconds;
  s.rss_kib = doc["stats"]["counters"].value("peak_rss_kib", std::uint64_t{0});
  s.exit_code = pr.exit_code;
  s.findings = doc["findings"].dump();
  for (const auto& p : doc["stats"]["passes"]) {
    const std::size_t i = p["pass"].get<std::size_t>() - 1;
    s.pass[i] = p["seconds"].get<double>();
    s.objects[i] = p["objects_checked"].get<std::uint64_t>();
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checker benchmark and correctness gate"};
  std::string images = "file,dir", modes = "serial,datapara,pipeline-split-equal,pipeline-split-manual,sched,rsched";
  std::string thread_list = "1,2,4,8", workdir, config, out_path;
  double scale = 0.1;
  std::uint32_t reps = 3, corruptions = 0;
  std::uint64_t seed = 7;
  bool calibrate = false;
  app.add_option("--images", images, "Comma list of image configs: file, dir");
  app.add_option("--modes", modes, "Comma list of modes");
  app.add_option("--threads", thread_list, "Comma list of thread counts");
  app.add_option("--scale", scale, "Multiplier on the configs' object counts")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "Repetitions per row (median reported)")->check(CLI::Range(3u, 1000u));
  app.add_option("--corruptions", corruptions, "Corruptions injected before each run (spread over kinds)");
  app.add_option("--seed", seed, "Image and corruption seed");
  app.add_option("--workdir", workdir, "Directory for generated images");
  app.add_option("--config", config, "Config passed to every pfsck run");
  app.add_option("--out", out_path, "Write the table here instead of stdout");
  app.add_flag("--calibrate", calibrate, "Derive the directory weight from serial per-object times");
  CLI11_PARSE(app, argc, argv);

  const fs::path pfsck = sfs::sibling_tool("pfsck");
  const fs::path dir = workdir.empty() ? fs::temp_directory_path() / ("pbench-" + std::to_string(getpid())) : fs::path(workdir);
  fs::create_directories(dir);
  std::ofstream file_out;
  if (!out_path.empty()) file_out.open(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file_out;
  out << std::fixed << std::setprecision(4);

  int mismatches = 0;
  try {
    std::vector<sfs::Mode> mode_list;
    for (const std::string& m : split_list(modes)) {
      const auto mode = sfs::parse_mode(m);
      if (!mode) throw sfs::Error(sfs::Errc::InvalidArgument, "unknown mode '" + m + "'");
      mode_list.push_back(*mode);
    }
    std::vector<std::uint32_t> thread_counts;
    for (const std::string& t : split_list(thread_list)) thread_counts.push_back(static_cast<std::uint32_t>(std::stoul(t)));

    for (const std::string& name : split_list(images)) {
      const auto it = kConfigs.find(name);
      if (it == kConfigs.end()) throw sfs::Error(sfs::Errc::InvalidArgument, "unknown image config '" + name + "'");
      const ImageConfig& ic = it->second;
      const auto files = static_cast<std::uint64_t>(static_cast<double>(ic.files) * scale);
      const auto dirs = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(static_cast<double>(ic.dirs) * scale));
      const sfs::ImageSpec spec = sfs::sized_spec(files, dirs, ic.mean_blocks, seed);
      const fs::path pristine = dir / (name + ".img");
      sfs::write_image_file(pristine, spec);
      if (corruptions > 0) {
        sfs::Image img = sfs::Image::open(pristine, true);
        sfs::CorruptionPlan plan;
        for (std::size_t k = 0; k < sfs::kAllCorruptionKinds.size(); ++k) {
          const std::uint32_t n = corruptions / 11 + (k < corruptions % 11 ? 1 : 0);
          if (n) plan.push_back({sfs::kAllCorruptionKinds[k], n});
        }
        sfs::inject_corruptions(img, plan, seed);
        img.flush();
      }
      const fs::path work = dir / (name + ".run.img");
      out << "# image=" << name << " files=" << files << " dirs=" << dirs << " blocks=" << spec.total_blocks
          << " inodes=" << spec.total_inodes << '\n';

      auto row = [&](sfs::Mode mode, std::uint32_t threads) {
        std::vector<Sample> samples;
        for (std::uint32_t r = 0; r < reps; ++r)
          samples.push_back(run_once(pfsck, work, pristine, corruptions > 0, mode, threads, config));
        return samples;
      };
      auto med = [](const std::vector<Sample>& s, auto field) {
        std::vector<double> v;
        for (const Sample& x : s) v.push_back(field(x));
        return sfs::median(v);
      };

      const std::vector<Sample> oracle = row(sfs::Mode::Serial, 1);
      const double serial_wall = med(oracle, [](const Sample& s) { return s.wall; });
      const double serial_rss = med(oracle, [](const Sample& s) { return double(s.rss_kib); });

      if (calibrate) {
        const double per_inode = med(oracle, [](const Sample& s) { return s.pass[0] / double(std::max<std::uint64_t>(s.objects[0], 1)); });
        const double per_dirblock = med(oracle, [](const Sample& s) { return s.pass[1] / double(std::max<std::uint64_t>(s.objects[1], 1)); });
        out << "calibration image=" << name << " inode_ns=" << per_inode * 1e9 << " dirblock_ns=" << per_dirblock * 1e9
            << " w_inode=1.0 w_dir=" << per_dirblock / per_inode << '\n';
      }

      for (sfs::Mode mode : mode_list)
        for (std::uint32_t t : thread_counts) {
          if (mode == sfs::Mode::Serial && t != 1) continue;
          const std::vector<Sample> samples = mode == sfs::Mode::Serial ? oracle : row(mode, t);
          bool match = true;
          for (const Sample& s : samples)
            match = match && s.findings == oracle[0].findings && s.exit_code == oracle[0].exit_code;
          mismatches += match ? 0 : 1;
          const double wall = med(samples, [](const Sample& s) { return s.wall; });
          out << "image=" << name << " mode=" << sfs::to_string(mode) << " threads=" << t << " reps=" << reps
              << " wall=" << wall;
          for (std::size_t p = 0; p < 5; ++p)
            out << " pass" << p + 1 << '=' << med(samples, [p](const Sample& s) { return s.pass[p]; });
          const double rss = med(samples, [](const Sample& s) { return double(s.rss_kib); });
          out << " rss_kib=" << static_cast<std::uint64_t>(rss) << " speedup=" << serial_wall / wall
              << " rss_ratio=" << rss / serial_rss << " oracle=" << (match ? "match" : "MISMATCH") << '\n';
        }
    }
  } catch (const std::exception& e) {
    std::cerr << "pbench: " << e.what() << '\n';
    if (workdir.empty()) fs::remove_all(dir);
    return 2;
  }
  if (workdir.empty()) fs::remove_all(dir);
  return mismatches == 0 ? 0 : 1;
}
