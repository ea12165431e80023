// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "sfs/bench.hpp"
#include "sfs/checker.hpp"
#include "sfs/config.hpp"
#include "sfs/corrupt.hpp"
#include "sfs/error.hpp"
#include "sfs/runner.hpp"

using namespace sfs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("sfs-cli-" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ProcessRun tool(const char* exe, std::vector<std::string> args) {
  args.insert(args.begin(), exe);
  return spawn(args);
}

std::string strip_stats(const std::string& text) {
  std::string out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (line.empty() || line[0] != '#') out += line + '\n';
  return out;
}

}  // namespace

TEST_CASE("shipped config matches the built-in defaults") {
  const Config shipped = load_config(fs::path(SFS_SOURCE_DIR) / "config" / "default.json");
  const Config builtin;
  CHECK(to_json(shipped) == to_json(builtin));
}

TEST_CASE("config parsing") {
  const Config c = parse_config(R"({"scheduler": {"w_dir": 2.5, "tick_ms": 3}, "inode_range": 64})");
  CHECK(c.sched.w_dir == 2.5);
  CHECK(c.sched.tick_ms == 3);
  CHECK(c.sched.w_inode == 1.0);
  CHECK(c.inode_range == 64);
  CHECK(parse_config(to_json(c)).sched.w_dir == 2.5);
  CHECK_THROWS_AS(parse_config("{"), Error);
  CHECK_THROWS_AS(parse_config(R"({"scheduler": {"tick_ms": 0}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"cache": {"capacity_blocks": "big"}})"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("config path resolution") {
  TempDir dir;
  const fs::path a = dir.path / "a.json", b = dir.path / "b.json";
  std::ofstream(a) << R"({"inode_range": 111})";
  std::ofstream(b) << R"({"inode_range": 222})";
  ::unsetenv(kConfigEnv);
  CHECK(resolve_config(std::nullopt).inode_range == Config{}.inode_range);
  ::setenv(kConfigEnv, a.c_str(), 1);
  CHECK(resolve_config(std::nullopt).inode_range == 111);
  CHECK(resolve_config(b).inode_range == 222);
  ::unsetenv(kConfigEnv);
}

TEST_CASE("mode names and splits") {
  for (Mode m : {Mode::Serial, Mode::DataPara, Mode::SplitEqual, Mode::SplitManual, Mode::Sched, Mode::RSched})
    CHECK(parse_mode(to_string(m)) == m);
  CHECK_FALSE(parse_mode("fast"));
  CHECK(parse_split("3:1") == std::pair<std::uint32_t, std::uint32_t>{3, 1});
  CHECK_THROWS_AS(parse_split("3"), Error);
  CHECK_THROWS_AS(parse_split("a:1"), Error);

  auto built = build_image(sized_spec(100, 10, 1, 1));
  RunConfig rc;
  rc.mode = Mode::SplitManual;
  rc.threads = 4;
  rc.p1 = 2;
  rc.p2 = 1;
  CHECK_THROWS_AS(run_check(built.image, rc), Error);
  rc.threads = 0;
  rc.mode = Mode::DataPara;
  CHECK_THROWS_AS(run_check(built.image, rc), Error);
}

TEST_CASE("sized_spec builds clean images") {
  for (auto [files, dirs, mean] : {std::tuple{0ull, 0ull, 1u}, {95ull, 1ull, 2u}, {1000ull, 1000ull, 1u},
                                   {300ull, 3ull, 14u}}) {
    auto built = build_image(sized_spec(files, dirs, mean, 4));
    CHECK(run_serial(built.image).clean());
  }
}

TEST_CASE("command-line round trip") {
  TempDir dir;
  const std::string img = (dir.path / "a.img").string();

  ProcessRun r = tool(PMKFS, {img, "--files", "950", "--dirs", "10", "--seed", "2"});
  REQUIRE(r.exit_code == 0);
  std::ifstream mf(img + ".manifest");
  const Manifest m = Manifest::read(mf);
  CHECK(m.count(FileType::Directory) == 10 + 2);
  CHECK(m.count(FileType::Regular) + m.count(FileType::Symlink) == 950);

  CHECK(tool(PFSCK, {img, "--mode", "sched", "--threads", "4"}).exit_code == 0);
  REQUIRE(tool(PCORRUPT, {img, "--plan", "InodeBadLinks:2,DirentBadInode:1,BitmapBlockFlip:1", "--seed", "9"})
              .exit_code == 0);
  fs::copy_file(img, img + ".copy");

  const ProcessRun serial = tool(PFSCK, {img, "--report", "structured"});
  CHECK(serial.exit_code == 1);
  const ProcessRun sched = tool(PFSCK, {img + ".copy", "--mode", "sched", "--threads", "4", "--report", "structured"});
  CHECK(sched.exit_code == 1);
  CHECK(nlohmann::json::parse(serial.out)["findings"] == nlohmann::json::parse(sched.out)["findings"]);

  const ProcessRun again = tool(PFSCK, {img, "--mode", "datapara", "--threads", "2"});
  CHECK(again.exit_code == 0);
  CHECK(strip_stats(again.out).empty());

  SUBCASE("ledger restore undoes the damage") {
    const std::string img2 = (dir.path / "b.img").string();
    REQUIRE(tool(PMKFS, {img2, "--files", "200", "--dirs", "20"}).exit_code == 0);
    const auto before = Image::open(img2, false).snapshot();
    REQUIRE(tool(PCORRUPT, {img2, "--plan", "OrphanDirectory:1,InodeBadMode:1"}).exit_code == 0);
    CHECK(Image::open(img2, false).snapshot() != before);
    REQUIRE(tool(PCORRUPT, {img2, "--restore"}).exit_code == 0);
    CHECK(Image::open(img2, false).snapshot() == before);
  }
}

TEST_CASE("command-line edge cases") {
  TempDir dir;
  const std::string empty = (dir.path / "e.img").string();
  REQUIRE(tool(PMKFS, {empty, "--files", "0", "--dirs", "0"}).exit_code == 0);
  CHECK(tool(PFSCK, {empty}).exit_code == 0);

  const std::string trunc = (dir.path / "t.img").string();
  std::ofstream(trunc) << std::string(100, 'x');
  CHECK(tool(PFSCK, {trunc}).exit_code == 2);

  const std::string junk = (dir.path / "j.img").string();
  std::ofstream(junk) << std::string(8 * 4096, 'x');
  CHECK(tool(PFSCK, {junk, "--mode", "sched", "--threads", "4"}).exit_code == 2);

  CHECK(tool(PMKFS, {(dir.path / "x.img").string(), "--files", "100", "--inodes", "10"}).exit_code != 0);
  CHECK_FALSE(fs::exists(dir.path / "x.img"));
  CHECK(tool(PFSCK, {empty, "--mode", "pipeline-split-manual", "--threads", "4", "--split", "4:0"}).exit_code == 4);
  CHECK(tool(PFSCK, {empty, "--mode", "bogus"}).exit_code == 4);

  const std::string trace = (dir.path / "trace.txt").string();
  CHECK(tool(PFSCK, {empty, "--mode", "sched", "--threads", "2", "--debug-trace", trace}).exit_code == 0);
  std::ifstream tin(trace);
  const std::string text((std::istreambuf_iterator<char>(tin)), {});
  CHECK(text.find("event=pass1-closed") != std::string::npos);
  CHECK(text.find("tick=0 budget=2") != std::string::npos);
}
