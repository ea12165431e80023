// SPDX-License-Identifier: Apache-2.0
// pfsck: check and repair an image.
//
// Exit status: 0 clean, 1 corruptions found and repaired, 2 unrecognized
// image, 4 usage or I/O error.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sfs/bench.hpp"
#include "sfs/error.hpp"
#include "sfs/event_log.hpp"
#include "sfs/image.hpp"
#include "sfs/runner.hpp"

namespace {

constexpr int kClean = 0;
constexpr int kRepaired = 1;
constexpr int kUnrecognized = 2;
constexpr int kOperational = 4;

void dump_trace(const std::string& path, const sfs::EventLog& ev, const std::vector<sfs::TickRecord>& ticks) {
  std::ofstream os(path);
  ev.write(os);
  for (const sfs::TickRecord& t : ticks) {
    os << "tick=" << t.index << " budget=" << t.budget;
    for (std::size_t i = 0; i < t.loads.size(); ++i)
      os << " p" << i + 1 << "_units=" << t.loads[i].units() << " p" << i + 1 << "_threads=" << t.threads[i];
    os << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel filesystem checker"};
  std::string image_path, mode_name = "serial", split, config_path, report_format = "text", trace_path;
  std::uint32_t threads = 1;
  app.add_option("image", image_path, "Image file, repaired in place")->required();
  app.add_option("--mode", mode_name, "serial|datapara|pipeline-split-equal|pipeline-split-manual|sched|rsched");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--split", split, "p1:p2 threads for pipeline-split-manual");
  app.add_option("--config", config_path, "JSON config (overrides $PFSCK_CONFIG)");
  app.add_option("--report", report_format, "text|structured")->check(CLI::IsMember({"text", "structured"}));
  app.add_option("--debug-trace", trace_path, "Write the event log and scheduler ticks here");
  CLI11_PARSE(app, argc, argv);

  sfs::EventLog events;
  std::vector<sfs::TickRecord> ticks;
  sfs::Report report;
  try {
    sfs::RunConfig rc;
    const auto mode = sfs::parse_mode(mode_name);
    if (!mode) throw sfs::Error(sfs::Errc::InvalidArgument, "unknown mode '" + mode_name + "'");
    rc.mode = *mode;
    rc.threads = threads;
    if (!split.empty()) std::tie(rc.p1, rc.p2) = sfs::parse_split(split);
    if (rc.mode == sfs::Mode::SplitManual && split.empty())
      throw sfs::Error(sfs::Errc::InvalidArgument, "pipeline-split-manual needs --split");
    rc.config = sfs::resolve_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path));
    if (!trace_path.empty()) {
      rc.events = &events;
      rc.trace = &ticks;
    }

    sfs::Image image = sfs::Image::open(image_path, true);
    if (image.total_blocks() == 0) throw sfs::Error(sfs::Errc::UnrecognizedImage, "image is shorter than one block");
    report = sfs::run_check(image, rc);
    image.flush();
    report.counters["peak_rss_kib"] = sfs::peak_rss_kib();
  } catch (const sfs::Error& e) {
    std::cerr << "pfsck: " << sfs::to_string(e.code()) << ": " << e.what() << '\n';
    if (!trace_path.empty()) dump_trace(trace_path, events, ticks);
    return e.code() == sfs::Errc::UnrecognizedImage ? kUnrecognized : kOperational;
  }

  if (!trace_path.empty()) dump_trace(trace_path, events, ticks);
  std::cout << (report_format == "structured" ? report.to_json() : report.to_text());
  return report.clean() ? kClean : kRepaired;
}
