// SPDX-License-Identifier: Apache-2.0
#include "sfs/runner.hpp"

#include <array>
#include <charconv>

#include "sfs/engine.hpp"
#include "sfs/error.hpp"

namespace sfs {
namespace {

constexpr std::array<std::pair<Mode, std::string_view>, 6> kModes{{
    {Mode::Serial, "serial"},
    {Mode::DataPara, "datapara"},
    {Mode::SplitEqual, "pipeline-split-equal"},
    {Mode::SplitManual, "pipeline-split-manual"},
    {Mode::Sched, "sched"},
    {Mode::RSched, "rsched"},
}};

std::uint32_t parse_u32(std::string_view s) {
  std::uint32_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(Errc::InvalidArgument, "bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view to_string(Mode m) noexcept {
  for (const auto& [mode, name] : kModes)
    if (mode == m) return name;
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) noexcept {
  for (const auto& [mode, name] : kModes)
    if (name == s) return mode;
  return std::nullopt;
}

std::pair<std::uint32_t, std::uint32_t> parse_split(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::InvalidArgument, "split must look like p1:p2");
  return {parse_u32(s.substr(0, colon)), parse_u32(s.substr(colon + 1))};
}

Report run_check(Image& image, const RunConfig& rc) {
  if (rc.threads == 0) throw Error(Errc::InvalidArgument, "threads must be at least 1");
  CheckOptions opts;
  opts.cache = rc.config.cache;
  opts.inode_range = rc.config.inode_range;
  opts.events = rc.events;

  PipelineOptions po;
  po.sched = rc.config.sched;
  po.trace = rc.trace;
  po.utilization = rc.utilization;
  switch (rc.mode) {
    case Mode::Serial:
      return run_serial(image, opts);
    case Mode::DataPara:
      return run_data_parallel(image, rc.threads, opts);
    case Mode::SplitEqual:
      po.split = PipelineSplit::Equal;
      break;
    case Mode::SplitManual:
      if (rc.p1 + rc.p2 != rc.threads) throw Error(Errc::InvalidArgument, "manual split must sum to --threads");
      po.split = PipelineSplit::Manual;
      po.p1 = rc.p1;
      po.p2 = rc.p2;
      break;
    case Mode::Sched:
      po.split = PipelineSplit::Sched;
      break;
    case Mode::RSched:
      po.split = PipelineSplit::RSched;
      break;
  }
  return run_pipeline(image, rc.threads, po, opts);
}

}  // namespace sfs
