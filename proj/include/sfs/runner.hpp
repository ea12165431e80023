// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "sfs/config.hpp"
#include "sfs/report.hpp"

namespace sfs {

class EventLog;
class Image;

enum class Mode : std::uint8_t { Serial, DataPara, SplitEqual, SplitManual, Sched, RSched };

std::string_view to_string(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view s) noexcept;

struct RunConfig {
  Mode mode = Mode::Serial;
  std::uint32_t threads = 1;
  std::uint32_t p1 = 0;  // SplitManual
  std::uint32_t p2 = 0;
  Config config;
  EventLog* events = nullptr;
  std::vector<TickRecord>* trace = nullptr;
  std::function<std::unique_ptr<UtilizationProvider>()> utilization;
};

/// "p1:p2". Throws Error{InvalidArgument}.
std::pair<std::uint32_t, std::uint32_t> parse_split(std::string_view s);

/// Runs the checker in the configured mode. Throws Error{InvalidArgument} on a
/// bad thread count or split, Error{UnrecognizedImage} on a bad image.
Report run_check(Image& image, const RunConfig& rc);

}  // namespace sfs
