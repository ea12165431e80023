// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sfs/block_cache.hpp"
#include "sfs/scheduler.hpp"

namespace sfs {

/// Tunables read from a JSON file; missing keys keep their defaults.
struct Config {
  SchedulerConfig sched;
  CacheConfig cache;
  std::uint32_t inode_range = 2048;
};

inline constexpr const char* kConfigEnv = "PFSCK_CONFIG";

Config parse_config(const std::string& json_text);
/// Throws Error{Io} when unreadable, Error{InvalidArgument} when malformed.
Config load_config(const std::filesystem::path& path);

/// Explicit path first, then $PFSCK_CONFIG; defaults when neither is set.
Config resolve_config(const std::optional<std::filesystem::path>& explicit_path);

std::string to_json(const Config& c);

}  // namespace sfs
