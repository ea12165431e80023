// SPDX-License-Identifier: Apache-2.0
#include "sfs/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sfs/error.hpp"

namespace sfs {

using nlohmann::json;

Config parse_config(const std::string& json_text) {
  Config c;
  try {
    const json j = json::parse(json_text);
    if (auto s = j.find("scheduler"); s != j.end()) {
      c.sched.w_inode = s->value("w_inode", c.sched.w_inode);
      c.sched.w_dir = s->value("w_dir", c.sched.w_dir);
      c.sched.tick_ms = s->value("tick_ms", c.sched.tick_ms);
      c.sched.budget_step = s->value("budget_step", c.sched.budget_step);
    }
    if (auto k = j.find("cache"); k != j.end()) {
      c.cache.capacity_blocks = k->value("capacity_blocks", c.cache.capacity_blocks);
      c.cache.readahead_inode_scan = k->value("readahead_inode_scan", c.cache.readahead_inode_scan);
      c.cache.readahead_dir_scan = k->value("readahead_dir_scan", c.cache.readahead_dir_scan);
    }
    c.inode_range = j.value("inode_range", c.inode_range);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("config: ") + e.what());
  }
  if (c.sched.w_inode <= 0 || c.sched.w_dir <= 0 || c.sched.tick_ms == 0 || c.sched.budget_step == 0 ||
      c.cache.capacity_blocks == 0 || c.cache.readahead_inode_scan == 0 || c.cache.readahead_dir_scan == 0 ||
      c.inode_range == 0)
    throw Error(Errc::InvalidArgument, "config: weights, tick, step, cache sizes and inode_range must be positive");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Config resolve_config(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return load_config(*explicit_path);
  if (const char* env = std::getenv(kConfigEnv); env && *env) return load_config(env);
  return {};
}

std::string to_json(const Config& c) {
  const json j = {
      {"scheduler",
       {{"w_inode", c.sched.w_inode},
        {"w_dir", c.sched.w_dir},
        {"tick_ms", c.sched.tick_ms},
        {"budget_step", c.sched.budget_step}}},
      {"cache",
       {{"capacity_blocks", c.cache.capacity_blocks},
        {"readahead_inode_scan", c.cache.readahead_inode_scan},
        {"readahead_dir_scan", c.cache.readahead_dir_scan}}},
      {"inode_range", c.inode_range},
  };
  return j.dump(2) + "\n";
}

}  // namespace sfs
