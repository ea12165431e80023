// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfs/generator.hpp"

namespace sfs {

/// Result of running a child process to completion.
struct ProcessRun {
  int exit_code = -1;          // -signal when killed
  std::string out;             // captured stdout
  double wall_seconds = 0.0;
};

/// fork + execv; stdout is captured, stderr inherited.
ProcessRun spawn(const std::vector<std::string>& argv);

/// VmHWM of the calling process. Unlike wait4's ru_maxrss it starts fresh at
/// exec, so a child's value does not include its parent's footprint.
std::uint64_t peak_rss_kib();

/// Path of a tool installed next to the running executable.
std::filesystem::path sibling_tool(const std::string& name);

/// Writes a generated image to `path` (sparse file) and returns its manifest.
Manifest write_image_file(const std::filesystem::path& path, const ImageSpec& spec);

double median(std::vector<double> v);

}  // namespace sfs
