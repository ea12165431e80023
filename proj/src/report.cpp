// SPDX-License-Identifier: Apache-2.0
#include "sfs/report.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>

namespace sfs {
namespace {

constexpr std::array<std::string_view, 14> kCodeNames = {
    "BadInodeChecksum",     "BadMode",         "PointerOutOfRange", "MultiplyClaimedBlock", "BadDirChecksum",
    "BadDirent",            "DanglingDirent",  "DotDotMismatch",    "UnreachableDirectory", "WrongLinksCount",
    "ZeroLinkInUse",        "BlockBitmapMismatch", "InodeBitmapMismatch", "FreeCountMismatch",
};

constexpr std::array<std::string_view, 15> kRepairNames = {
    "None",          "RecomputeChecksum",    "ClearInode",    "ZeroPointer",    "ClearDirent",
    "FixFileType",   "FixDot",               "RewriteDotDot", "TruncateDirBlock", "ReconnectToLostFound",
    "SetLinksCount", "SetBitmapBit",         "ClearBitmapBit", "RewriteSuperblockCount", "NotRepaired",
};

}  // namespace

std::string_view to_string(FindingCode c) noexcept { return kCodeNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Repair r) noexcept { return kRepairNames[static_cast<std::size_t>(r)]; }

std::optional<FindingCode> parse_finding_code(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kCodeNames.size(); ++i)
    if (kCodeNames[i] == s) return static_cast<FindingCode>(i);
  return std::nullopt;
}

std::optional<Repair> parse_repair(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kRepairNames.size(); ++i)
    if (kRepairNames[i] == s) return static_cast<Repair>(i);
  return std::nullopt;
}

bool canonical_less(const Finding& a, const Finding& b) {
  if (a.key() != b.key()) return a.key() < b.key();
  if (a.repair != b.repair) return a.repair < b.repair;
  return a.detail < b.detail;
}

void Report::canonicalize() { std::sort(findings.begin(), findings.end(), canonical_less); }

std::uint64_t Report::count(FindingCode c) const {
  return static_cast<std::uint64_t>(
      std::count_if(findings.begin(), findings.end(), [c](const Finding& f) { return f.code == c; }));
}

std::string format_finding(const Finding& f) {
  std::string out = "pass=" + std::to_string(f.pass) + " code=" + std::string(to_string(f.code)) +
                    " inode=" + std::to_string(f.inode) + " block=" + std::to_string(f.block) +
                    " offset=" + std::to_string(f.offset) + " repair=" + std::string(to_string(f.repair));
  if (!f.detail.empty()) out += " detail=\"" + f.detail + "\"";
  return out;
}

std::string Report::canonical_text() const {
  std::vector<const Finding*> order;
  order.reserve(findings.size());
  for (const Finding& f : findings) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](const Finding* a, const Finding* b) { return canonical_less(*a, *b); });
  std::string out;
  for (const Finding* f : order) {
    out += format_finding(*f);
    out += '\n';
  }
  return out;
}

std::string Report::to_text() const {
  std::string out = canonical_text();
  char line[128];
  for (std::size_t p = 0; p < passes.size(); ++p) {
    std::snprintf(line, sizeof line, "# pass%zu objects=%llu seconds=%.6f\n", p + 1,
                  static_cast<unsigned long long>(passes[p].objects_checked), passes[p].seconds);
    out += line;
  }
  for (const auto& [name, value] : counters) out += "# " + name + "=" + std::to_string(value) + "\n";
  out += "# findings=" + std::to_string(findings.size()) + "\n";
  return out;
}

std::string Report::to_json(int indent) const {
  std::vector<Finding> sorted = findings;
  std::sort(sorted.begin(), sorted.end(), canonical_less);

  nlohmann::ordered_json doc;
  doc["format"] = "sfs-report";
  doc["version"] = 1;
  auto& arr = doc["findings"] = nlohmann::ordered_json::array();
  for (const Finding& f : sorted) {
    arr.push_back({{"pass", f.pass},
                   {"code", to_string(f.code)},
                   {"inode", f.inode},
                   {"block", f.block},
                   {"offset", f.offset},
                   {"repair", to_string(f.repair)},
                   {"detail", f.detail}});
  }
  auto& stats = doc["stats"];
  for (std::size_t p = 0; p < passes.size(); ++p) {
    stats["passes"].push_back({{"pass", p + 1}, {"objects_checked", passes[p].objects_checked},
                               {"seconds", passes[p].seconds}});
  }
  stats["counters"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : counters) stats["counters"][name] = value;
  return doc.dump(indent) + "\n";
}

}  // namespace sfs
