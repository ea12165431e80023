// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfs {

enum class Errc {
  OutOfRange,
  SpecInfeasible,
  NoEligibleTarget,
  UnrecognizedImage,
  MissingParentRecord,
  InvalidArgument,
  Io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sfs
