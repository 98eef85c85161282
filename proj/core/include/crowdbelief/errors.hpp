#pragma once

#include <stdexcept>
#include <string>

namespace crowdbelief {

/// File or stream level failure (missing path, malformed header, short read).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// The calibration objective cannot identify a scale because every question
/// resolved the same way.
class separation_error : public std::runtime_error {
 public:
  explicit separation_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace crowdbelief
