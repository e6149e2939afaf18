#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mgtad {

/// Malformed file content. `location` is a byte offset for binary files and
/// a 1-based record (line) number for JSON-lines files.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& message, std::size_t location)
      : std::runtime_error(message), location_(location) {}

  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

}  // namespace mgtad
