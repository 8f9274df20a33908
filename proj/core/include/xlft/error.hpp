#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xlft {

// Machine-readable failure categories. The CLI maps each one to its own exit
// code.
enum class ErrorCategory {
  config,        // invalid configuration or hyperparameters
  io,            // file missing, unreadable or unwritable
  parse,         // malformed file contents
  shape,         // tensor shape mismatch
  precondition,  // violated operation precondition
  taxonomy,      // invalid label taxonomy
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Malformed input at a known line of a text file (1-based).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorCategory::parse,
              source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace xlft
