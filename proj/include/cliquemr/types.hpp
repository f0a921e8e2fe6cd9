#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cliquemr {

/// Abstract machine word (conceptually Theta(log n) bits). All budgets count words.
using Word = std::uint64_t;
/// Node identifiers are 1-based and contiguous.
using NodeId = std::uint32_t;
using Color = std::uint32_t;
using Round = std::uint32_t;

/// Raised when an execution engine detects a violated model constraint
/// (bandwidth, capacity, memory, round limit) or an internal inconsistency.
class EngineFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a post-run verification (properness, bounds, equivalence) fails.
class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cliquemr
