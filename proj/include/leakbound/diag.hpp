#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace leakbound {

struct SourceLoc {
  int line = 0;  // 1-based; 0 = synthesized node
  int column = 0;

  bool operator==(const SourceLoc&) const = default;
};

// Base for all user-facing analysis failures. Internal invariant breaks use
// InternalError instead so they are never mistaken for a finding.
class Error : public std::runtime_error {
 public:
  Error(std::string what, SourceLoc loc = {})
      : std::runtime_error(std::move(what)), loc_(loc) {}
  SourceLoc loc() const { return loc_; }

 private:
  SourceLoc loc_;
};

class ParseError : public Error {
 public:
  ParseError(std::string what, SourceLoc loc, std::vector<std::string> expected = {})
      : Error(std::move(what), loc), expected_(std::move(expected)) {}
  const std::vector<std::string>& expected_tokens() const { return expected_; }

 private:
  std::vector<std::string> expected_;
};

class TypeError : public Error {
 public:
  using Error::Error;
};

class HarnessError : public Error {
 public:
  using Error::Error;
};

class AnalysisError : public Error {
 public:
  using Error::Error;
};

// Encoder/decoder disagreement with the concrete interpreter, SSA invariant
// breaks, unchecked models: bugs in this tool, not properties of the input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

inline std::string loc_str(SourceLoc loc) {
  return "line " + std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

}  // namespace leakbound
