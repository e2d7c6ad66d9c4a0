#pragma once

// Shared plumbing for the test binaries: corpus loading, CLI invocation, and
// small adapters around CheckOutcome. Keep this header Catch-free so it can
// be included anywhere.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <variant>

#include "leakbound/check.hpp"
#include "leakbound/harness.hpp"
#include "leakbound/parser.hpp"
#include "leakbound/typecheck.hpp"

#ifndef LEAKBOUND_CORPUS_DIR
#error "the build must define LEAKBOUND_CORPUS_DIR"
#endif

namespace testutil {

inline std::string corpus_path(const std::string& name) {
  return std::string(LEAKBOUND_CORPUS_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline leakbound::Program compile(const std::string& src, int arch_bits = 32) {
  return leakbound::typecheck(leakbound::parse_program(src), leakbound::Arch{arch_bits});
}

inline leakbound::Program load_corpus(const std::string& name, int arch_bits = 32) {
  return compile(read_file(corpus_path(name)), arch_bits);
}

inline leakbound::Harness harness_of(const leakbound::Program& p) {
  return leakbound::resolve_harness(p, leakbound::default_entry(p));
}

// Unwraps the common case; throws on InsufficientBound / AnalysisUnknown so a
// test failure carries a usable message.
inline const leakbound::PolicyCheckResult& as_result(const leakbound::CheckOutcome& o) {
  if (const auto* r = std::get_if<leakbound::PolicyCheckResult>(&o)) return *r;
  if (std::holds_alternative<leakbound::InsufficientBound>(o))
    throw std::runtime_error("outcome was InsufficientBound, expected a verdict");
  throw std::runtime_error("outcome was AnalysisUnknown, expected a verdict");
}

inline leakbound::VerdictKind verdict_of(const leakbound::CheckOutcome& o) {
  return as_result(o).verdict;
}

// ---- CLI process runner ----

struct CliRun {
  int exit_code = -1;
  std::string out;  // stdout and stderr interleaved
};

inline CliRun run_cli(const std::string& args) {
#ifndef LEAKBOUND_CLI_PATH
  throw std::runtime_error("the build must define LEAKBOUND_CLI_PATH");
#else
  CliRun r;
  std::string cmd = std::string(LEAKBOUND_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed for: " + cmd);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int rc = pclose(p);
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
#endif
}

inline bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace testutil
