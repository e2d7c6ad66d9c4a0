#pragma once

// Report rendering: human-readable text and line-oriented key=value. The
// formats here are frozen by golden tests; change them and the tests shout.
// Exit codes are a total function of the outcome: 0 verified, 1 violated,
// 2 vacuous, 3 insufficient bound, 4 error.

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "leakbound/check.hpp"
#include "leakbound/value.hpp"

namespace leakbound {

enum class ReportFormat { Text, Kv };

struct ReportMeta {
  std::string file;
  std::string entry;
  int policy = 0;
  int unwind = 8;
  bool unwinding_assertions = true;
  int arch_bits = 32;
};

namespace detail {

inline bool is_scalar_object(const Object& o) {
  return o.type && (o.type->kind == TypeKind::SignedInt ||
                    o.type->kind == TypeKind::UnsignedInt ||
                    o.type->kind == TypeKind::Bool);
}

inline std::string object_str(const Object& o) {
  if (is_scalar_object(o)) return value_str(read_scalar(o, 0, o.type));
  return "{" + bytes_hex(o.bytes, 0, o.size()) + "}";
}

// bare value for key=value output: decimal for scalars, packed hex otherwise
inline std::string object_kv(const Object& o) {
  if (is_scalar_object(o)) {
    Value v = read_scalar(o, 0, o.type);
    return is_signed_type(v.type) ? std::to_string(as_signed(v))
                                  : std::to_string(as_unsigned(v));
  }
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : o.bytes) {
    s += digits[b >> 4];
    s += digits[b & 0xf];
  }
  return s;
}

inline std::string seconds_str(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << s;
  return os.str();
}

inline std::string bits_str(double bits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << bits;
  return os.str();
}

inline void stats_text(std::ostream& os, const CheckStats& st) {
  os << "stats: nodes=" << st.circuit_nodes << " vars=" << st.num_vars
     << " clauses=" << st.num_clauses << " solver-runs=" << st.solver_runs
     << " decisions=" << st.solver.decisions
     << " propagations=" << st.solver.propagations
     << " conflicts=" << st.solver.conflicts << " time=" << seconds_str(st.solve_seconds)
     << "s\n";
}

inline void stats_kv(std::ostream& os, const CheckStats& st) {
  os << "nodes=" << st.circuit_nodes << "\n";
  os << "vars=" << st.num_vars << "\n";
  os << "clauses=" << st.num_clauses << "\n";
  os << "solver_runs=" << st.solver_runs << "\n";
  os << "decisions=" << st.solver.decisions << "\n";
  os << "propagations=" << st.solver.propagations << "\n";
  os << "conflicts=" << st.solver.conflicts << "\n";
  os << "restarts=" << st.solver.restarts << "\n";
  os << "time_s=" << seconds_str(st.solve_seconds) << "\n";
}

inline void meta_kv(std::ostream& os, const ReportMeta& m) {
  os << "file=" << m.file << "\n";
  os << "entry=" << m.entry << "\n";
  os << "arch=" << m.arch_bits << "\n";
  os << "unwind=" << m.unwind << "\n";
  os << "unwinding_assertions=" << (m.unwinding_assertions ? 1 : 0) << "\n";
}

inline void trace_text(std::ostream& os, const Trace& trace, const std::string& file) {
  os << "trace:\n";
  int n = 0;
  for (const auto& step : trace) {
    ++n;
    os << "  State " << n << " file " << file << " line " << step.loc.line
       << " function " << step.function << "\n";
    os << "    " << step.function << "::" << step.copy << "::" << step.target << "="
       << step.value << "\n";
  }
}

inline void cex_text(std::ostream& os, const Counterexample& cex,
                     const std::string& file) {
  os << "counterexample (" << cex.policy + 1 << " distinct observations):\n";
  for (const auto& [name, o] : cex.lows)
    os << "  low " << name << " = " << object_str(o) << "\n";
  for (size_t c = 0; c < cex.highs.size(); ++c) {
    for (const auto& [name, o] : cex.highs[c])
      os << "  copy " << c + 1 << ": high " << name << " = " << object_str(o) << "\n";
    for (const auto& [name, o] : cex.observations[c])
      os << "  copy " << c + 1 << ": observed " << name << " = " << object_str(o)
         << "\n";
  }
  trace_text(os, cex.trace, file);
}

inline void cex_kv(std::ostream& os, const Counterexample& cex) {
  for (const auto& [name, o] : cex.lows)
    os << "cex_low_" << name << "=" << object_kv(o) << "\n";
  for (size_t c = 0; c < cex.highs.size(); ++c) {
    for (const auto& [name, o] : cex.highs[c])
      os << "cex_copy" << c + 1 << "_high_" << name << "=" << object_kv(o) << "\n";
    for (const auto& [name, o] : cex.observations[c])
      os << "cex_copy" << c + 1 << "_obs_" << name << "=" << object_kv(o) << "\n";
  }
  os << "trace_steps=" << cex.trace.size() << "\n";
}

}  // namespace detail

inline int exit_code_for(const CheckOutcome& out) {
  if (const auto* r = std::get_if<PolicyCheckResult>(&out)) {
    switch (r->verdict) {
      case VerdictKind::Violated: return 1;
      case VerdictKind::Vacuous: return 2;
      case VerdictKind::VerifiedBounded:
      case VerdictKind::VerifiedComplete: return 0;
    }
  }
  if (std::holds_alternative<InsufficientBound>(out)) return 3;
  return 4;
}

inline int render_check(std::ostream& os, ReportFormat fmt, const ReportMeta& m,
                        const CheckOutcome& out) {
  if (fmt == ReportFormat::Kv) {
    detail::meta_kv(os, m);
    os << "policy=" << m.policy << "\n";
    if (const auto* r = std::get_if<PolicyCheckResult>(&out)) {
      os << "verdict=" << verdict_name(r->verdict) << "\n";
      if (r->verdict == VerdictKind::VerifiedBounded) os << "bound_k=" << r->bound_k << "\n";
      if (r->verdict == VerdictKind::Vacuous)
        os << "vacuous_prefix=" << r->vacuous_prefix << "\n";
      if (r->cex) detail::cex_kv(os, *r->cex);
      detail::stats_kv(os, r->stats);
    } else if (const auto* ib = std::get_if<InsufficientBound>(&out)) {
      os << "outcome=InsufficientBound\n";
      os << "bound_k=" << ib->k << "\n";
      detail::stats_kv(os, ib->stats);
    } else {
      const auto& u = std::get<AnalysisUnknown>(out);
      os << "outcome=Unknown\n";
      detail::stats_kv(os, u.stats);
    }
    return exit_code_for(out);
  }

  if (const auto* r = std::get_if<PolicyCheckResult>(&out)) {
    os << "verdict: " << verdict_name(r->verdict);
    if (r->verdict == VerdictKind::VerifiedBounded) os << " (k=" << r->bound_k << ")";
    if (r->verdict == VerdictKind::Vacuous)
      os << " (at most " << r->vacuous_prefix << " distinction"
         << (r->vacuous_prefix == 1 ? "" : "s") << " feasible)";
    os << "\n";
    if (r->cex) detail::cex_text(os, *r->cex, m.file);
    detail::stats_text(os, r->stats);
  } else if (const auto* ib = std::get_if<InsufficientBound>(&out)) {
    os << "outcome: InsufficientBound (k=" << ib->k
       << "): a loop can exceed the unwinding bound; raise --unwind\n";
    detail::stats_text(os, ib->stats);
  } else {
    const auto& u = std::get<AnalysisUnknown>(out);
    os << "error: solver conflict budget exhausted after " << u.stats.solver.conflicts
       << " conflicts\n";
    detail::stats_text(os, u.stats);
  }
  return exit_code_for(out);
}

inline int render_capacity(std::ostream& os, ReportFormat fmt, const ReportMeta& m,
                           const CapacityReport& rep) {
  if (fmt == ReportFormat::Kv) {
    detail::meta_kv(os, m);
    os << "nstar=" << rep.class_count_found << "\n";
    os << "bits=" << detail::bits_str(rep.lower_bound_bits) << "\n";
    os << "exact=" << (rep.exact ? 1 : 0) << "\n";
    for (const auto& [n, label] : rep.probes) os << "probe_" << n << "=" << label << "\n";
    detail::stats_kv(os, rep.stats);
    return 0;
  }
  os << "capacity: N*=" << rep.class_count_found << ", "
     << detail::bits_str(rep.lower_bound_bits) << " bits, "
     << (rep.exact ? "exact" : "lower bound") << "\n";
  os << "probes:\n";
  for (const auto& [n, label] : rep.probes) os << "  N=" << n << " " << label << "\n";
  detail::stats_text(os, rep.stats);
  return 0;
}

}  // namespace leakbound
