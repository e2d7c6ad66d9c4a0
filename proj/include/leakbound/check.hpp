#pragma once

// End-to-end policy checking: synthesize the self-composition driver, unroll,
// encode, solve, and interpret the answer. The negated claim is
// C ∧ assumptions ∧ ¬assertion; a model of it is decoded into concrete inputs
// and replay-validated through the interpreter before we dare call it a
// counterexample. UNSAT becomes VerifiedComplete only when every unwinding
// assertion was discharged first.

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "leakbound/cnf.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/harness.hpp"
#include "leakbound/interp.hpp"
#include "leakbound/solver.hpp"
#include "leakbound/ssa.hpp"
#include "leakbound/typecheck.hpp"
#include "leakbound/unroll.hpp"

namespace leakbound {

struct CheckConfig {
  int unwind = 8;
  bool unwinding_assertions = true;
  SolverConfig solver;
};

struct CheckStats {
  std::uint32_t circuit_nodes = 0;
  int num_vars = 0;        // of the main (property) instance
  size_t num_clauses = 0;  // of the main (property) instance
  SolverStats solver;      // summed over all solver runs
  double solve_seconds = 0.0;
  int solver_runs = 0;
  int unwind_k = 0;
  bool unwinding_proven = false;  // assertions enabled and all discharged
};

// Decoded witness: shared lows, one high tuple and one observation tuple per
// copy, plus the replayed state-update trace. Observation tuples include
// "__return" when the return value is observed.
struct Counterexample {
  int policy = 0;
  std::vector<std::pair<std::string, Object>> lows;
  std::vector<std::vector<std::pair<std::string, Object>>> highs;
  std::vector<std::vector<std::pair<std::string, Object>>> observations;
  Trace trace;
};

enum class VerdictKind { Violated, VerifiedBounded, VerifiedComplete, Vacuous };

inline const char* verdict_name(VerdictKind v) {
  switch (v) {
    case VerdictKind::Violated: return "Violated";
    case VerdictKind::VerifiedBounded: return "VerifiedBounded";
    case VerdictKind::VerifiedComplete: return "VerifiedComplete";
    case VerdictKind::Vacuous: return "Vacuous";
  }
  return "?";
}

struct PolicyCheckResult {
  VerdictKind verdict = VerdictKind::VerifiedBounded;
  std::optional<Counterexample> cex;  // when Violated
  int bound_k = 0;                    // when VerifiedBounded
  int vacuous_prefix = 0;             // when Vacuous: largest feasible m < N
  CheckStats stats;
};

// Distinct outcomes, not verdicts: the bound is too small for the program's
// loops, or the solver hit its conflict budget.
struct InsufficientBound {
  int k = 0;
  CheckStats stats;
};
struct AnalysisUnknown {
  CheckStats stats;
};

using CheckOutcome = std::variant<PolicyCheckResult, InsufficientBound, AnalysisUnknown>;

namespace detail {

struct Encoded {
  DriverProgram dp;
  SsaResult ssa;
  std::vector<BitRef> program_units;   // surface+driver assumes
  std::vector<BitRef> unwinding_facts; // unwinding assertion conditions
  BitRef policy_assert = kTrue;        // conjunction of non-unwinding asserts
  bool has_policy_assert = false;
};

inline Encoded encode_driver(DriverProgram dp, const CheckConfig& cfg) {
  Encoded enc;
  enc.dp = std::move(dp);
  FlattenConfig fc;
  fc.unwind = cfg.unwind;
  fc.unwinding_assertions = cfg.unwinding_assertions;
  StmtList flat = flatten_driver(enc.dp, fc);
  enc.ssa = symbolic_exec(enc.dp, flat);
  enc.program_units = enc.ssa.assumes;
  for (const auto& a : enc.ssa.asserts) {
    if (a.unwinding) {
      enc.unwinding_facts.push_back(a.cond);
    } else {
      enc.policy_assert = enc.ssa.circuit.mk_and(enc.policy_assert, a.cond);
      enc.has_policy_assert = true;
    }
  }
  return enc;
}

inline SolveResult timed_solve(const CnfInstance& cnf, const CheckConfig& cfg,
                               CheckStats& stats) {
  auto t0 = std::chrono::steady_clock::now();
  SolveResult r = solve_cnf(cnf, cfg.solver);
  auto t1 = std::chrono::steady_clock::now();
  stats.solve_seconds += std::chrono::duration<double>(t1 - t0).count();
  stats.solver.decisions += r.stats.decisions;
  stats.solver.propagations += r.stats.propagations;
  stats.solver.conflicts += r.stats.conflicts;
  stats.solver.restarts += r.stats.restarts;
  ++stats.solver_runs;
  return r;
}

inline std::unordered_map<std::uint32_t, bool> model_to_env(const SsaResult& ssa,
                                                            const CnfInstance& cnf,
                                                            const SolveResult& res) {
  std::unordered_map<std::uint32_t, bool> env;
  for (const auto& g : ssa.groups)
    for (auto n : g.nodes) {
      auto it = cnf.node_var.find(n);
      env[n] = it != cnf.node_var.end() && res.model[it->second];
    }
  return env;
}

// Are m distinctions feasible at all? Runs its own bound-sufficiency check;
// when the bound can be escaped under this probe's assumptions, falls back to
// a bounded encoding and reports complete=false.
inline std::pair<SolveStatus, bool> probe_feasible(const Program& prog, const Harness& h,
                                                   int m, const CheckConfig& cfg,
                                                   CheckStats& stats) {
  Encoded enc = encode_driver(driver_for_probe(prog, h, m), cfg);
  std::vector<BitRef> units = enc.program_units;
  if (!enc.unwinding_facts.empty()) {
    BitRef all = kTrue;
    for (const auto& u : enc.unwinding_facts) all = enc.ssa.circuit.mk_and(all, u);
    CnfInstance a = tseitin(enc.ssa.circuit, enc.program_units, {!all});
    SolveResult ra = timed_solve(a, cfg, stats);
    if (ra.status == SolveStatus::Unknown) return {SolveStatus::Unknown, false};
    if (ra.status == SolveStatus::Sat) {
      CheckConfig bounded = cfg;
      bounded.unwinding_assertions = false;
      Encoded be = encode_driver(driver_for_probe(prog, h, m), bounded);
      CnfInstance bc = tseitin(be.ssa.circuit, be.program_units, {});
      SolveResult rb = timed_solve(bc, cfg, stats);
      return {rb.status, false};
    }
    for (const auto& u : enc.unwinding_facts) units.push_back(u);
  }
  CnfInstance c = tseitin(enc.ssa.circuit, units, {});
  SolveResult rc = timed_solve(c, cfg, stats);
  return {rc.status, cfg.unwinding_assertions};
}

}  // namespace detail

// Rebuild concrete inputs from a satisfying assignment and replay every copy
// through the interpreter. A divergence between replayed observations and the
// model's observations is an encoder bug and is raised, never reported.
inline Counterexample decode_counterexample(const Program& prog, const Harness& h,
                                            const detail::Encoded& enc,
                                            const std::vector<bool>& vals) {
  const SsaResult& ssa = enc.ssa;
  const DriverLayout& lay = enc.dp.layout;
  Counterexample cex;
  cex.policy = lay.copies - 1;

  for (const auto& in : h.inputs) {
    if (in.role != Role::Low) continue;
    Object o = make_object(in.type, 0);
    o.bytes = object_bytes(ssa.store.at("l_" + in.name), vals);
    cex.lows.emplace_back(in.name, std::move(o));
  }

  for (int c = 1; c <= lay.copies; ++c) {
    std::vector<Object> args;
    std::vector<std::pair<std::string, Object>> highs;
    size_t hi = 0, li = 0;
    for (const auto& in : h.inputs) {
      std::string var = in.role == Role::High
                            ? lay.high_vars[static_cast<size_t>(c - 1)][hi++]
                            : lay.low_vars[li++];
      Object o = make_object(in.type, 0);
      o.bytes = object_bytes(ssa.store.at(var), vals);
      if (in.role == Role::High) highs.emplace_back(in.name, o);
      args.push_back(std::move(o));
    }
    cex.highs.push_back(std::move(highs));

    std::vector<std::uint64_t> stream;
    for (const auto& g : ssa.groups) {
      if (g.origin != FreeOrigin::Internal || g.copy != c) continue;
      if (!Circuit::read(vals, g.guard)) continue;
      stream.push_back(group_value(g, vals));
    }
    VectorStream vs(stream);
    InterpConfig ic;
    ic.trace = &cex.trace;
    ic.copy_tag = c;
    Interp interp(prog, vs, ic);
    RunResult rr = interp.call(h.entry, std::move(args));
    if (rr.status != RunResult::Status::Ok)
      throw InternalError("counterexample replay aborted: decoded inputs violate "
                          "a program assumption");

    std::vector<std::pair<std::string, Object>> obs;
    for (const auto& out : h.outputs) {
      auto want = object_bytes(ssa.store.at("o" + std::to_string(c) + "_" + out.name), vals);
      const Object& got = rr.outputs.at(out.name);
      if (got.bytes != want)
        throw InternalError("counterexample replay diverged from the model on "
                            "output '" + out.name + "'");
      obs.emplace_back(out.name, got);
    }
    if (h.observes_return) {
      if (!rr.ret) throw InternalError("replay produced no return value");
      Object got = object_from_value(*rr.ret);
      auto want = object_bytes(ssa.store.at(lay.ret_vars[static_cast<size_t>(c - 1)]), vals);
      if (got.bytes != want)
        throw InternalError("counterexample replay diverged from the model on "
                            "the return value");
      obs.emplace_back("__return", std::move(got));
    }
    cex.observations.push_back(std::move(obs));
  }

  // the witness must exhibit the distinctions it claims
  auto tuple_bytes = [&](int idx) {
    std::vector<std::uint8_t> all;
    for (const auto& [name, o] : cex.observations[static_cast<size_t>(idx)])
      all.insert(all.end(), o.bytes.begin(), o.bytes.end());
    return all;
  };
  int n = cex.policy;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (tuple_bytes(i) == tuple_bytes(j))
        throw InternalError("counterexample observations are not pairwise distinct");
  for (int i = 0; i < n; ++i)
    if (tuple_bytes(n) == tuple_bytes(i))
      throw InternalError("counterexample's extra observation repeats an earlier one");
  return cex;
}

// Decide whether `prog` can make more than `n` distinctions visible to the
// observer. Outcomes: a verdict, InsufficientBound when an unwinding assertion
// fails at this k, or AnalysisUnknown when the solver budget runs out.
inline CheckOutcome check_policy(const Program& prog, const Harness& h, int n,
                                 const CheckConfig& cfg = {}) {
  detail::Encoded enc = detail::encode_driver(driver_for_policy(prog, h, n), cfg);
  CheckStats stats;
  stats.circuit_nodes = enc.ssa.circuit.node_count();
  stats.unwind_k = cfg.unwind;

  // bound sufficiency: can any unwinding assertion be violated?
  if (!enc.unwinding_facts.empty()) {
    BitRef all = kTrue;
    for (const auto& u : enc.unwinding_facts) all = enc.ssa.circuit.mk_and(all, u);
    CnfInstance cnf = tseitin(enc.ssa.circuit, enc.program_units, {!all});
    SolveResult r = detail::timed_solve(cnf, cfg, stats);
    if (r.status == SolveStatus::Unknown) return AnalysisUnknown{stats};
    if (r.status == SolveStatus::Sat) return InsufficientBound{cfg.unwind, stats};
  }
  stats.unwinding_proven = cfg.unwinding_assertions;

  if (!enc.has_policy_assert)
    throw InternalError("policy driver lost its assertion");

  std::vector<BitRef> program_units = enc.program_units;
  for (const auto& u : enc.unwinding_facts) program_units.push_back(u);
  CnfInstance cnf = tseitin(enc.ssa.circuit, program_units, {!enc.policy_assert});
  stats.num_vars = cnf.num_vars;
  stats.num_clauses = cnf.clauses.size();
  SolveResult r = detail::timed_solve(cnf, cfg, stats);
  if (r.status == SolveStatus::Unknown) return AnalysisUnknown{stats};

  PolicyCheckResult out;
  out.stats = stats;
  if (r.status == SolveStatus::Sat) {
    auto env = detail::model_to_env(enc.ssa, cnf, r);
    std::vector<bool> vals = ssa_eval(enc.ssa, env);
    out.verdict = VerdictKind::Violated;
    out.cex = decode_counterexample(prog, h, enc, vals);
    return out;
  }

  // UNSAT: check the assumptions alone before claiming verification
  if (n >= 2) {
    CnfInstance feas = tseitin(enc.ssa.circuit, program_units, {});
    SolveResult fr = detail::timed_solve(feas, cfg, out.stats);
    if (fr.status == SolveStatus::Unknown) return AnalysisUnknown{out.stats};
    if (fr.status == SolveStatus::Unsat) {
      // vacuous: walk downward for the largest feasible distinction count
      out.verdict = VerdictKind::Vacuous;
      out.vacuous_prefix = 0;
      for (int m = n - 1; m >= 1; --m) {
        auto [st, complete] = detail::probe_feasible(prog, h, m, cfg, out.stats);
        if (st == SolveStatus::Unknown) return AnalysisUnknown{out.stats};
        if (!complete) out.stats.unwinding_proven = false;
        if (st == SolveStatus::Sat) {
          out.vacuous_prefix = m;
          break;
        }
      }
      return out;
    }
  }
  if (out.stats.unwinding_proven) {
    out.verdict = VerdictKind::VerifiedComplete;
  } else {
    out.verdict = VerdictKind::VerifiedBounded;
    out.bound_k = cfg.unwind;
  }
  return out;
}

// ---- capacity search ----

struct CapacityReport {
  int class_count_found = 1;      // N*
  double lower_bound_bits = 0.0;  // log2(N*)
  bool exact = false;
  std::vector<std::pair<int, std::string>> probes;  // (N, outcome label)
  CheckStats stats;               // summed over probes
};

namespace detail {

struct ProbeOutcome {
  enum Kind { Violated, Verified, VacuousAt, Insufficient, Unknown } kind = Unknown;
  bool complete = false;  // refutation carried unwinding assertions
  int vacuous_m = 0;
};

inline void merge_stats(CheckStats& into, const CheckStats& from) {
  into.solve_seconds += from.solve_seconds;
  into.solver.decisions += from.solver.decisions;
  into.solver.propagations += from.solver.propagations;
  into.solver.conflicts += from.solver.conflicts;
  into.solver.restarts += from.solver.restarts;
  into.solver_runs += from.solver_runs;
  into.circuit_nodes = std::max(into.circuit_nodes, from.circuit_nodes);
  into.num_vars = std::max(into.num_vars, from.num_vars);
  into.num_clauses = std::max(into.num_clauses, from.num_clauses);
}

}  // namespace detail

// Probe rising policies until one is refuted, then binary-search the
// boundary. N* is the largest feasible distinction count; exact when the
// probe refuting N*+1 distinctions carried unwinding assertions.
inline CapacityReport measure_capacity(const Program& prog, const Harness& h,
                                       const CheckConfig& cfg = {}, int n_max = 64) {
  if (n_max < 1) throw AnalysisError("capacity: n_max must be at least 1");
  CapacityReport rep;
  rep.stats.unwind_k = cfg.unwind;
  CheckConfig probe_cfg = cfg;

  auto probe_once = [&](int n) -> detail::ProbeOutcome {
    CheckOutcome out = check_policy(prog, h, n, probe_cfg);
    detail::ProbeOutcome po;
    if (const auto* res = std::get_if<PolicyCheckResult>(&out)) {
      detail::merge_stats(rep.stats, res->stats);
      switch (res->verdict) {
        case VerdictKind::Violated:
          po.kind = detail::ProbeOutcome::Violated;
          rep.probes.emplace_back(n, "violated");
          break;
        case VerdictKind::VerifiedBounded:
        case VerdictKind::VerifiedComplete:
          po.kind = detail::ProbeOutcome::Verified;
          po.complete = res->verdict == VerdictKind::VerifiedComplete;
          rep.probes.emplace_back(n, po.complete ? "verified_complete" : "verified_bounded");
          break;
        case VerdictKind::Vacuous:
          po.kind = detail::ProbeOutcome::VacuousAt;
          po.vacuous_m = res->vacuous_prefix;
          po.complete = res->stats.unwinding_proven;
          rep.probes.emplace_back(n, "vacuous(" + std::to_string(res->vacuous_prefix) + ")");
          break;
      }
      return po;
    }
    if (const auto* ib = std::get_if<InsufficientBound>(&out)) {
      detail::merge_stats(rep.stats, ib->stats);
      rep.probes.emplace_back(n, "insufficient_bound");
      po.kind = detail::ProbeOutcome::Insufficient;
      return po;
    }
    detail::merge_stats(rep.stats, std::get<AnalysisUnknown>(out).stats);
    rep.probes.emplace_back(n, "unknown");
    po.kind = detail::ProbeOutcome::Unknown;
    return po;
  };

  // retry once without unwinding assertions when the bound is escapable;
  // every later answer is bounded-only from then on
  auto probe = [&](int n) -> detail::ProbeOutcome {
    detail::ProbeOutcome po = probe_once(n);
    if (po.kind == detail::ProbeOutcome::Insufficient && probe_cfg.unwinding_assertions) {
      probe_cfg.unwinding_assertions = false;
      po = probe_once(n);
    }
    if (po.kind == detail::ProbeOutcome::Insufficient)
      po.kind = detail::ProbeOutcome::Unknown;
    return po;
  };

  auto finish = [&](int count, bool exact) {
    rep.class_count_found = count;
    rep.lower_bound_bits = std::log2(static_cast<double>(count));
    rep.exact = exact;
    return rep;
  };

  int last_violated = 0;
  int verified_at = 0;
  bool verified_complete = false;
  for (int n = 1; n <= n_max; n = (2 * n > n_max && n < n_max) ? n_max : 2 * n) {
    detail::ProbeOutcome po = probe(n);
    if (po.kind == detail::ProbeOutcome::Violated) {
      last_violated = n;
      if (n == n_max) return finish(n_max + 1, false);  // still feasible at the cap
      continue;
    }
    if (po.kind == detail::ProbeOutcome::VacuousAt)
      return finish(std::max(po.vacuous_m, 1), po.complete);
    if (po.kind == detail::ProbeOutcome::Unknown)
      return finish(last_violated + 1, false);
    verified_at = n;
    verified_complete = po.complete;
    break;
  }

  int lo = last_violated, hi = verified_at;
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    detail::ProbeOutcome po = probe(mid);
    if (po.kind == detail::ProbeOutcome::Violated) {
      lo = mid;
    } else if (po.kind == detail::ProbeOutcome::VacuousAt) {
      return finish(std::max(po.vacuous_m, 1), po.complete);
    } else if (po.kind == detail::ProbeOutcome::Unknown) {
      return finish(lo + 1, false);
    } else {
      hi = mid;
      verified_complete = po.complete;
    }
  }
  return finish(hi, verified_complete);
}

}  // namespace leakbound
