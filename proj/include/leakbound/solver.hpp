#pragma once

// Deterministic CDCL solver: first-UIP clause learning, two-watched literals,
// fixed ascending variable order with phase saving (phases start at false).
// No restarts unless asked for. A conflict budget turns the answer into
// Unknown instead of burning the machine. Every model is re-checked against
// the full clause set before it is returned.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "leakbound/cnf.hpp"
#include "leakbound/diag.hpp"

namespace leakbound {

struct SolverStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t restarts = 0;
};

enum class SolveStatus { Sat, Unsat, Unknown };

struct SolveResult {
  SolveStatus status = SolveStatus::Unknown;
  std::vector<bool> model;  // 1-based; meaningful only when status == Sat
  SolverStats stats;
};

struct SolverConfig {
  std::uint64_t conflict_budget = 0;  // 0 = unlimited
  bool enable_restarts = false;
  std::uint64_t restart_interval = 256;  // conflicts per Luby unit
};

// LEAKBOUND_SOLVER_BUDGET caps the solver's conflicts globally; an explicit
// config value still wins.
inline std::uint64_t solver_budget_from_env() {
  const char* s = std::getenv("LEAKBOUND_SOLVER_BUDGET");
  if (!s || !*s) return 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0') return 0;
  return static_cast<std::uint64_t>(v);
}

class Solver {
 public:
  explicit Solver(const CnfInstance& cnf, SolverConfig cfg = {})
      : cfg_(cfg), num_vars_(cnf.num_vars) {
    if (cfg_.conflict_budget == 0) cfg_.conflict_budget = solver_budget_from_env();
    value_.assign(num_vars_ + 1, kUndef);
    level_.assign(num_vars_ + 1, 0);
    reason_.assign(num_vars_ + 1, kNoReason);
    phase_.assign(num_vars_ + 1, false);
    seen_.assign(num_vars_ + 1, false);
    watches_.assign(2 * (num_vars_ + 1), {});
    for (const auto& cl : cnf.clauses) add_clause(cl);
  }

  SolveResult solve(const CnfInstance& cnf) {
    SolveResult out;
    if (bad_ || propagate() != kNoReason) {
      out.status = SolveStatus::Unsat;
      out.stats = stats_;
      return out;
    }
    std::uint64_t restart_target = next_restart_target();
    std::uint64_t conflicts_at_restart = 0;
    for (;;) {
      int confl = propagate();
      if (confl != kNoReason) {
        ++stats_.conflicts;
        if (decision_level() == 0) {
          out.status = SolveStatus::Unsat;
          break;
        }
        if (cfg_.conflict_budget && stats_.conflicts >= cfg_.conflict_budget) {
          out.status = SolveStatus::Unknown;
          break;
        }
        std::vector<int> learnt;
        int back_level = analyze(confl, learnt);
        backtrack(back_level);
        attach_learnt(learnt);
        if (cfg_.enable_restarts &&
            stats_.conflicts - conflicts_at_restart >= restart_target) {
          ++stats_.restarts;
          conflicts_at_restart = stats_.conflicts;
          restart_target = next_restart_target();
          backtrack(0);
        }
      } else {
        int v = pick_branch_var();
        if (v == 0) {
          out.status = SolveStatus::Sat;
          out.model.assign(num_vars_ + 1, false);
          for (int i = 1; i <= num_vars_; ++i) out.model[i] = value_[i] == kTrueVal;
          verify_model(cnf, out.model);
          break;
        }
        ++stats_.decisions;
        trail_lim_.push_back(static_cast<int>(trail_.size()));
        order_head_saved_.push_back(order_head_);
        enqueue(make_lit(v, phase_[v]), kNoReason);
      }
    }
    out.stats = stats_;
    return out;
  }

 private:
  static constexpr signed char kUndef = -1;
  static constexpr signed char kFalseVal = 0;
  static constexpr signed char kTrueVal = 1;
  static constexpr int kNoReason = -1;

  struct Clause {
    std::vector<int> lits;  // encoded: 2*v for +v, 2*v+1 for -v
  };

  static int make_lit(int var, bool positive) { return 2 * var + (positive ? 0 : 1); }
  static int lit_var(int lit) { return lit >> 1; }
  static bool lit_sign(int lit) { return (lit & 1) == 0; }  // true when positive
  static int lit_neg(int lit) { return lit ^ 1; }

  signed char lit_value(int lit) const {
    signed char v = value_[lit_var(lit)];
    if (v == kUndef) return kUndef;
    return (v == kTrueVal) == lit_sign(lit) ? kTrueVal : kFalseVal;
  }

  void add_clause(const std::vector<int>& dimacs) {
    if (bad_) return;
    std::vector<int> lits;
    lits.reserve(dimacs.size());
    for (int l : dimacs) {
      int v = std::abs(l);
      if (v < 1 || v > num_vars_) throw InternalError("solver: literal out of range");
      lits.push_back(make_lit(v, l > 0));
    }
    if (lits.empty()) {
      bad_ = true;
      return;
    }
    if (lits.size() == 1) {
      signed char val = lit_value(lits[0]);
      if (val == kFalseVal) bad_ = true;
      else if (val == kUndef) enqueue(lits[0], kNoReason);
      return;
    }
    clauses_.push_back({std::move(lits)});
    int ci = static_cast<int>(clauses_.size()) - 1;
    watches_[clauses_[ci].lits[0]].push_back(ci);
    watches_[clauses_[ci].lits[1]].push_back(ci);
  }

  void enqueue(int lit, int reason) {
    int v = lit_var(lit);
    value_[v] = lit_sign(lit) ? kTrueVal : kFalseVal;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(lit);
  }

  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  // Returns the index of a conflicting clause, or kNoReason.
  int propagate() {
    while (qhead_ < trail_.size()) {
      int p = trail_[qhead_++];
      ++stats_.propagations;
      int false_lit = lit_neg(p);
      std::vector<int>& ws = watches_[false_lit];
      size_t keep = 0;
      for (size_t i = 0; i < ws.size(); ++i) {
        int ci = ws[i];
        Clause& cl = clauses_[ci];
        if (cl.lits[0] == false_lit) std::swap(cl.lits[0], cl.lits[1]);
        if (lit_value(cl.lits[0]) == kTrueVal) {
          ws[keep++] = ci;
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < cl.lits.size(); ++k) {
          if (lit_value(cl.lits[k]) != kFalseVal) {
            std::swap(cl.lits[1], cl.lits[k]);
            watches_[cl.lits[1]].push_back(ci);
            moved = true;
            break;
          }
        }
        if (moved) continue;
        ws[keep++] = ci;
        if (lit_value(cl.lits[0]) == kFalseVal) {
          for (size_t j = i + 1; j < ws.size(); ++j) ws[keep++] = ws[j];
          ws.resize(keep);
          qhead_ = trail_.size();
          return ci;
        }
        enqueue(cl.lits[0], ci);
      }
      ws.resize(keep);
    }
    return kNoReason;
  }

  // First-UIP conflict analysis; fills `learnt` with the asserting clause
  // (asserting literal first) and returns the backjump level.
  int analyze(int confl, std::vector<int>& learnt) {
    learnt.clear();
    learnt.push_back(0);  // slot for the asserting literal
    touched_.clear();
    int counter = 0;
    int p = -1;
    size_t trail_pos = trail_.size();
    int cur_level = decision_level();
    for (;;) {
      const Clause& cl = clauses_[confl];
      for (size_t k = (p == -1 ? 0 : 1); k < cl.lits.size(); ++k) {
        int q = cl.lits[k];
        int v = lit_var(q);
        if (!seen_[v] && level_[v] > 0) {
          seen_[v] = true;
          touched_.push_back(v);
          if (level_[v] == cur_level) ++counter;
          else learnt.push_back(q);
        }
      }
      do {
        p = trail_[--trail_pos];
      } while (!seen_[lit_var(p)]);
      seen_[lit_var(p)] = false;
      --counter;
      if (counter == 0) break;
      confl = reason_[lit_var(p)];
      if (confl == kNoReason) throw InternalError("solver: lost the UIP trail");
      // Reason clauses keep their asserted literal first; restore that if a
      // watch swap moved it.
      Clause& rc = clauses_[confl];
      if (rc.lits[0] != p) {
        for (size_t k = 1; k < rc.lits.size(); ++k) {
          if (rc.lits[k] == p) {
            std::swap(rc.lits[0], rc.lits[k]);
            break;
          }
        }
      }
    }
    learnt[0] = lit_neg(p);
    for (int v : touched_) seen_[v] = false;
    int back = 0;
    size_t max_at = 1;
    for (size_t k = 1; k < learnt.size(); ++k) {
      int lv = level_[lit_var(learnt[k])];
      if (lv > back) {
        back = lv;
        max_at = k;
      }
    }
    if (learnt.size() > 1) std::swap(learnt[1], learnt[max_at]);
    return back;
  }

  void attach_learnt(const std::vector<int>& learnt) {
    if (learnt.size() == 1) {
      enqueue(learnt[0], kNoReason);
      return;
    }
    clauses_.push_back({learnt});
    int ci = static_cast<int>(clauses_.size()) - 1;
    watches_[clauses_[ci].lits[0]].push_back(ci);
    watches_[clauses_[ci].lits[1]].push_back(ci);
    enqueue(learnt[0], ci);
  }

  void backtrack(int target) {
    if (decision_level() <= target) return;
    int bound = trail_lim_[target];
    for (int i = static_cast<int>(trail_.size()) - 1; i >= bound; --i) {
      int v = lit_var(trail_[i]);
      phase_[v] = value_[v] == kTrueVal;
      value_[v] = kUndef;
      reason_[v] = kNoReason;
    }
    trail_.resize(bound);
    qhead_ = trail_.size();
    order_head_ = order_head_saved_[target];
    trail_lim_.resize(target);
    order_head_saved_.resize(target);
  }

  int pick_branch_var() {
    while (order_head_ <= num_vars_ && value_[order_head_] != kUndef) ++order_head_;
    return order_head_ <= num_vars_ ? order_head_ : 0;
  }

  std::uint64_t next_restart_target() {
    // Luby sequence 1,1,2,1,1,2,4,... scaled by restart_interval.
    std::uint64_t k = ++restart_index_;
    std::uint64_t size = 1, seq = 0;
    while (size < k + 1) {
      ++seq;
      size = 2 * size + 1;
    }
    while (size - 1 != k) {
      size = (size - 1) / 2;
      --seq;
      k = k % size;
    }
    return cfg_.restart_interval * (std::uint64_t{1} << seq);
  }

  void verify_model(const CnfInstance& cnf, const std::vector<bool>& model) const {
    for (const auto& cl : cnf.clauses) {
      bool ok = false;
      for (int l : cl) {
        int v = std::abs(l);
        if (model[v] == (l > 0)) {
          ok = true;
          break;
        }
      }
      if (!ok) throw InternalError("solver: produced model violates a clause");
    }
  }

  SolverConfig cfg_;
  int num_vars_ = 0;
  bool bad_ = false;
  std::vector<Clause> clauses_;
  std::vector<std::vector<int>> watches_;
  std::vector<signed char> value_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<bool> phase_;
  std::vector<bool> seen_;
  std::vector<int> touched_;
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  std::vector<int> order_head_saved_;
  size_t qhead_ = 0;
  int order_head_ = 1;
  std::uint64_t restart_index_ = 0;
  SolverStats stats_;
};

inline SolveResult solve_cnf(const CnfInstance& cnf, SolverConfig cfg = {}) {
  Solver s(cnf, cfg);
  return s.solve(cnf);
}

}  // namespace leakbound
