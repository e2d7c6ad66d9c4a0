#pragma once

// Brute-force oracle: run the entry point concretely over an explicit input
// domain and partition the high inputs by observation. Nondeterministic
// choices (input_* builtins, pad bytes) extend the domain: two executions
// that differ only in a fresh choice still count as distinct points, which is
// exactly how the driver's per-copy free bits behave.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "leakbound/harness.hpp"
#include "leakbound/interp.hpp"
#include "leakbound/typecheck.hpp"
#include "leakbound/value.hpp"

namespace leakbound {

using InputBytes = std::vector<std::uint8_t>;
using InputTuple = std::vector<InputBytes>;  // one entry per input parameter

inline InputBytes scalar_bytes(const TypePtr& t, std::uint64_t raw) {
  Object o = make_object(t);
  write_scalar(o, 0, make_value(t, raw));
  return o.bytes;
}

// Cross product of per-input candidate lists, indexable without
// materialization. The last input varies fastest.
class InputDomain {
 public:
  void add(std::vector<InputBytes> choices) {
    if (choices.empty()) throw AnalysisError("input domain has an empty dimension");
    dims_.push_back(std::move(choices));
  }

  void add_scalar_range(const TypePtr& t, std::uint64_t lo, std::uint64_t hi) {
    std::vector<InputBytes> v;
    for (std::uint64_t x = lo;; ++x) {
      v.push_back(scalar_bytes(t, x));
      if (x == hi) break;
    }
    add(std::move(v));
  }

  // every value of a scalar type; width capped to keep this a desk-scale tool
  void add_scalar_full(const TypePtr& t) {
    if (t->width_bits > 16)
      throw AnalysisError("full domain of a " + std::to_string(t->width_bits) +
                          "-bit input is too large to enumerate; restrict it");
    add_scalar_range(t, 0, width_mask(t->width_bits));
  }

  size_t dims() const { return dims_.size(); }

  std::uint64_t size() const {
    std::uint64_t n = 1;
    for (const auto& d : dims_) n *= d.size();
    return n;
  }

  InputTuple at(std::uint64_t idx) const {
    InputTuple t(dims_.size());
    for (size_t i = dims_.size(); i-- > 0;) {
      const auto& d = dims_[i];
      t[i] = d[idx % d.size()];
      idx /= d.size();
    }
    return t;
  }

 private:
  std::vector<std::vector<InputBytes>> dims_;
};

struct OracleClass {
  std::vector<std::uint8_t> key;  // observation bytes
  std::uint64_t members = 0;      // extended input points
  double weight = 0;              // probability mass (uniform per site)
  InputTuple rep_highs;
  std::vector<std::uint64_t> rep_stream;
};

struct OracleRelation {
  std::vector<OracleClass> classes;  // in order of first occurrence
  std::uint64_t points = 0;          // completed runs
  std::uint64_t blocked = 0;         // runs ending in a failed assumption

  int class_count() const { return static_cast<int>(classes.size()); }

  std::vector<double> class_probs() const {
    double total = 0;
    for (const auto& c : classes) total += c.weight;
    std::vector<double> p;
    for (const auto& c : classes) p.push_back(c.weight / total);
    return p;
  }
};

struct OracleConfig {
  std::uint64_t budget = 1ull << 20;  // max runs across the whole query
  int max_site_bits = 8;              // widest nondet choice we will branch on
  std::uint64_t step_budget = 1ull << 20;
};

namespace detail {

inline void append_obs(std::vector<std::uint8_t>& key, const Harness& h,
                       const RunResult& res) {
  for (const auto& o : h.outputs) {
    if (!o.observed) continue;
    const Object& obj = res.outputs.at(o.name);
    key.insert(key.end(), obj.bytes.begin(), obj.bytes.end());
  }
  if (h.observes_return) {
    std::uint64_t raw = res.ret ? res.ret->raw : 0;
    for (int i = 0; i < 8; ++i) {
      key.push_back(static_cast<std::uint8_t>(raw & 0xff));
      raw >>= 8;
    }
  }
}

}  // namespace detail

// Partition the high domain (extended by nondet choices) by observation, at
// one fixed low tuple. A low whose every run fails an assumption yields an
// empty relation; deciding whether that is an error is the caller's job.
inline OracleRelation enumerate_relation(const Program& prog, const Harness& harness,
                                         const InputTuple& lows,
                                         const InputDomain& high_domain,
                                         OracleConfig cfg = {},
                                         std::uint64_t* budget_used = nullptr) {
  size_t n_high = 0, n_low = 0;
  for (const auto& in : harness.inputs)
    (in.role == Role::High ? n_high : n_low)++;
  if (lows.size() != n_low)
    throw AnalysisError("low tuple has " + std::to_string(lows.size()) +
                        " entries; the entry point takes " + std::to_string(n_low));
  if (high_domain.dims() != n_high)
    throw AnalysisError("high domain has " + std::to_string(high_domain.dims()) +
                        " dimensions; the entry point takes " + std::to_string(n_high));

  OracleRelation rel;
  std::map<std::vector<std::uint8_t>, size_t> index;
  std::uint64_t used = budget_used ? *budget_used : 0;

  const std::uint64_t hn = high_domain.size();
  for (std::uint64_t hi = 0; hi < hn; ++hi) {
    InputTuple highs = high_domain.at(hi);

    // assemble value arguments in declaration order
    std::vector<Object> base_args;
    {
      size_t ih = 0, il = 0;
      for (const auto& in : harness.inputs) {
        const InputBytes& b = in.role == Role::High ? highs[ih++] : lows[il++];
        Object o = make_object(in.type);
        if (static_cast<int>(b.size()) != o.size())
          throw AnalysisError("input '" + in.name + "' needs " +
                              std::to_string(o.size()) + " bytes, got " +
                              std::to_string(b.size()));
        o.bytes = b;
        base_args.push_back(std::move(o));
      }
    }

    std::vector<std::vector<std::uint64_t>> pending;
    pending.push_back({});
    while (!pending.empty()) {
      std::vector<std::uint64_t> prefix = std::move(pending.back());
      pending.pop_back();
      if (++used > cfg.budget)
        throw AnalysisError("oracle budget of " + std::to_string(cfg.budget) +
                            " runs exceeded; restrict the domain or raise the budget");
      VectorStream stream(prefix);
      Interp interp(prog, stream, InterpConfig{cfg.step_budget, nullptr, 0});
      std::vector<Object> args;
      for (const auto& a : base_args) args.push_back(a);
      try {
        RunResult res = interp.call(harness.entry, std::move(args));
        rel.points++;
        double w = 1.0 / static_cast<double>(hn);
        for (int bits : stream.widths()) w /= std::pow(2.0, bits);
        if (res.status == RunResult::Status::AssumeFail) {
          rel.blocked++;
          continue;
        }
        if (res.status == RunResult::Status::AssertFail)
          throw AnalysisError("an assertion failed during oracle enumeration",
                              res.fail_loc);
        std::vector<std::uint8_t> key;
        detail::append_obs(key, harness, res);
        auto it = index.find(key);
        if (it == index.end()) {
          index[key] = rel.classes.size();
          OracleClass c;
          c.key = key;
          c.members = 1;
          c.weight = w;
          c.rep_highs = highs;
          c.rep_stream = prefix;
          rel.classes.push_back(std::move(c));
        } else {
          rel.classes[it->second].members++;
          rel.classes[it->second].weight += w;
        }
      } catch (const StreamExhausted& ex) {
        used--;  // not a completed run; branching replaces it
        if (ex.bits > cfg.max_site_bits)
          throw AnalysisError("a nondeterministic choice of " + std::to_string(ex.bits) +
                              " bits is too wide to enumerate");
        std::uint64_t n = 1ull << ex.bits;
        for (std::uint64_t v = n; v-- > 0;) {
          std::vector<std::uint64_t> next = prefix;
          next.push_back(v);
          pending.push_back(std::move(next));
        }
      }
    }
  }
  if (budget_used) *budget_used = used;
  return rel;
}

struct CapacityOracle {
  InputTuple best_low;
  int class_count = 0;
  OracleRelation best_rel;
};

// Maximize the class count over attacker-chosen lows; ties keep the first
// low in domain order.
inline CapacityOracle oracle_capacity(const Program& prog, const Harness& harness,
                                      const InputDomain& low_domain,
                                      const InputDomain& high_domain,
                                      OracleConfig cfg = {}) {
  CapacityOracle best;
  std::uint64_t used = 0;
  const std::uint64_t ln = low_domain.size();
  for (std::uint64_t li = 0; li < ln; ++li) {
    InputTuple lows = low_domain.at(li);
    OracleRelation rel =
        enumerate_relation(prog, harness, lows, high_domain, cfg, &used);
    if (rel.class_count() > best.class_count) {
      best.best_low = lows;
      best.class_count = rel.class_count();
      best.best_rel = std::move(rel);
    }
  }
  return best;
}

}  // namespace leakbound
