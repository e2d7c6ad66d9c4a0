#pragma once

// Differential harness: one program, many inputs. The same input vector is
// pushed through (a) the concrete interpreter, (b) direct evaluation of the
// encoded circuit, and (c) a SAT instance with the input bits pinned as unit
// clauses and the observation forced to the interpreter's answer. All three
// must agree bit-for-bit on the returned value.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakbound/cnf.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/interp.hpp"
#include "leakbound/solver.hpp"
#include "leakbound/ssa.hpp"
#include "leakbound/unroll.hpp"
#include "support/helpers.hpp"

namespace testutil {

class Differential {
 public:
  // holds a reference; the program must outlive the differential
  explicit Differential(const leakbound::Program& prog)
      : prog_(prog), harness_(harness_of(prog)) {
    using namespace leakbound;
    dp_ = build_driver(prog_, harness_, 1, /*with_assert=*/false);
    FlattenConfig fc;
    fc.unwind = 4;
    fc.unwinding_assertions = false;
    StmtList flat = flatten_driver(dp_, fc);
    ssa_ = symbolic_exec(dp_, flat);

    // map entry-point inputs (declaration order) to their free-bit groups
    size_t ih = 0, il = 0;
    for (const auto& in : harness_.inputs) {
      const std::string& var = in.role == Role::High
                                   ? dp_.layout.high_vars[0][ih++]
                                   : dp_.layout.low_vars[il++];
      const FreeGroup* found = nullptr;
      for (const auto& g : ssa_.groups)
        if (g.label == var) {
          found = &g;
          break;
        }
      if (!found) throw std::runtime_error("no free group for input " + in.name);
      input_groups_.push_back(found);
    }
    if (dp_.layout.ret_vars.empty())
      throw std::runtime_error("differential needs a value-returning entry");
    ret_ = &ssa_.store.at(dp_.layout.ret_vars[0]);
  }

  size_t input_count() const { return input_groups_.size(); }
  int input_width(size_t i) const { return input_groups_[i]->width; }

  // concrete run; requires a deterministic program (no input_* draws)
  std::vector<std::uint8_t> interp_bytes(const std::vector<std::uint64_t>& inputs) const {
    using namespace leakbound;
    std::vector<Object> args;
    size_t i = 0;
    for (const auto& in : harness_.inputs) {
      Object o = make_object(in.type);
      write_scalar(o, 0, make_value(in.type, inputs.at(i++)));
      args.push_back(std::move(o));
    }
    VectorStream vs;
    Interp it(prog_, vs);
    RunResult r = it.call(harness_.entry, std::move(args));
    if (r.status != RunResult::Status::Ok)
      throw std::runtime_error("interpreter run did not complete");
    if (!r.ret) throw std::runtime_error("interpreter run returned nothing");
    std::vector<std::uint8_t> out;
    std::uint64_t raw = r.ret->raw;
    for (size_t b = 0; b < ret_->bits.size() / 8; ++b) {
      out.push_back(static_cast<std::uint8_t>(raw & 0xff));
      raw >>= 8;
    }
    return out;
  }

  std::vector<std::uint8_t> circuit_bytes(const std::vector<std::uint64_t>& inputs) const {
    using namespace leakbound;
    std::unordered_map<std::uint32_t, bool> free;
    pin_map(inputs, free);
    std::vector<bool> vals = ssa_eval(ssa_, free);
    return object_bytes(*ret_, vals);
  }

  // Pins every input bit as a unit clause and asserts the expected
  // observation; a correct encoding makes the instance satisfiable and the
  // model reproduces the expectation on every observation bit.
  bool sat_fixed_matches(const std::vector<std::uint64_t>& inputs,
                         const std::vector<std::uint8_t>& expected,
                         std::string* why = nullptr) const {
    using namespace leakbound;
    std::vector<BitRef> pins;
    for (size_t i = 0; i < input_groups_.size(); ++i) {
      const FreeGroup& g = *input_groups_[i];
      for (int b = 0; b < g.width; ++b) {
        BitRef r = BitRef::make(g.nodes[static_cast<size_t>(b)], false);
        pins.push_back((inputs[i] >> b) & 1 ? r : !r);
      }
    }
    std::vector<BitRef> prop;
    for (size_t i = 0; i < ret_->bits.size(); ++i) {
      bool want = (expected[i / 8] >> (i % 8)) & 1;
      BitRef b = ret_->bits[i];
      prop.push_back(want ? b : !b);
    }
    CnfInstance cnf = tseitin(ssa_.circuit, pins, prop);
    SolveResult res = solve_cnf(cnf);
    if (res.status != SolveStatus::Sat) {
      if (why) *why = "pinned instance not satisfiable";
      return false;
    }
    for (size_t i = 0; i < ret_->bits.size(); ++i) {
      bool want = (expected[i / 8] >> (i % 8)) & 1;
      BitRef b = ret_->bits[i];
      bool got;
      if (b.index() == 0) {
        got = b.negated();  // constant node
      } else {
        auto it = cnf.node_var.find(b.index());
        if (it == cnf.node_var.end()) {
          if (why) *why = "observation bit missing from the instance";
          return false;
        }
        got = res.model[static_cast<size_t>(it->second)] != b.negated();
      }
      if (got != want) {
        if (why) *why = "model bit " + std::to_string(i) + " disagrees";
        return false;
      }
    }
    return true;
  }

  const leakbound::SsaResult& ssa() const { return ssa_; }

 private:
  void pin_map(const std::vector<std::uint64_t>& inputs,
               std::unordered_map<std::uint32_t, bool>& free) const {
    for (size_t i = 0; i < input_groups_.size(); ++i) {
      const leakbound::FreeGroup& g = *input_groups_[i];
      for (int b = 0; b < g.width; ++b)
        free[g.nodes[static_cast<size_t>(b)]] = (inputs[i] >> b) & 1;
    }
  }

  const leakbound::Program& prog_;
  leakbound::Harness harness_;
  leakbound::DriverProgram dp_;
  leakbound::SsaResult ssa_;
  std::vector<const leakbound::FreeGroup*> input_groups_;
  const leakbound::ObjectBits* ret_ = nullptr;
};

}  // namespace testutil
