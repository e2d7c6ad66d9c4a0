#pragma once

#include <string>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/typecheck.hpp"

namespace leakbound {

enum class Role { High, Low };

struct HarnessInput {
  std::string name;
  TypePtr type;
  Role role;
};

struct HarnessOutput {
  std::string name;   // output parameter name
  TypePtr type;       // pointee type
  int region_bytes;   // sizeof + trailing pad for structs
  int pad_bytes;      // region_bytes - sizeof
  bool observed;
};

// Everything the driver generator needs to know about the entry point: which
// inputs are secret, which are attacker-chosen, and which outputs the
// attacker sees.
struct Harness {
  std::string entry;
  std::vector<HarnessInput> inputs;     // declaration order
  std::vector<HarnessOutput> outputs;   // declaration order
  bool observes_return = false;
  TypePtr return_type;  // null for void

  bool has_high() const {
    for (const auto& i : inputs)
      if (i.role == Role::High) return true;
    return false;
  }
  bool has_observation() const {
    if (observes_return) return true;
    for (const auto& o : outputs)
      if (o.observed) return true;
    return false;
  }
};

inline Harness resolve_harness(const Program& prog, const std::string& entry) {
  const FunctionDef* f = prog.ast.find_function(entry);
  if (!f) throw HarnessError("no function named '" + entry + "'");
  const FuncSig& sig = prog.sigs.at(entry);

  std::vector<LeakPragma> ps;
  for (const auto& p : prog.ast.pragmas)
    if (p.function == entry) ps.push_back(p);
  if (ps.empty())
    throw HarnessError("function '" + entry + "' has no leak pragmas; annotate every "
                       "input with high or low and mark at least one observation");

  Harness h;
  h.entry = entry;
  h.return_type = sig.ret;

  auto find_pragmas = [&](const std::string& target) {
    std::vector<const LeakPragma*> out;
    for (const auto& p : ps)
      if (p.target == target) out.push_back(&p);
    return out;
  };

  for (const auto& p : sig.params) {
    auto marks = find_pragmas(p.name);
    if (p.is_output) {
      bool observed = false;
      for (const auto* m : marks) {
        if (m->kind != PragmaKind::Observe)
          throw HarnessError("output parameter '" + p.name +
                             "' can only be marked observe", m->loc);
        if (observed)
          throw HarnessError("'" + p.name + "' is marked observe twice", m->loc);
        observed = true;
      }
      HarnessOutput o;
      o.name = p.name;
      o.type = p.type;
      int sz = p.type->size_bytes();
      o.pad_bytes = p.type->kind == TypeKind::Record
                        ? padding_bytes(sz, prog.env.arch.align())
                        : 0;
      o.region_bytes = sz + o.pad_bytes;
      o.observed = observed;
      h.outputs.push_back(std::move(o));
    } else {
      if (marks.empty())
        throw HarnessError("parameter '" + p.name +
                           "' has no role; mark it high or low", f->loc);
      if (marks.size() > 1)
        throw HarnessError("parameter '" + p.name + "' has more than one role",
                           marks[1]->loc);
      if (marks[0]->kind == PragmaKind::Observe)
        throw HarnessError("'" + p.name + "' is an input and cannot be observed",
                           marks[0]->loc);
      HarnessInput in;
      in.name = p.name;
      in.type = p.type;
      in.role = marks[0]->kind == PragmaKind::High ? Role::High : Role::Low;
      h.inputs.push_back(std::move(in));
    }
  }

  auto ret_marks = find_pragmas("__return");
  if (!ret_marks.empty()) {
    if (ret_marks.size() > 1)
      throw HarnessError("'__return' is marked observe twice", ret_marks[1]->loc);
    if (ret_marks[0]->kind != PragmaKind::Observe)
      throw HarnessError("'__return' can only be marked observe", ret_marks[0]->loc);
    if (!sig.ret)
      throw HarnessError("cannot observe '__return' of a void function",
                         ret_marks[0]->loc);
    h.observes_return = true;
  }

  // every pragma must have landed on a parameter or __return
  for (const auto& p : ps) {
    if (p.target == "__return") continue;
    if (!sig.find(p.target))
      throw HarnessError("pragma names '" + p.target + "', which is not a parameter of '" +
                         entry + "'", p.loc);
  }

  if (!h.has_high())
    throw HarnessError("'" + entry + "' has no high input; nothing to protect");
  if (!h.has_observation())
    throw HarnessError("'" + entry + "' has no observation; mark an output parameter or "
                       "__return with observe");
  return h;
}

// Entry selection for the CLI: an explicit name, or the unique annotated
// function.
inline std::string default_entry(const Program& prog) {
  std::string found;
  for (const auto& f : prog.ast.functions) {
    for (const auto& p : prog.ast.pragmas) {
      if (p.function == f.name) {
        if (!found.empty() && found != f.name)
          throw HarnessError("multiple annotated functions ('" + found + "', '" + f.name +
                             "'); pick one with --entry");
        found = f.name;
      }
    }
  }
  if (found.empty())
    throw HarnessError("no annotated function found; add '#pragma leak' annotations");
  return found;
}

}  // namespace leakbound
