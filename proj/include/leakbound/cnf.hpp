#pragma once

// Tseitin encoding of a circuit into CNF. Gate clauses are definitional and
// belong to the program part C; the negated-property part is the block of
// unit clauses starting at property_begin. Variables are assigned in
// ascending node order, so the solver's fixed decision order follows circuit
// construction order: free inputs first, then derived gates.

#include <algorithm>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakbound/bitgraph.hpp"
#include "leakbound/diag.hpp"

namespace leakbound {

struct CnfInstance {
  int num_vars = 0;
  std::vector<std::vector<int>> clauses;          // DIMACS literals
  std::unordered_map<std::uint32_t, int> node_var;  // circuit node -> variable
  size_t property_begin = 0;  // clauses from here on encode the negated property
};

namespace detail {

inline void collect_reachable(const Circuit& c, const std::vector<BitRef>& roots,
                              std::vector<std::uint32_t>& order) {
  std::vector<bool> seen(c.node_count(), false);
  std::vector<std::uint32_t> stack;
  for (const auto& r : roots) {
    if (r.index() != 0 && !seen[r.index()]) {
      seen[r.index()] = true;
      stack.push_back(r.index());
    }
  }
  while (!stack.empty()) {
    std::uint32_t n = stack.back();
    stack.pop_back();
    order.push_back(n);
    const Gate& g = c.gate(n);
    if (g.op == GateOp::And || g.op == GateOp::Xor) {
      for (BitRef child : {g.a, g.b}) {
        if (child.index() == 0)
          throw InternalError("cnf: constant feeding a gate escaped folding");
        if (!seen[child.index()]) {
          seen[child.index()] = true;
          stack.push_back(child.index());
        }
      }
    }
  }
  std::sort(order.begin(), order.end());
}

}  // namespace detail

// `program_units` and `property_units` are bits that must each be true; the
// second group forms the negated-property block.
inline CnfInstance tseitin(const Circuit& c, const std::vector<BitRef>& program_units,
                           const std::vector<BitRef>& property_units) {
  std::vector<BitRef> roots;
  roots.reserve(program_units.size() + property_units.size());
  for (const auto& r : program_units) roots.push_back(r);
  for (const auto& r : property_units) roots.push_back(r);

  std::vector<std::uint32_t> order;
  detail::collect_reachable(c, roots, order);

  CnfInstance cnf;
  for (std::uint32_t n : order) cnf.node_var[n] = ++cnf.num_vars;

  auto lit = [&](BitRef r) -> int {
    int v = cnf.node_var.at(r.index());
    return r.negated() ? -v : v;
  };

  for (std::uint32_t n : order) {
    const Gate& g = c.gate(n);
    int v = cnf.node_var.at(n);
    if (g.op == GateOp::And) {
      int a = lit(g.a), b = lit(g.b);
      cnf.clauses.push_back({-v, a});
      cnf.clauses.push_back({-v, b});
      cnf.clauses.push_back({v, -a, -b});
    } else if (g.op == GateOp::Xor) {
      int a = lit(g.a), b = lit(g.b);
      cnf.clauses.push_back({-v, a, b});
      cnf.clauses.push_back({-v, -a, -b});
      cnf.clauses.push_back({v, a, -b});
      cnf.clauses.push_back({v, -a, b});
    }
  }

  auto add_units = [&](const std::vector<BitRef>& units) {
    for (const auto& r : units) {
      if (r == kTrue) continue;               // trivially satisfied
      if (r == kFalse) {
        cnf.clauses.push_back({});            // trivially unsatisfiable
        continue;
      }
      cnf.clauses.push_back({lit(r)});
    }
  };
  add_units(program_units);
  cnf.property_begin = cnf.clauses.size();
  add_units(property_units);
  return cnf;
}

inline void export_dimacs(const CnfInstance& cnf, std::ostream& os) {
  std::vector<std::pair<std::uint32_t, int>> map(cnf.node_var.begin(), cnf.node_var.end());
  std::sort(map.begin(), map.end());
  for (const auto& [node, var] : map) os << "c map n" << node << " " << var << "\n";
  os << "p cnf " << cnf.num_vars << " " << cnf.clauses.size() << "\n";
  for (const auto& cl : cnf.clauses) {
    for (int l : cl) os << l << " ";
    os << "0\n";
  }
}

}  // namespace leakbound
