#pragma once

// Driver synthesis for the self-composition check. A policy instance for
// bound N invokes the entry N+1 times on one shared attacker-chosen input and
// fresh secrets, assumes the first N observations pairwise distinct, and
// asserts the last one collides with an earlier one. The assertion fails
// exactly when N+1 mutually distinguishable secrets exist, i.e. when more
// than N output classes are reachable for some attacker input.
//
// A feasibility probe for m is the same construction with m copies, all
// pairwise-distinct assumptions, and no assertion; it is satisfiable iff some
// attacker input induces at least m classes.

#include <functional>
#include <string>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/harness.hpp"
#include "leakbound/typecheck.hpp"

namespace leakbound {

constexpr const char* kDriverName = "__driver";

struct DriverLayout {
  std::string entry;
  int copies = 0;          // entry invocations in this instance
  bool has_assert = false; // policy instance (last copy is the collider)
  std::vector<std::string> low_vars;                // shared; input order
  std::vector<std::vector<std::string>> high_vars;  // [copy][k]; input order
  std::vector<std::vector<std::string>> obs_vars;   // [copy][k]; observed regions
  std::vector<std::string> ret_vars;                // [copy]; empty if entry is void
  bool observes_return = false;
};

struct DriverProgram {
  Program prog;  // source program plus __driver, fully typechecked
  DriverLayout layout;
};

namespace detail {

inline TypeName type_to_typename(const TypeEnv& env, const TypePtr& t) {
  TypeName n;
  if (t->kind == TypeKind::Array) {
    n.base = env.spell(t->element);
    n.array_len = t->length;
  } else {
    n.base = env.spell(t);
  }
  return n;
}

inline void reject_surface_asserts(const Ast& ast) {
  std::function<void(const StmtList&)> walk = [&](const StmtList& body) {
    for (const auto& s : body) {
      if (s->as<AssertStmt>())
        throw HarnessError("__ASSERT is reserved for the analysis; restrict inputs with "
                           "__ASSUME instead", s->loc);
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, IfStmt>) {
              walk(n.then_body);
              walk(n.else_body);
            } else if constexpr (std::is_same_v<T, WhileStmt>) {
              walk(n.body);
            } else if constexpr (std::is_same_v<T, ForStmt>) {
              walk(n.body);
            } else if constexpr (std::is_same_v<T, BlockStmt>) {
              walk(n.body);
            }
          },
          s->node);
    }
  };
  for (const auto& f : ast.functions) walk(f.body);
}

}  // namespace detail

// copies >= 1; with_assert builds the policy shape (copies = N+1), without it
// the feasibility shape (copies = m).
inline DriverProgram build_driver(const Program& src, const Harness& h, int copies,
                                  bool with_assert) {
  if (copies < 1) throw AnalysisError("driver needs at least one copy of the entry");
  if (with_assert && copies < 2)
    throw AnalysisError("a policy instance needs at least two copies");
  if (src.ast.find_function(kDriverName))
    throw HarnessError(std::string("'") + kDriverName + "' is a reserved function name");
  detail::reject_surface_asserts(src.ast);

  const FuncSig& sig = src.sigs.at(h.entry);

  Ast ast = clone_ast(src.ast);
  FunctionDef drv;
  drv.return_type = TypeName{"void", false, {}};
  drv.name = kDriverName;

  DriverLayout lay;
  lay.entry = h.entry;
  lay.copies = copies;
  lay.has_assert = with_assert;
  lay.observes_return = h.observes_return;

  auto nondet_of = [](const TypePtr& t) {
    Expr e;
    e.node = NondetExpr{};
    e.type = t;
    return make_expr(std::move(e));
  };
  auto var = [](const std::string& name) {
    Expr e;
    e.node = VarRef{name};
    return make_expr(std::move(e));
  };
  auto decl = [&](const TypeName& tn, const std::string& name, ExprPtr init, int extra,
                  int copy) {
    Stmt s;
    s.node = DeclStmt{tn, name, std::move(init), extra};
    s.copy_index = copy;
    drv.body.push_back(make_stmt(std::move(s)));
  };

  // shared attacker input, one nondet per low
  for (const auto& in : h.inputs) {
    if (in.role != Role::Low) continue;
    std::string name = "l_" + in.name;
    lay.low_vars.push_back(name);
    decl(detail::type_to_typename(src.env, in.type), name, nondet_of(in.type), 0, 0);
  }

  // per copy: fresh highs, zeroed output regions, one invocation
  for (int c = 1; c <= copies; ++c) {
    std::string ci = std::to_string(c);
    std::vector<std::string> highs, obs;
    for (const auto& in : h.inputs) {
      if (in.role != Role::High) continue;
      std::string name = "h" + ci + "_" + in.name;
      highs.push_back(name);
      decl(detail::type_to_typename(src.env, in.type), name, nondet_of(in.type), 0, c);
    }
    for (const auto& out : h.outputs) {
      std::string name = "o" + ci + "_" + out.name;
      if (out.observed) obs.push_back(name);
      decl(detail::type_to_typename(src.env, out.type), name, nullptr, out.pad_bytes, c);
    }
    lay.high_vars.push_back(std::move(highs));
    lay.obs_vars.push_back(std::move(obs));

    CallExpr call;
    call.callee = h.entry;
    size_t next_in = 0, next_out = 0;
    for (const auto& p : sig.params) {
      if (p.is_output) {
        Expr a;
        a.node = AddrOfExpr{var("o" + ci + "_" + h.outputs[next_out++].name)};
        call.args.push_back(make_expr(std::move(a)));
      } else {
        const HarnessInput& in = h.inputs[next_in++];
        call.args.push_back(var(in.role == Role::Low ? "l_" + in.name
                                                     : "h" + ci + "_" + in.name));
      }
    }
    Expr ce;
    ce.node = std::move(call);
    if (sig.ret) {
      std::string rname = "r" + ci;
      lay.ret_vars.push_back(rname);
      decl(detail::type_to_typename(src.env, sig.ret), rname, make_expr(std::move(ce)), 0, c);
    } else {
      Stmt s;
      s.node = ExprStmt{make_expr(std::move(ce))};
      s.copy_index = c;
      drv.body.push_back(make_stmt(std::move(s)));
    }
  }

  // observation equality between copies i and j (1-based)
  auto obs_eq = [&](int i, int j) -> ExprPtr {
    ExprPtr acc;
    auto add = [&](ExprPtr term) {
      if (!acc) {
        acc = std::move(term);
      } else {
        Expr b;
        b.node = BinaryExpr{BinOp::LAnd, std::move(acc), std::move(term)};
        acc = make_expr(std::move(b));
      }
    };
    for (size_t k = 0; k < lay.obs_vars[static_cast<size_t>(i - 1)].size(); ++k) {
      Expr t;
      t.node = AggEqExpr{var(lay.obs_vars[static_cast<size_t>(i - 1)][k]),
                         var(lay.obs_vars[static_cast<size_t>(j - 1)][k])};
      add(make_expr(std::move(t)));
    }
    if (h.observes_return) {
      Expr t;
      t.node = BinaryExpr{BinOp::Eq, var(lay.ret_vars[static_cast<size_t>(i - 1)]),
                          var(lay.ret_vars[static_cast<size_t>(j - 1)])};
      add(make_expr(std::move(t)));
    }
    return acc;  // harness guarantees at least one observation
  };

  int distinct = with_assert ? copies - 1 : copies;
  for (int i = 1; i <= distinct; ++i) {
    for (int j = i + 1; j <= distinct; ++j) {
      Expr ne;
      ne.node = UnaryExpr{UnOp::LogNot, obs_eq(i, j)};
      Stmt s;
      s.node = AssumeStmt{make_expr(std::move(ne))};
      drv.body.push_back(make_stmt(std::move(s)));
    }
  }

  if (with_assert) {
    ExprPtr any;
    for (int i = 1; i <= distinct; ++i) {
      ExprPtr e = obs_eq(copies, i);
      if (!any) {
        any = std::move(e);
      } else {
        Expr b;
        b.node = BinaryExpr{BinOp::LOr, std::move(any), std::move(e)};
        any = make_expr(std::move(b));
      }
    }
    Stmt s;
    s.node = AssertStmt{std::move(any), /*unwinding=*/false};
    drv.body.push_back(make_stmt(std::move(s)));
  }

  ast.functions.push_back(std::move(drv));

  DriverProgram out;
  out.prog = typecheck(std::move(ast), src.env.arch);
  out.layout = std::move(lay);
  return out;
}

inline DriverProgram driver_for_policy(const Program& src, const Harness& h, int n) {
  if (n < 1) throw AnalysisError("policy bound must be at least 1");
  return build_driver(src, h, n + 1, /*with_assert=*/true);
}

inline DriverProgram driver_for_probe(const Program& src, const Harness& h, int m) {
  return build_driver(src, h, m, /*with_assert=*/false);
}

}  // namespace leakbound
