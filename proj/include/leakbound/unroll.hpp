#pragma once

// Flattening: turns the driver body into a loop-free, call-free statement
// list suitable for symbolic execution. Stages, in order:
//
//   1. for-loops desugar into while-loops,
//   2. every call is hoisted into its own declaration, preserving the
//      interpreter's evaluation order (assign values before targets,
//      operands left to right),
//   3. calls to user functions are inlined: scalar parameters bind to fresh
//      locals, aggregate parameters substitute the argument path (safe, the
//      checker rejects aliasing with output arguments), output parameters
//      substitute the pointed-to place; returns lower to a done-flag,
//   4. loops unwind k times, ending in either an unwinding assertion on the
//      negated guard or an assumption cutting deeper paths.
//
// The tree stays type-annotated throughout; nothing here re-runs the checker.

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/builtins.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/typecheck.hpp"

namespace leakbound {

struct FlattenConfig {
  int unwind = 8;
  bool unwinding_assertions = true;
};

class Flattener {
 public:
  explicit Flattener(const Program& prog) : prog_(prog) {}

  StmtList flatten(const StmtList& body, const FlattenConfig& cfg) {
    StmtList out = process_list(body);
    return unwind_list(std::move(out), cfg);
  }

 private:
  const Program& prog_;
  int temp_counter_ = 0;
  int site_counter_ = 0;
  std::map<std::string, StmtList> templates_;  // per function: processed, un-renamed

  // ---- typed node helpers ----

  static ExprPtr tvar(const std::string& name, TypePtr t) {
    Expr e;
    e.node = VarRef{name};
    e.type = std::move(t);
    return make_expr(std::move(e));
  }
  static ExprPtr tlit(std::uint64_t v, TypePtr t) {
    Expr e;
    e.node = IntLit{v};
    e.type = std::move(t);
    return make_expr(std::move(e));
  }
  static ExprPtr tnot(ExprPtr a) {
    Expr e;
    e.node = UnaryExpr{UnOp::LogNot, std::move(a)};
    e.type = make_bool();
    return make_expr(std::move(e));
  }
  static ExprPtr tand(ExprPtr a, ExprPtr b) {
    Expr e;
    e.node = BinaryExpr{BinOp::LAnd, std::move(a), std::move(b)};
    e.type = make_bool();
    return make_expr(std::move(e));
  }

  TypeName spell_type(const TypePtr& t) const {
    TypeName n;
    if (t->kind == TypeKind::Array) {
      n.base = prog_.env.spell(t->element);
      n.array_len = t->length;
    } else {
      n.base = prog_.env.spell(t);
    }
    return n;
  }

  static bool contains_return(const StmtList& body) {
    for (const auto& s : body) {
      bool hit = false;
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ReturnStmt>) hit = true;
            else if constexpr (std::is_same_v<T, IfStmt>)
              hit = contains_return(n.then_body) || contains_return(n.else_body);
            else if constexpr (std::is_same_v<T, WhileStmt>) hit = contains_return(n.body);
            else if constexpr (std::is_same_v<T, ForStmt>) hit = contains_return(n.body);
            else if constexpr (std::is_same_v<T, BlockStmt>) hit = contains_return(n.body);
          },
          s->node);
      if (hit) return true;
    }
    return false;
  }

  static bool contains_call(const Expr& e) {
    bool found = false;
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
      if (x.as<CallExpr>()) {
        found = true;
        return;
      }
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FieldExpr>) walk(*n.base);
            else if constexpr (std::is_same_v<T, IndexExpr>) { walk(*n.base); walk(*n.index); }
            else if constexpr (std::is_same_v<T, DerefExpr>) walk(*n.base);
            else if constexpr (std::is_same_v<T, UnaryExpr>) walk(*n.arg);
            else if constexpr (std::is_same_v<T, BinaryExpr>) { walk(*n.lhs); walk(*n.rhs); }
            else if constexpr (std::is_same_v<T, CastExpr>) walk(*n.arg);
            else if constexpr (std::is_same_v<T, AddrOfExpr>) walk(*n.arg);
            else if constexpr (std::is_same_v<T, AggEqExpr>) { walk(*n.lhs); walk(*n.rhs); }
          },
          x.node);
    };
    walk(e);
    return found;
  }

  // ---- stage 1-3: desugar, hoist, inline ----

  StmtList process_list(const StmtList& in) {
    StmtList out;
    for (const auto& s : in) process_stmt(*s, out);
    return out;
  }

  void process_stmt(const Stmt& s, StmtList& out) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ForStmt>) {
            // for (init; cond; step) B  ==>  { init; while (cond) { B; step } }
            StmtList blk;
            if (n.init) process_stmt(*n.init, blk);
            WhileStmt w;
            w.cond = n.cond ? clone(n.cond) : tlit(1, make_bool());
            w.body = clone(n.body);
            if (n.step) w.body.push_back(clone(n.step));
            Stmt ws;
            ws.node = std::move(w);
            ws.loc = s.loc;
            ws.copy_index = s.copy_index;
            process_stmt(ws, blk);
            Stmt b;
            b.node = BlockStmt{std::move(blk)};
            b.loc = s.loc;
            b.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(b)));
          } else if constexpr (std::is_same_v<T, WhileStmt>) {
            if (contains_call(*n.cond))
              throw AnalysisError("calls in loop conditions are not supported; bind the "
                                  "result to a variable before the loop", s.loc);
            Stmt w;
            w.node = WhileStmt{clone(n.cond), process_list(n.body)};
            w.loc = s.loc;
            w.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(w)));
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            ExprPtr cond = clone(n.cond);
            extract_calls(cond, out, s);
            Stmt i;
            i.node = IfStmt{std::move(cond), process_list(n.then_body),
                            process_list(n.else_body)};
            i.loc = s.loc;
            i.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(i)));
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            Stmt b;
            b.node = BlockStmt{process_list(n.body)};
            b.loc = s.loc;
            b.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(b)));
          } else if constexpr (std::is_same_v<T, DeclStmt>) {
            ExprPtr init = clone(n.init);
            if (init && !expr_as<NondetExpr>(init)) {
              extract_children(init, out, s);
              if (auto* c = expr_as<CallExpr>(init); c && !is_builtin_name(c->callee)) {
                inline_call(std::move(init), &n, s, out);
                return;
              }
            }
            Stmt d;
            d.node = DeclStmt{n.declared, n.name, std::move(init), n.region_extra_bytes};
            d.loc = s.loc;
            d.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(d)));
          } else if constexpr (std::is_same_v<T, AssignStmt>) {
            // the interpreter evaluates the value before resolving the target
            ExprPtr value = clone(n.value);
            ExprPtr target = clone(n.target);
            extract_calls(value, out, s);
            extract_calls(target, out, s);
            Stmt a;
            a.node = AssignStmt{std::move(target), std::move(value)};
            a.loc = s.loc;
            a.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(a)));
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            ExprPtr e = clone(n.expr);
            extract_children(e, out, s);
            auto* c = expr_as<CallExpr>(e);
            if (c && !is_builtin_name(c->callee)) {
              inline_call(std::move(e), nullptr, s, out);
              return;
            }
            Stmt x;
            x.node = ExprStmt{std::move(e)};
            x.loc = s.loc;
            x.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(x)));
          } else if constexpr (std::is_same_v<T, ReturnStmt>) {
            ExprPtr v = clone(n.value);
            if (v) extract_calls(v, out, s);
            Stmt r;
            r.node = ReturnStmt{std::move(v)};
            r.loc = s.loc;
            r.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(r)));
          } else if constexpr (std::is_same_v<T, AssumeStmt>) {
            ExprPtr c = clone(n.cond);
            extract_calls(c, out, s);
            Stmt a;
            a.node = AssumeStmt{std::move(c)};
            a.loc = s.loc;
            a.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(a)));
          } else if constexpr (std::is_same_v<T, AssertStmt>) {
            ExprPtr c = clone(n.cond);
            extract_calls(c, out, s);
            Stmt a;
            a.node = AssertStmt{std::move(c), n.unwinding};
            a.loc = s.loc;
            a.copy_index = s.copy_index;
            out.push_back(make_stmt(std::move(a)));
          }
        },
        s.node);
  }

  // Hoist every call in `e` (bottom-up, evaluation order) into fresh
  // declarations appended to `pre`.
  void extract_calls(ExprPtr& e, StmtList& pre, const Stmt& at) {
    extract_children(e, pre, at);
    hoist_if_call(e, pre, at);
  }

  void extract_children(ExprPtr& e, StmtList& pre, const Stmt& at) {
    if (!e) return;
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, FieldExpr>) {
            extract_calls(n.base, pre, at);
          } else if constexpr (std::is_same_v<T, IndexExpr>) {
            extract_calls(n.base, pre, at);
            extract_calls(n.index, pre, at);
          } else if constexpr (std::is_same_v<T, DerefExpr>) {
            extract_calls(n.base, pre, at);
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            extract_calls(n.arg, pre, at);
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            extract_calls(n.lhs, pre, at);
            extract_calls(n.rhs, pre, at);
          } else if constexpr (std::is_same_v<T, CastExpr>) {
            extract_calls(n.arg, pre, at);
          } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
            extract_calls(n.arg, pre, at);
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            for (auto& a : n.args) extract_calls(a, pre, at);
          } else if constexpr (std::is_same_v<T, AggEqExpr>) {
            extract_calls(n.lhs, pre, at);
            extract_calls(n.rhs, pre, at);
          }
          // IntLit, VarRef, SizeofExpr (unevaluated), NondetExpr: nothing inside
        },
        e->node);
  }

  void hoist_if_call(ExprPtr& e, StmtList& pre, const Stmt& at) {
    auto* c = expr_as<CallExpr>(e);
    if (!c) return;
    if (!e->type) throw InternalError("hoisting a void call used as a value");
    std::string name = "__t" + std::to_string(++temp_counter_);
    TypePtr t = e->type;
    ExprPtr replacement = tvar(name, t);
    Stmt d;
    d.node = DeclStmt{spell_type(t), name, std::move(e), 0};
    d.loc = at.loc;
    d.copy_index = at.copy_index;
    if (auto* dn = d.as<DeclStmt>(); !is_builtin_name(expr_as<CallExpr>(dn->init)->callee)) {
      // user call: expand right here so the temp ends up bound to the result
      inline_call(std::move(dn->init), dn, d, pre);
    } else {
      pre.push_back(make_stmt(std::move(d)));
    }
    e = std::move(replacement);
  }

  // ---- inlining ----

  struct Rename {
    enum Kind { Simple, Path, DerefPath } kind = Simple;
    std::string name;   // Simple
    ExprPtr path;       // Path: aggregate argument; DerefPath: pointed-to place
  };

  const StmtList& get_template(const std::string& fn_name) {
    auto it = templates_.find(fn_name);
    if (it != templates_.end()) return it->second;
    const FunctionDef* fn = prog_.ast.find_function(fn_name);
    if (!fn) throw InternalError("inlining unknown function '" + fn_name + "'");
    StmtList tmpl = process_list(fn->body);  // recursion is checked out earlier
    return templates_.emplace(fn_name, std::move(tmpl)).first->second;
  }

  // Splice the callee body for `call` into `out`. If `into` is non-null the
  // statement was `T x = f(...)`; a declaration binding x to the lowered
  // return value is appended.
  void inline_call(ExprPtr call_expr, const DeclStmt* into, const Stmt& at, StmtList& out) {
    auto* call = expr_as<CallExpr>(call_expr);
    const FuncSig& sig = prog_.sigs.at(call->callee);
    int site = ++site_counter_;
    std::string prefix = call->callee + "#" + std::to_string(site) + "::";

    std::map<std::string, Rename> renames;
    for (size_t i = 0; i < sig.params.size(); ++i) {
      const ParamSig& p = sig.params[i];
      ExprPtr& arg = call->args[i];
      Rename r;
      if (p.is_output) {
        if (auto* a = expr_as<AddrOfExpr>(arg)) {
          r.kind = Rename::DerefPath;
          r.path = clone(a->arg);
        } else {
          // forwarded output parameter; the outer substitution handles it next
          r.kind = Rename::Simple;
          r.name = expr_as<VarRef>(arg)->name;
        }
      } else if (p.type->kind == TypeKind::Record || p.type->kind == TypeKind::Array) {
        r.kind = Rename::Path;
        r.path = clone(arg);
      } else {
        r.kind = Rename::Simple;
        r.name = prefix + p.name;
        Stmt d;
        d.node = DeclStmt{spell_type(p.type), r.name, std::move(arg), 0};
        d.loc = at.loc;
        d.copy_index = at.copy_index;
        out.push_back(make_stmt(std::move(d)));
      }
      renames[p.name] = std::move(r);
    }

    StmtList body = clone(get_template(call->callee));
    apply_renames(body, renames, prefix, at.copy_index);

    std::string done = prefix + "__done";
    std::string retv;
    Stmt dd;
    dd.node = DeclStmt{TypeName{"bool", false, {}}, done, tlit(0, make_bool()), 0};
    dd.loc = at.loc;
    dd.copy_index = at.copy_index;
    out.push_back(make_stmt(std::move(dd)));
    if (sig.ret) {
      retv = prefix + "__ret";
      Stmt rd;
      rd.node = DeclStmt{spell_type(sig.ret), retv, tlit(0, sig.ret), 0};
      rd.loc = at.loc;
      rd.copy_index = at.copy_index;
      out.push_back(make_stmt(std::move(rd)));
    }

    StmtList lowered = lower_returns(std::move(body), done, retv, sig.ret);
    for (auto& s : lowered) out.push_back(std::move(s));

    if (into) {
      Stmt bind;
      bind.node = DeclStmt{into->declared, into->name, tvar(retv, sig.ret),
                           into->region_extra_bytes};
      bind.loc = at.loc;
      bind.copy_index = at.copy_index;
      out.push_back(make_stmt(std::move(bind)));
    }
  }

  void apply_renames(StmtList& body, std::map<std::string, Rename>& renames,
                     const std::string& prefix, int copy) {
    for (auto& sp : body) {
      Stmt& s = *sp;
      s.copy_index = copy;
      std::visit(
          [&](auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, DeclStmt>) {
              rename_expr(n.init, renames);
              Rename r;
              r.kind = Rename::Simple;
              r.name = prefix + n.name;
              n.name = r.name;
              renames[n.name.substr(prefix.size())] = std::move(r);
            } else if constexpr (std::is_same_v<T, AssignStmt>) {
              rename_expr(n.value, renames);
              rename_expr(n.target, renames);
            } else if constexpr (std::is_same_v<T, IfStmt>) {
              rename_expr(n.cond, renames);
              apply_renames(n.then_body, renames, prefix, copy);
              apply_renames(n.else_body, renames, prefix, copy);
            } else if constexpr (std::is_same_v<T, WhileStmt>) {
              rename_expr(n.cond, renames);
              apply_renames(n.body, renames, prefix, copy);
            } else if constexpr (std::is_same_v<T, ForStmt>) {
              throw InternalError("for-loop survived desugaring");
            } else if constexpr (std::is_same_v<T, ReturnStmt>) {
              rename_expr(n.value, renames);
            } else if constexpr (std::is_same_v<T, ExprStmt>) {
              rename_expr(n.expr, renames);
            } else if constexpr (std::is_same_v<T, AssumeStmt>) {
              rename_expr(n.cond, renames);
            } else if constexpr (std::is_same_v<T, AssertStmt>) {
              rename_expr(n.cond, renames);
            } else if constexpr (std::is_same_v<T, BlockStmt>) {
              apply_renames(n.body, renames, prefix, copy);
            }
          },
          s.node);
    }
  }

  void rename_expr(ExprPtr& e, const std::map<std::string, Rename>& renames) {
    if (!e) return;
    // pointer-style accesses through a substituted output parameter rewrite
    // the whole node, so look at those shapes before descending
    if (auto* d = expr_as<DerefExpr>(e)) {
      if (const auto* v = expr_as<VarRef>(d->base)) {
        auto it = renames.find(v->name);
        if (it != renames.end() && it->second.kind == Rename::DerefPath) {
          e = clone(it->second.path);
          return;
        }
      }
    }
    if (auto* fe = expr_as<FieldExpr>(e)) {
      if (fe->arrow) {
        if (const auto* v = expr_as<VarRef>(fe->base)) {
          auto it = renames.find(v->name);
          if (it != renames.end() && it->second.kind == Rename::DerefPath) {
            Expr nf;
            nf.node = FieldExpr{clone(it->second.path), fe->field, /*arrow=*/false};
            nf.loc = e->loc;
            nf.type = e->type;
            e = make_expr(std::move(nf));
            return;
          }
        }
      }
    }
    if (auto* v = expr_as<VarRef>(e)) {
      auto it = renames.find(v->name);
      if (it != renames.end()) {
        const Rename& r = it->second;
        switch (r.kind) {
          case Rename::Simple:
            v->name = r.name;
            return;
          case Rename::Path:
            e = clone(r.path);
            return;
          case Rename::DerefPath: {
            // a bare pointer name only appears forwarded to a call or as a
            // builtin region argument; both accept &place
            Expr a;
            a.node = AddrOfExpr{clone(r.path)};
            a.loc = e->loc;
            a.type = r.path->type;
            e = make_expr(std::move(a));
            return;
          }
        }
      }
      return;
    }
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, FieldExpr>) {
            rename_expr(n.base, renames);
          } else if constexpr (std::is_same_v<T, IndexExpr>) {
            rename_expr(n.base, renames);
            rename_expr(n.index, renames);
          } else if constexpr (std::is_same_v<T, DerefExpr>) {
            rename_expr(n.base, renames);
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            rename_expr(n.arg, renames);
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            rename_expr(n.lhs, renames);
            rename_expr(n.rhs, renames);
          } else if constexpr (std::is_same_v<T, CastExpr>) {
            rename_expr(n.arg, renames);
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            for (auto& a : n.args) rename_expr(a, renames);
          } else if constexpr (std::is_same_v<T, SizeofExpr>) {
            rename_expr(n.of_expr, renames);
          } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
            rename_expr(n.arg, renames);
          } else if constexpr (std::is_same_v<T, AggEqExpr>) {
            rename_expr(n.lhs, renames);
            rename_expr(n.rhs, renames);
          }
        },
        e->node);
  }

  // ---- return lowering ----

  StmtList lower_returns(StmtList in, const std::string& done, const std::string& retv,
                         const TypePtr& ret_type) {
    StmtList out;
    for (size_t idx = 0; idx < in.size(); ++idx) {
      Stmt& s = *in[idx];
      if (auto* r = s.as<ReturnStmt>()) {
        if (!retv.empty() && r->value) {
          Stmt a;
          a.node = AssignStmt{tvar(retv, ret_type), std::move(r->value)};
          a.loc = s.loc;
          a.copy_index = s.copy_index;
          out.push_back(make_stmt(std::move(a)));
        }
        Stmt d;
        d.node = AssignStmt{tvar(done, make_bool()), tlit(1, make_bool())};
        d.loc = s.loc;
        d.copy_index = s.copy_index;
        out.push_back(make_stmt(std::move(d)));
        return out;  // anything after an unconditional return is dead
      }

      bool may = false;
      if (auto* i = s.as<IfStmt>()) {
        may = contains_return(i->then_body) || contains_return(i->else_body);
        i->then_body = lower_returns(std::move(i->then_body), done, retv, ret_type);
        i->else_body = lower_returns(std::move(i->else_body), done, retv, ret_type);
      } else if (auto* w = s.as<WhileStmt>()) {
        may = contains_return(w->body);
        if (may) {
          w->body = lower_returns(std::move(w->body), done, retv, ret_type);
          w->cond = tand(tnot(tvar(done, make_bool())), std::move(w->cond));
        }
      } else if (auto* b = s.as<BlockStmt>()) {
        may = contains_return(b->body);
        b->body = lower_returns(std::move(b->body), done, retv, ret_type);
      }

      out.push_back(std::move(in[idx]));

      if (may && idx + 1 < in.size()) {
        StmtList rest;
        for (size_t j = idx + 1; j < in.size(); ++j) rest.push_back(std::move(in[j]));
        rest = lower_returns(std::move(rest), done, retv, ret_type);
        if (!rest.empty()) {
          Stmt g;
          g.node = IfStmt{tnot(tvar(done, make_bool())), std::move(rest), {}};
          g.loc = s.loc;
          g.copy_index = s.copy_index;
          out.push_back(make_stmt(std::move(g)));
        }
        return out;
      }
    }
    return out;
  }

  // ---- stage 4: unwinding ----

  StmtList unwind_list(StmtList in, const FlattenConfig& cfg) {
    StmtList out;
    for (auto& sp : in) {
      Stmt& s = *sp;
      if (auto* w = s.as<WhileStmt>()) {
        StmtList body = unwind_list(std::move(w->body), cfg);
        StmtList chain;
        {
          // past the last unrolled iteration the guard must be false: assert
          // it (completeness check) or assume it (bounded exploration)
          Stmt t;
          if (cfg.unwinding_assertions)
            t.node = AssertStmt{tnot(clone(w->cond)), /*unwinding=*/true};
          else
            t.node = AssumeStmt{tnot(clone(w->cond))};
          t.loc = s.loc;
          t.copy_index = s.copy_index;
          chain.push_back(make_stmt(std::move(t)));
        }
        for (int r = 0; r < cfg.unwind; ++r) {
          StmtList iter = clone(body);
          for (auto& cs : chain) iter.push_back(std::move(cs));
          Stmt i;
          i.node = IfStmt{clone(w->cond), std::move(iter), {}};
          i.loc = s.loc;
          i.copy_index = s.copy_index;
          chain.clear();
          chain.push_back(make_stmt(std::move(i)));
        }
        for (auto& cs : chain) out.push_back(std::move(cs));
      } else if (auto* i = s.as<IfStmt>()) {
        i->then_body = unwind_list(std::move(i->then_body), cfg);
        i->else_body = unwind_list(std::move(i->else_body), cfg);
        out.push_back(std::move(sp));
      } else if (auto* b = s.as<BlockStmt>()) {
        b->body = unwind_list(std::move(b->body), cfg);
        out.push_back(std::move(sp));
      } else {
        out.push_back(std::move(sp));
      }
    }
    return out;
  }
};

inline StmtList flatten_driver(const DriverProgram& d, const FlattenConfig& cfg) {
  const FunctionDef* drv = d.prog.ast.find_function(kDriverName);
  if (!drv) throw InternalError("driver function missing");
  return Flattener(d.prog).flatten(drv->body, cfg);
}

}  // namespace leakbound
