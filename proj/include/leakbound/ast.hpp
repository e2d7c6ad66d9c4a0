#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "leakbound/diag.hpp"
#include "leakbound/types.hpp"

namespace leakbound {

// Surface type reference exactly as written in the source. Resolution to a
// TypeSpec happens at typecheck (it depends on typedefs and the target arch).
struct TypeName {
  std::string base;                 // "int", "unsigned long", "struct foo", "loff_t", ...
  bool is_pointer = false;          // output parameters only
  std::optional<int> array_len;     // declarator suffix [N]

  bool operator==(const TypeName&) const = default;
};

enum class UnOp { Neg, BitNot, LogNot };
enum class BinOp {
  Add, Sub, Mul, Div, Rem,
  BitAnd, BitOr, BitXor, Shl, Shr,
  Eq, Ne, Lt, Le, Gt, Ge,
  LAnd, LOr,
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct IntLit {
  std::uint64_t value = 0;
};
struct VarRef {
  std::string name;
};
struct FieldExpr {
  ExprPtr base;
  std::string field;
  bool arrow = false;  // p->f vs v.f
};
struct IndexExpr {
  ExprPtr base;
  ExprPtr index;
};
struct DerefExpr {
  ExprPtr base;  // *p, p an output parameter
};
struct UnaryExpr {
  UnOp op;
  ExprPtr arg;
};
struct BinaryExpr {
  BinOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct CastExpr {
  TypeName target;
  ExprPtr arg;
  bool synthesized = false;  // inserted by typecheck for implicit conversions
};
struct CallExpr {
  std::string callee;
  std::vector<ExprPtr> args;
};
struct SizeofExpr {
  std::optional<TypeName> of_type;
  ExprPtr of_expr;  // exactly one of the two is set
};
struct AddrOfExpr {
  ExprPtr arg;  // &lvalue; only as builtin region argument or call argument
};
// Typed nondeterministic source; synthesized by the driver generator for the
// fresh high inputs and the shared low input. Never produced by the parser
// (surface programs use the input_* builtins).
struct NondetExpr {};
// Byte-compare equality of two whole objects, including any trailing pad
// region. Driver-internal; prints as a memcmp call in emitted C.
struct AggEqExpr {
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Expr {
  std::variant<IntLit, VarRef, FieldExpr, IndexExpr, DerefExpr, UnaryExpr,
               BinaryExpr, CastExpr, CallExpr, SizeofExpr, AddrOfExpr,
               NondetExpr, AggEqExpr>
      node;
  SourceLoc loc;
  TypePtr type;  // null until typecheck

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
  template <typename T>
  T* as() {
    return std::get_if<T>(&node);
  }
};

inline ExprPtr make_expr(Expr e) { return std::make_unique<Expr>(std::move(e)); }

// Free-function accessors; usable in dependent contexts where the member
// template would need the 'template' keyword.
template <typename T>
const T* expr_as(const ExprPtr& e) {
  return e ? std::get_if<T>(&e->node) : nullptr;
}
template <typename T>
T* expr_as(ExprPtr& e) {
  return e ? std::get_if<T>(&e->node) : nullptr;
}

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;
using StmtList = std::vector<StmtPtr>;

struct DeclStmt {
  TypeName declared;
  std::string name;
  ExprPtr init;                // optional
  int region_extra_bytes = 0;  // driver-internal: trailing pad attached to the object
};
struct AssignStmt {
  ExprPtr target;  // lvalue
  ExprPtr value;
};
struct IfStmt {
  ExprPtr cond;
  StmtList then_body;
  StmtList else_body;
};
struct WhileStmt {
  ExprPtr cond;
  StmtList body;
};
struct ForStmt {
  StmtPtr init;  // decl or assign; may be null
  ExprPtr cond;  // may be null (treated as true)
  StmtPtr step;  // assign; may be null
  StmtList body;
};
struct ReturnStmt {
  ExprPtr value;  // may be null; falling off the end returns zero
};
struct ExprStmt {
  ExprPtr expr;  // builtin calls for effect
};
struct AssumeStmt {
  ExprPtr cond;
};
struct AssertStmt {
  ExprPtr cond;
  bool unwinding = false;  // negated-loop-guard assertion inserted by unwind
};
struct BlockStmt {
  StmtList body;
};

struct Stmt {
  std::variant<DeclStmt, AssignStmt, IfStmt, WhileStmt, ForStmt, ReturnStmt,
               ExprStmt, AssumeStmt, AssertStmt, BlockStmt>
      node;
  SourceLoc loc;
  int copy_index = 0;  // driver copy this statement was inlined from; 0 = driver/base

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
  template <typename T>
  T* as() {
    return std::get_if<T>(&node);
  }
};

inline StmtPtr make_stmt(Stmt s) { return std::make_unique<Stmt>(std::move(s)); }

struct Param {
  TypeName declared;
  std::string name;
  SourceLoc loc;
};

struct FunctionDef {
  TypeName return_type;
  std::string name;
  std::vector<Param> params;
  StmtList body;
  SourceLoc loc;
};

struct RecordField {
  TypeName declared;
  std::string name;
  SourceLoc loc;
};

struct RecordDecl {
  std::string name;
  std::vector<RecordField> fields;
  SourceLoc loc;
};

struct TypedefDecl {
  TypeName aliased;
  std::string name;
  SourceLoc loc;
};

enum class PragmaKind { High, Low, Observe };

// #pragma leak high h / low l / observe out / observe __return. Attached to
// the next function definition in the file.
struct LeakPragma {
  PragmaKind kind;
  std::string target;
  std::string function;
  SourceLoc loc;

  bool same(const LeakPragma& o) const {
    return kind == o.kind && target == o.target && function == o.function;
  }
};

struct Ast {
  std::vector<RecordDecl> records;
  std::vector<TypedefDecl> typedefs;
  std::vector<FunctionDef> functions;
  std::vector<LeakPragma> pragmas;

  const FunctionDef* find_function(const std::string& name) const {
    for (const auto& f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Clone
// ---------------------------------------------------------------------------

inline ExprPtr clone(const ExprPtr& e);

inline Expr clone_expr(const Expr& e) {
  Expr out;
  out.loc = e.loc;
  out.type = e.type;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntLit> || std::is_same_v<T, VarRef> ||
                      std::is_same_v<T, NondetExpr>) {
          out.node = n;
        } else if constexpr (std::is_same_v<T, FieldExpr>) {
          out.node = FieldExpr{clone(n.base), n.field, n.arrow};
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          out.node = IndexExpr{clone(n.base), clone(n.index)};
        } else if constexpr (std::is_same_v<T, DerefExpr>) {
          out.node = DerefExpr{clone(n.base)};
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          out.node = UnaryExpr{n.op, clone(n.arg)};
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          out.node = BinaryExpr{n.op, clone(n.lhs), clone(n.rhs)};
        } else if constexpr (std::is_same_v<T, CastExpr>) {
          out.node = CastExpr{n.target, clone(n.arg), n.synthesized};
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          CallExpr c;
          c.callee = n.callee;
          for (const auto& a : n.args) c.args.push_back(clone(a));
          out.node = std::move(c);
        } else if constexpr (std::is_same_v<T, SizeofExpr>) {
          SizeofExpr s;
          s.of_type = n.of_type;
          if (n.of_expr) s.of_expr = clone(n.of_expr);
          out.node = std::move(s);
        } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
          out.node = AddrOfExpr{clone(n.arg)};
        } else if constexpr (std::is_same_v<T, AggEqExpr>) {
          out.node = AggEqExpr{clone(n.lhs), clone(n.rhs)};
        }
      },
      e.node);
  return out;
}

inline ExprPtr clone(const ExprPtr& e) {
  if (!e) return nullptr;
  return make_expr(clone_expr(*e));
}

inline StmtPtr clone(const StmtPtr& s);

inline StmtList clone(const StmtList& body) {
  StmtList out;
  out.reserve(body.size());
  for (const auto& s : body) out.push_back(clone(s));
  return out;
}

inline Stmt clone_stmt(const Stmt& s) {
  Stmt out;
  out.loc = s.loc;
  out.copy_index = s.copy_index;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DeclStmt>) {
          out.node = DeclStmt{n.declared, n.name, clone(n.init), n.region_extra_bytes};
        } else if constexpr (std::is_same_v<T, AssignStmt>) {
          out.node = AssignStmt{clone(n.target), clone(n.value)};
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          out.node = IfStmt{clone(n.cond), clone(n.then_body), clone(n.else_body)};
        } else if constexpr (std::is_same_v<T, WhileStmt>) {
          out.node = WhileStmt{clone(n.cond), clone(n.body)};
        } else if constexpr (std::is_same_v<T, ForStmt>) {
          out.node = ForStmt{clone(n.init), clone(n.cond), clone(n.step), clone(n.body)};
        } else if constexpr (std::is_same_v<T, ReturnStmt>) {
          out.node = ReturnStmt{clone(n.value)};
        } else if constexpr (std::is_same_v<T, ExprStmt>) {
          out.node = ExprStmt{clone(n.expr)};
        } else if constexpr (std::is_same_v<T, AssumeStmt>) {
          out.node = AssumeStmt{clone(n.cond)};
        } else if constexpr (std::is_same_v<T, AssertStmt>) {
          out.node = AssertStmt{clone(n.cond), n.unwinding};
        } else if constexpr (std::is_same_v<T, BlockStmt>) {
          out.node = BlockStmt{clone(n.body)};
        }
      },
      s.node);
  return out;
}

inline StmtPtr clone(const StmtPtr& s) {
  if (!s) return nullptr;
  return make_stmt(clone_stmt(*s));
}

inline FunctionDef clone_function(const FunctionDef& f) {
  FunctionDef out;
  out.return_type = f.return_type;
  out.name = f.name;
  out.params = f.params;
  out.body = clone(f.body);
  out.loc = f.loc;
  return out;
}

inline Ast clone_ast(const Ast& a) {
  Ast out;
  out.records = a.records;
  out.typedefs = a.typedefs;
  for (const auto& f : a.functions) out.functions.push_back(clone_function(f));
  out.pragmas = a.pragmas;
  return out;
}

// ---------------------------------------------------------------------------
// Structural equality, ignoring source locations and type annotations.
// ---------------------------------------------------------------------------

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b);

inline bool expr_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, IntLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, VarRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, FieldExpr>) {
          return x.field == y.field && x.arrow == y.arrow && expr_equal(x.base, y.base);
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          return expr_equal(x.base, y.base) && expr_equal(x.index, y.index);
        } else if constexpr (std::is_same_v<T, DerefExpr>) {
          return expr_equal(x.base, y.base);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          return x.op == y.op && expr_equal(x.arg, y.arg);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          return x.op == y.op && expr_equal(x.lhs, y.lhs) && expr_equal(x.rhs, y.rhs);
        } else if constexpr (std::is_same_v<T, CastExpr>) {
          return x.target == y.target && expr_equal(x.arg, y.arg);
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          if (x.callee != y.callee || x.args.size() != y.args.size()) return false;
          for (size_t i = 0; i < x.args.size(); ++i)
            if (!expr_equal(x.args[i], y.args[i])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, SizeofExpr>) {
          return x.of_type == y.of_type && expr_equal(x.of_expr, y.of_expr);
        } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
          return expr_equal(x.arg, y.arg);
        } else if constexpr (std::is_same_v<T, NondetExpr>) {
          return true;
        } else if constexpr (std::is_same_v<T, AggEqExpr>) {
          return expr_equal(x.lhs, y.lhs) && expr_equal(x.rhs, y.rhs);
        }
      },
      a.node);
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return expr_equal(*a, *b);
}

inline bool stmt_equal(const StmtPtr& a, const StmtPtr& b);

inline bool stmt_list_equal(const StmtList& a, const StmtList& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!stmt_equal(a[i], b[i])) return false;
  return true;
}

inline bool stmt_equal(const Stmt& a, const Stmt& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, DeclStmt>) {
          return x.declared == y.declared && x.name == y.name && expr_equal(x.init, y.init);
        } else if constexpr (std::is_same_v<T, AssignStmt>) {
          return expr_equal(x.target, y.target) && expr_equal(x.value, y.value);
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          return expr_equal(x.cond, y.cond) && stmt_list_equal(x.then_body, y.then_body) &&
                 stmt_list_equal(x.else_body, y.else_body);
        } else if constexpr (std::is_same_v<T, WhileStmt>) {
          return expr_equal(x.cond, y.cond) && stmt_list_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, ForStmt>) {
          return stmt_equal(x.init, y.init) && expr_equal(x.cond, y.cond) &&
                 stmt_equal(x.step, y.step) && stmt_list_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, ReturnStmt>) {
          return expr_equal(x.value, y.value);
        } else if constexpr (std::is_same_v<T, ExprStmt>) {
          return expr_equal(x.expr, y.expr);
        } else if constexpr (std::is_same_v<T, AssumeStmt>) {
          return expr_equal(x.cond, y.cond);
        } else if constexpr (std::is_same_v<T, AssertStmt>) {
          return expr_equal(x.cond, y.cond);
        } else if constexpr (std::is_same_v<T, BlockStmt>) {
          return stmt_list_equal(x.body, y.body);
        }
      },
      a.node);
}

inline bool stmt_equal(const StmtPtr& a, const StmtPtr& b) {
  if (!a || !b) return !a && !b;
  return stmt_equal(*a, *b);
}

inline bool ast_equal(const Ast& a, const Ast& b) {
  if (a.records.size() != b.records.size() || a.typedefs.size() != b.typedefs.size() ||
      a.functions.size() != b.functions.size())
    return false;
  for (size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].name != b.records[i].name) return false;
    const auto& fa = a.records[i].fields;
    const auto& fb = b.records[i].fields;
    if (fa.size() != fb.size()) return false;
    for (size_t j = 0; j < fa.size(); ++j)
      if (fa[j].name != fb[j].name || fa[j].declared != fb[j].declared) return false;
  }
  for (size_t i = 0; i < a.typedefs.size(); ++i)
    if (a.typedefs[i].name != b.typedefs[i].name || a.typedefs[i].aliased != b.typedefs[i].aliased)
      return false;
  for (size_t i = 0; i < a.functions.size(); ++i) {
    const auto& f = a.functions[i];
    const auto& g = b.functions[i];
    if (f.name != g.name || f.return_type != g.return_type) return false;
    if (f.params.size() != g.params.size()) return false;
    for (size_t j = 0; j < f.params.size(); ++j)
      if (f.params[j].name != g.params[j].name || f.params[j].declared != g.params[j].declared)
        return false;
    if (!stmt_list_equal(f.body, g.body)) return false;
  }
  if (a.pragmas.size() != b.pragmas.size()) return false;
  for (size_t i = 0; i < a.pragmas.size(); ++i)
    if (!a.pragmas[i].same(b.pragmas[i])) return false;
  return true;
}

}  // namespace leakbound
