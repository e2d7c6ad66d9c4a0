#pragma once

// C-style pretty printer for the AST. Output reparses to a structurally equal
// tree, and the driver emitter reuses it to produce a standalone translation
// unit for external tools.

#include <sstream>
#include <string>

#include "leakbound/ast.hpp"

namespace leakbound {

inline const char* unop_str(UnOp op) {
  switch (op) {
    case UnOp::Neg: return "-";
    case UnOp::BitNot: return "~";
    case UnOp::LogNot: return "!";
  }
  return "?";
}

inline const char* binop_str(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Rem: return "%";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::BitXor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::LAnd: return "&&";
    case BinOp::LOr: return "||";
  }
  return "?";
}

// Binding strength, C precedence table. Higher binds tighter.
inline int binop_prec(BinOp op) {
  switch (op) {
    case BinOp::LOr: return 1;
    case BinOp::LAnd: return 2;
    case BinOp::BitOr: return 3;
    case BinOp::BitXor: return 4;
    case BinOp::BitAnd: return 5;
    case BinOp::Eq:
    case BinOp::Ne: return 6;
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 7;
    case BinOp::Shl:
    case BinOp::Shr: return 8;
    case BinOp::Add:
    case BinOp::Sub: return 9;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Rem: return 10;
  }
  return 0;
}

constexpr int kUnaryPrec = 11;
constexpr int kPostfixPrec = 12;
constexpr int kPrimaryPrec = 13;

class Printer {
 public:
  explicit Printer(std::ostream& os) : os_(os) {}

  void print_type(const TypeName& t) {
    os_ << t.base;
    if (t.is_pointer) os_ << " *";
  }

  void print_expr(const Expr& e, int parent_prec = 0) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit>) {
            // Values above the signed 64-bit range need a suffix to round-trip
            // through a C compiler without a warning; ours reads them the same.
            os_ << n.value;
            if (n.value > 0x7fffffffffffffffULL) os_ << "u";
          } else if constexpr (std::is_same_v<T, VarRef>) {
            os_ << n.name;
          } else if constexpr (std::is_same_v<T, FieldExpr>) {
            print_expr(*n.base, kPostfixPrec);
            os_ << (n.arrow ? "->" : ".") << n.field;
          } else if constexpr (std::is_same_v<T, IndexExpr>) {
            print_expr(*n.base, kPostfixPrec);
            os_ << "[";
            print_expr(*n.index, 0);
            os_ << "]";
          } else if constexpr (std::is_same_v<T, DerefExpr>) {
            maybe_paren(parent_prec > kUnaryPrec, [&] {
              os_ << "*";
              print_expr(*n.base, kUnaryPrec);
            });
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            maybe_paren(parent_prec > kUnaryPrec, [&] {
              os_ << unop_str(n.op);
              // -(-x) must not print as --x
              bool pad = n.op == UnOp::Neg && starts_with_minus(*n.arg);
              if (pad) os_ << " ";
              print_expr(*n.arg, kUnaryPrec);
            });
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            int prec = binop_prec(n.op);
            maybe_paren(parent_prec > prec, [&] {
              print_expr(*n.lhs, prec);
              os_ << " " << binop_str(n.op) << " ";
              print_expr(*n.rhs, prec + 1);  // left associative
            });
          } else if constexpr (std::is_same_v<T, CastExpr>) {
            maybe_paren(parent_prec > kUnaryPrec, [&] {
              os_ << "(";
              print_type(n.target);
              os_ << ")";
              print_expr(*n.arg, kUnaryPrec);
            });
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            os_ << n.callee << "(";
            for (size_t i = 0; i < n.args.size(); ++i) {
              if (i) os_ << ", ";
              print_expr(*n.args[i], 0);
            }
            os_ << ")";
          } else if constexpr (std::is_same_v<T, SizeofExpr>) {
            os_ << "sizeof(";
            if (n.of_type) {
              print_type(*n.of_type);
            } else {
              print_expr(*n.of_expr, 0);
            }
            os_ << ")";
          } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
            maybe_paren(parent_prec > kUnaryPrec, [&] {
              os_ << "&";
              print_expr(*n.arg, kUnaryPrec);
            });
          } else if constexpr (std::is_same_v<T, NondetExpr>) {
            // Undefined external function; bounded model checkers treat its
            // return value as a fresh free variable, which is exactly the
            // intended reading.
            os_ << "nondet_" << nondet_suffix(e.type) << "()";
          } else if constexpr (std::is_same_v<T, AggEqExpr>) {
            int len = object_print_bytes(*n.lhs);
            maybe_paren(parent_prec > 6, [&] {
              os_ << "memcmp(&";
              print_expr(*n.lhs, kUnaryPrec);
              os_ << ", &";
              print_expr(*n.rhs, kUnaryPrec);
              os_ << ", " << len << ") == 0";
            });
          }
        },
        e.node);
  }

  void print_stmt(const Stmt& s, int indent) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            pad(indent);
            os_ << n.declared.base << " ";
            if (n.declared.is_pointer) os_ << "*";
            os_ << n.name;
            if (n.declared.array_len) os_ << "[" << *n.declared.array_len << "]";
            if (n.init) {
              os_ << " = ";
              print_expr(*n.init, 0);
            }
            os_ << ";\n";
          } else if constexpr (std::is_same_v<T, AssignStmt>) {
            pad(indent);
            print_expr(*n.target, 0);
            os_ << " = ";
            print_expr(*n.value, 0);
            os_ << ";\n";
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            pad(indent);
            os_ << "if (";
            print_expr(*n.cond, 0);
            os_ << ") {\n";
            print_body(n.then_body, indent + 1);
            pad(indent);
            os_ << "}";
            if (!n.else_body.empty()) {
              os_ << " else {\n";
              print_body(n.else_body, indent + 1);
              pad(indent);
              os_ << "}";
            }
            os_ << "\n";
          } else if constexpr (std::is_same_v<T, WhileStmt>) {
            pad(indent);
            os_ << "while (";
            print_expr(*n.cond, 0);
            os_ << ") {\n";
            print_body(n.body, indent + 1);
            pad(indent);
            os_ << "}\n";
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            pad(indent);
            os_ << "for (";
            if (n.init) print_inline_stmt(*n.init);
            os_ << "; ";
            if (n.cond) print_expr(*n.cond, 0);
            os_ << "; ";
            if (n.step) print_inline_stmt(*n.step);
            os_ << ") {\n";
            print_body(n.body, indent + 1);
            pad(indent);
            os_ << "}\n";
          } else if constexpr (std::is_same_v<T, ReturnStmt>) {
            pad(indent);
            os_ << "return";
            if (n.value) {
              os_ << " ";
              print_expr(*n.value, 0);
            }
            os_ << ";\n";
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            pad(indent);
            print_expr(*n.expr, 0);
            os_ << ";\n";
          } else if constexpr (std::is_same_v<T, AssumeStmt>) {
            pad(indent);
            os_ << "__ASSUME(";
            print_expr(*n.cond, 0);
            os_ << ");\n";
          } else if constexpr (std::is_same_v<T, AssertStmt>) {
            pad(indent);
            os_ << "__ASSERT(";
            print_expr(*n.cond, 0);
            os_ << ");\n";
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            pad(indent);
            os_ << "{\n";
            print_body(n.body, indent + 1);
            pad(indent);
            os_ << "}\n";
          }
        },
        s.node);
  }

  void print_body(const StmtList& body, int indent) {
    for (const auto& s : body) print_stmt(*s, indent);
  }

  void print_function(const FunctionDef& f) {
    print_type(f.return_type);
    os_ << (f.return_type.is_pointer ? "" : " ") << f.name << "(";
    if (f.params.empty()) os_ << "void";
    for (size_t i = 0; i < f.params.size(); ++i) {
      if (i) os_ << ", ";
      const Param& p = f.params[i];
      os_ << p.declared.base << " ";
      if (p.declared.is_pointer) os_ << "*";
      os_ << p.name;
      if (p.declared.array_len) os_ << "[" << *p.declared.array_len << "]";
    }
    os_ << ") {\n";
    print_body(f.body, 1);
    os_ << "}\n";
  }

  void print_record(const RecordDecl& r) {
    os_ << "struct " << r.name << " {\n";
    for (const auto& f : r.fields) {
      pad(1);
      os_ << f.declared.base << " " << f.name;
      if (f.declared.array_len) os_ << "[" << *f.declared.array_len << "]";
      os_ << ";\n";
    }
    os_ << "};\n";
  }

  void print_typedef(const TypedefDecl& t) {
    os_ << "typedef " << t.aliased.base;
    if (t.aliased.array_len) {
      os_ << " " << t.name << "[" << *t.aliased.array_len << "];\n";
    } else {
      os_ << " " << t.name << ";\n";
    }
  }

  void print_pragma(const LeakPragma& p) {
    os_ << "#pragma leak ";
    switch (p.kind) {
      case PragmaKind::High: os_ << "high"; break;
      case PragmaKind::Low: os_ << "low"; break;
      case PragmaKind::Observe: os_ << "observe"; break;
    }
    os_ << " " << p.target << "\n";
  }

  void print_ast(const Ast& a) {
    bool first = true;
    for (const auto& t : a.typedefs) {
      print_typedef(t);
      first = false;
    }
    for (const auto& r : a.records) {
      if (!first) os_ << "\n";
      print_record(r);
      first = false;
    }
    for (const auto& f : a.functions) {
      if (!first) os_ << "\n";
      for (const auto& p : a.pragmas)
        if (p.function == f.name) print_pragma(p);
      print_function(f);
      first = false;
    }
  }

 private:
  std::ostream& os_;

  void pad(int indent) {
    for (int i = 0; i < indent; ++i) os_ << "    ";
  }

  template <typename F>
  void maybe_paren(bool need, F&& inner) {
    if (need) os_ << "(";
    inner();
    if (need) os_ << ")";
  }

  // assignment or declaration inside a for-header, no trailing ;
  void print_inline_stmt(const Stmt& s) {
    if (const auto* d = s.as<DeclStmt>()) {
      os_ << d->declared.base << " " << d->name;
      if (d->init) {
        os_ << " = ";
        print_expr(*d->init, 0);
      }
    } else if (const auto* a = s.as<AssignStmt>()) {
      print_expr(*a->target, 0);
      os_ << " = ";
      print_expr(*a->value, 0);
    }
  }

  static bool starts_with_minus(const Expr& e) {
    if (const auto* u = e.as<UnaryExpr>()) return u->op == UnOp::Neg;
    return false;
  }

  static std::string nondet_suffix(const TypePtr& t) {
    if (!t) return "value";
    switch (t->kind) {
      case TypeKind::Bool: return "bool";
      case TypeKind::SignedInt: return "s" + std::to_string(t->width_bits);
      case TypeKind::UnsignedInt: return "u" + std::to_string(t->width_bits);
      case TypeKind::Record: return t->record_name;
      case TypeKind::Array: return "array";
    }
    return "value";
  }

  // Byte length printed into AggEq's memcmp; includes the trailing pad region
  // when the compared objects carry one (the emitter wraps those in a struct).
  int object_print_bytes(const Expr& e) {
    if (e.type) return e.type->size_bytes();
    return 0;
  }
};

inline std::string to_string(const Expr& e) {
  std::ostringstream os;
  Printer(os).print_expr(e);
  return os.str();
}

inline std::string to_string(const Stmt& s) {
  std::ostringstream os;
  Printer(os).print_stmt(s, 0);
  return os.str();
}

inline std::string to_string(const Ast& a) {
  std::ostringstream os;
  Printer(os).print_ast(a);
  return os.str();
}

}  // namespace leakbound
