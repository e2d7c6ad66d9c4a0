#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/lexer.hpp"

namespace leakbound {

// Spellings that may start a type. User typedefs and record names are added
// while parsing, which is what disambiguates declarations from expression
// statements.
inline const std::set<std::string>& builtin_type_words() {
  static const std::set<std::string> words = {
      "void", "bool", "char", "short", "int", "long", "signed", "unsigned",
      "size_t", "loff_t",
      "u8", "u16", "u32", "u64", "s8", "s16", "s32", "s64",
      "uint8_t", "uint16_t", "uint32_t", "uint64_t",
      "int8_t", "int16_t", "int32_t", "int64_t",
  };
  return words;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Ast run() {
    Ast ast;
    std::vector<LeakPragma> pending;
    while (cur().kind != TokKind::Eof) {
      if (cur().kind == TokKind::Pragma) {
        pending.push_back(parse_pragma());
        continue;
      }
      if (is_ident("typedef")) {
        ast.typedefs.push_back(parse_typedef());
        continue;
      }
      if (is_ident("struct") && peek(1).kind == TokKind::Ident &&
          peek(2).kind == TokKind::Punct && peek(2).text == "{") {
        ast.records.push_back(parse_record());
        record_names_.insert(ast.records.back().name);
        continue;
      }
      FunctionDef f = parse_function();
      for (auto& p : pending) {
        p.function = f.name;
        ast.pragmas.push_back(p);
      }
      pending.clear();
      ast.functions.push_back(std::move(f));
    }
    if (!pending.empty())
      throw ParseError("leak pragma is not followed by a function definition",
                       pending.front().loc);
    return ast;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::set<std::string> typedef_names_;
  std::set<std::string> record_names_;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(size_t off) const {
    size_t i = pos_ + off;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }

  bool is_ident(const std::string& s) const {
    return cur().kind == TokKind::Ident && cur().text == s;
  }
  bool is_punct(const std::string& s) const {
    return cur().kind == TokKind::Punct && cur().text == s;
  }

  Token take() { return toks_[pos_++]; }

  Token expect_punct(const std::string& s) {
    if (!is_punct(s))
      throw ParseError("expected '" + s + "' but found '" + describe(cur()) + "'",
                       cur().loc, {s});
    return take();
  }

  Token expect_ident() {
    if (cur().kind != TokKind::Ident)
      throw ParseError("expected an identifier but found '" + describe(cur()) + "'",
                       cur().loc);
    return take();
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case TokKind::Eof: return "end of input";
      case TokKind::Int: return t.text;
      case TokKind::Pragma: return "#" + t.text;
      default: return t.text;
    }
  }

  bool is_type_start() const {
    if (cur().kind != TokKind::Ident) return false;
    const std::string& w = cur().text;
    if (w == "struct") return true;
    if (builtin_type_words().count(w)) return true;
    return typedef_names_.count(w) > 0;
  }

  // -------------------------------------------------------------------------

  LeakPragma parse_pragma() {
    Token t = take();
    std::istringstream is(t.text);
    std::string w0, w1, w2, w3, extra;
    is >> w0 >> w1 >> w2 >> w3;
    if (w0 != "pragma" || w1 != "leak")
      throw ParseError("unknown pragma '#" + t.text + "' (only '#pragma leak ...' is recognized)",
                       t.loc);
    LeakPragma p;
    p.loc = t.loc;
    if (w2 == "high") {
      p.kind = PragmaKind::High;
    } else if (w2 == "low") {
      p.kind = PragmaKind::Low;
    } else if (w2 == "observe") {
      p.kind = PragmaKind::Observe;
    } else {
      throw ParseError("'#pragma leak' expects high, low, or observe; found '" + w2 + "'",
                       t.loc);
    }
    if (w3.empty())
      throw ParseError("'#pragma leak " + w2 + "' needs a parameter name", t.loc);
    if (is >> extra)
      throw ParseError("trailing text after '#pragma leak " + w2 + " " + w3 + "'", t.loc);
    p.target = w3;
    return p;
  }

  TypeName parse_type_name() {
    SourceLoc loc = cur().loc;
    if (is_ident("struct")) {
      take();
      Token n = expect_ident();
      if (!record_names_.count(n.text))
        throw ParseError("unknown struct '" + n.text + "'", n.loc);
      return TypeName{"struct " + n.text, false, std::nullopt};
    }
    if (!is_type_start())
      throw ParseError("expected a type name but found '" + describe(cur()) + "'", loc);

    const std::string& w = cur().text;
    bool multiword = w == "unsigned" || w == "signed" || w == "char" || w == "short" ||
                     w == "int" || w == "long" || w == "bool" || w == "void";
    if (!multiword) {
      // typedef spelling, one word
      return TypeName{take().text, false, std::nullopt};
    }

    // Collect the multi-word spelling and normalize: drop "signed", order is
    // already fixed by the grammar ("unsigned" first, "long long" doubled).
    bool is_unsigned = false;
    std::string core;
    auto take_word = [&] { return take().text; };
    std::string first = take_word();
    if (first == "unsigned" || first == "signed") {
      is_unsigned = first == "unsigned";
      if (is_ident("char") || is_ident("short") || is_ident("int") || is_ident("long")) {
        core = take_word();
      } else {
        core = "int";
      }
    } else {
      core = first;
    }
    if (core == "long" && is_ident("long")) {
      take();
      core = "long long";
    }
    if ((core == "short" || core == "long" || core == "long long") && is_ident("int"))
      take();  // "short int", "long int", "long long int"
    if (core == "bool" || core == "void") {
      if (is_unsigned) throw ParseError("'" + core + "' cannot be unsigned", loc);
      return TypeName{core, false, std::nullopt};
    }
    std::string base = is_unsigned ? "unsigned " + core : core;
    return TypeName{base, false, std::nullopt};
  }

  RecordDecl parse_record() {
    RecordDecl r;
    r.loc = cur().loc;
    take();  // struct
    r.name = expect_ident().text;
    expect_punct("{");
    while (!is_punct("}")) {
      RecordField f;
      f.loc = cur().loc;
      f.declared = parse_type_name();
      if (f.declared.base == "void")
        throw ParseError("a field cannot have type void", f.loc);
      if (is_punct("*"))
        throw ParseError("pointer fields are not supported", cur().loc);
      f.name = expect_ident().text;
      if (is_punct("[")) {
        take();
        f.declared.array_len = parse_array_len();
        expect_punct("]");
      }
      expect_punct(";");
      r.fields.push_back(std::move(f));
    }
    take();  // }
    expect_punct(";");
    if (r.fields.empty()) throw ParseError("struct '" + r.name + "' has no fields", r.loc);
    return r;
  }

  int parse_array_len() {
    if (cur().kind != TokKind::Int)
      throw ParseError("array length must be an integer literal", cur().loc);
    Token t = take();
    if (t.value == 0 || t.value > 4096)
      throw ParseError("array length must be between 1 and 4096", t.loc);
    return static_cast<int>(t.value);
  }

  TypedefDecl parse_typedef() {
    TypedefDecl d;
    d.loc = cur().loc;
    take();  // typedef
    d.aliased = parse_type_name();
    if (is_punct("*"))
      throw ParseError("pointer typedefs are not supported", cur().loc);
    d.name = expect_ident().text;
    if (is_punct("[")) {
      take();
      d.aliased.array_len = parse_array_len();
      expect_punct("]");
    }
    expect_punct(";");
    typedef_names_.insert(d.name);
    return d;
  }

  FunctionDef parse_function() {
    FunctionDef f;
    f.loc = cur().loc;
    f.return_type = parse_type_name();
    if (is_punct("*"))
      throw ParseError("functions cannot return pointers", cur().loc);
    f.name = expect_ident().text;
    expect_punct("(");
    if (is_ident("void") && peek(1).kind == TokKind::Punct && peek(1).text == ")") {
      take();
    } else if (!is_punct(")")) {
      for (;;) {
        Param p;
        p.loc = cur().loc;
        p.declared = parse_type_name();
        if (p.declared.base == "void")
          throw ParseError("a parameter cannot have type void", p.loc);
        if (is_punct("*")) {
          take();
          p.declared.is_pointer = true;
        }
        p.name = expect_ident().text;
        if (is_punct("[")) {
          if (p.declared.is_pointer)
            throw ParseError("a parameter cannot be both pointer and array", cur().loc);
          take();
          p.declared.array_len = parse_array_len();
          expect_punct("]");
        }
        f.params.push_back(std::move(p));
        if (is_punct(",")) {
          take();
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    expect_punct("{");
    while (!is_punct("}")) f.body.push_back(parse_stmt());
    take();  // }
    return f;
  }

  // -------------------------------------------------------------------------
  // Statements
  // -------------------------------------------------------------------------

  StmtPtr parse_stmt() {
    SourceLoc loc = cur().loc;
    if (cur().kind == TokKind::Pragma)
      throw ParseError("pragmas are only valid at the top level", loc);
    if (is_ident("if")) return parse_if();
    if (is_ident("while")) return parse_while();
    if (is_ident("for")) return parse_for();
    if (is_ident("return")) return parse_return();
    if (is_ident("__ASSUME") || is_ident("__ASSERT")) return parse_verify_stmt();
    if (is_punct("{")) {
      take();
      BlockStmt b;
      while (!is_punct("}")) b.body.push_back(parse_stmt());
      take();
      Stmt s;
      s.node = std::move(b);
      s.loc = loc;
      return make_stmt(std::move(s));
    }
    if (is_type_start() && !is_ident("struct")) return parse_decl(/*need_semi=*/true);
    if (is_ident("struct")) return parse_decl(/*need_semi=*/true);
    return parse_expr_or_assign(/*need_semi=*/true);
  }

  StmtPtr parse_decl(bool need_semi) {
    SourceLoc loc = cur().loc;
    DeclStmt d;
    d.declared = parse_type_name();
    if (d.declared.base == "void")
      throw ParseError("a variable cannot have type void", loc);
    if (is_punct("*"))
      throw ParseError("pointer variables are not supported (pointers appear only as output parameters)",
                       cur().loc);
    d.name = expect_ident().text;
    if (is_punct("[")) {
      take();
      d.declared.array_len = parse_array_len();
      expect_punct("]");
    }
    if (is_punct("=")) {
      take();
      d.init = parse_expr();
    }
    if (need_semi) expect_punct(";");
    Stmt s;
    s.node = std::move(d);
    s.loc = loc;
    return make_stmt(std::move(s));
  }

  StmtPtr parse_expr_or_assign(bool need_semi) {
    SourceLoc loc = cur().loc;
    ExprPtr e = parse_expr();
    Stmt s;
    s.loc = loc;
    if (is_punct("=")) {
      take();
      ExprPtr v = parse_expr();
      s.node = AssignStmt{std::move(e), std::move(v)};
    } else {
      s.node = ExprStmt{std::move(e)};
    }
    if (need_semi) expect_punct(";");
    return make_stmt(std::move(s));
  }

  StmtPtr parse_if() {
    SourceLoc loc = take().loc;
    expect_punct("(");
    IfStmt n;
    n.cond = parse_expr();
    expect_punct(")");
    n.then_body = parse_stmt_or_block();
    if (is_ident("else")) {
      take();
      if (is_ident("if")) {
        n.else_body.push_back(parse_if());
      } else {
        n.else_body = parse_stmt_or_block();
      }
    }
    Stmt s;
    s.node = std::move(n);
    s.loc = loc;
    return make_stmt(std::move(s));
  }

  StmtList parse_stmt_or_block() {
    StmtList body;
    if (is_punct("{")) {
      take();
      while (!is_punct("}")) body.push_back(parse_stmt());
      take();
    } else {
      body.push_back(parse_stmt());
    }
    return body;
  }

  StmtPtr parse_while() {
    SourceLoc loc = take().loc;
    expect_punct("(");
    WhileStmt n;
    n.cond = parse_expr();
    expect_punct(")");
    n.body = parse_stmt_or_block();
    Stmt s;
    s.node = std::move(n);
    s.loc = loc;
    return make_stmt(std::move(s));
  }

  StmtPtr parse_for() {
    SourceLoc loc = take().loc;
    expect_punct("(");
    ForStmt n;
    if (!is_punct(";")) {
      n.init = is_type_start() ? parse_decl(/*need_semi=*/false)
                               : parse_expr_or_assign(/*need_semi=*/false);
    }
    expect_punct(";");
    if (!is_punct(";")) n.cond = parse_expr();
    expect_punct(";");
    if (!is_punct(")")) n.step = parse_expr_or_assign(/*need_semi=*/false);
    expect_punct(")");
    n.body = parse_stmt_or_block();
    Stmt s;
    s.node = std::move(n);
    s.loc = loc;
    return make_stmt(std::move(s));
  }

  StmtPtr parse_return() {
    SourceLoc loc = take().loc;
    ReturnStmt n;
    if (!is_punct(";")) n.value = parse_expr();
    expect_punct(";");
    Stmt s;
    s.node = std::move(n);
    s.loc = loc;
    return make_stmt(std::move(s));
  }

  StmtPtr parse_verify_stmt() {
    Token kw = take();
    expect_punct("(");
    ExprPtr cond = parse_expr();
    expect_punct(")");
    expect_punct(";");
    Stmt s;
    s.loc = kw.loc;
    if (kw.text == "__ASSUME") {
      s.node = AssumeStmt{std::move(cond)};
    } else {
      s.node = AssertStmt{std::move(cond), false};
    }
    return make_stmt(std::move(s));
  }

  // -------------------------------------------------------------------------
  // Expressions (precedence climbing; table matches the printer)
  // -------------------------------------------------------------------------

  ExprPtr parse_expr() { return parse_binary(1); }

  std::optional<BinOp> current_binop() const {
    if (cur().kind != TokKind::Punct) return std::nullopt;
    const std::string& t = cur().text;
    if (t == "||") return BinOp::LOr;
    if (t == "&&") return BinOp::LAnd;
    if (t == "|") return BinOp::BitOr;
    if (t == "^") return BinOp::BitXor;
    if (t == "&") return BinOp::BitAnd;
    if (t == "==") return BinOp::Eq;
    if (t == "!=") return BinOp::Ne;
    if (t == "<") return BinOp::Lt;
    if (t == "<=") return BinOp::Le;
    if (t == ">") return BinOp::Gt;
    if (t == ">=") return BinOp::Ge;
    if (t == "<<") return BinOp::Shl;
    if (t == ">>") return BinOp::Shr;
    if (t == "+") return BinOp::Add;
    if (t == "-") return BinOp::Sub;
    if (t == "*") return BinOp::Mul;
    if (t == "/") return BinOp::Div;
    if (t == "%") return BinOp::Rem;
    return std::nullopt;
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    for (;;) {
      auto op = current_binop();
      if (!op) break;
      int prec = binop_prec_local(*op);
      if (prec < min_prec) break;
      SourceLoc loc = take().loc;
      ExprPtr rhs = parse_binary(prec + 1);
      Expr e;
      e.loc = loc;
      e.node = BinaryExpr{*op, std::move(lhs), std::move(rhs)};
      lhs = make_expr(std::move(e));
    }
    return lhs;
  }

  static int binop_prec_local(BinOp op) {
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

  ExprPtr parse_unary() {
    SourceLoc loc = cur().loc;
    auto mk = [&](auto node) {
      Expr e;
      e.loc = loc;
      e.node = std::move(node);
      return make_expr(std::move(e));
    };
    if (is_punct("-")) {
      take();
      return mk(UnaryExpr{UnOp::Neg, parse_unary()});
    }
    if (is_punct("~")) {
      take();
      return mk(UnaryExpr{UnOp::BitNot, parse_unary()});
    }
    if (is_punct("!")) {
      take();
      return mk(UnaryExpr{UnOp::LogNot, parse_unary()});
    }
    if (is_punct("*")) {
      take();
      return mk(DerefExpr{parse_unary()});
    }
    if (is_punct("&")) {
      take();
      return mk(AddrOfExpr{parse_unary()});
    }
    if (is_ident("sizeof")) {
      take();
      expect_punct("(");
      SizeofExpr n;
      if (is_type_start()) {
        n.of_type = parse_type_name();
      } else {
        n.of_expr = parse_expr();
      }
      expect_punct(")");
      return mk(std::move(n));
    }
    if (is_punct("(") && type_follows(1)) {
      take();
      TypeName target = parse_type_name();
      if (is_punct("*"))
        throw ParseError("pointer casts are not supported", cur().loc);
      expect_punct(")");
      return mk(CastExpr{target, parse_unary(), false});
    }
    return parse_postfix();
  }

  bool type_follows(size_t off) const {
    const Token& t = peek(off);
    if (t.kind != TokKind::Ident) return false;
    if (t.text == "struct") return true;
    return builtin_type_words().count(t.text) || typedef_names_.count(t.text);
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    for (;;) {
      SourceLoc loc = cur().loc;
      if (is_punct("(")) {
        const VarRef* v = e->as<VarRef>();
        if (!v) throw ParseError("only named functions can be called", loc);
        CallExpr c;
        c.callee = v->name;
        take();
        if (!is_punct(")")) {
          for (;;) {
            c.args.push_back(parse_expr());
            if (is_punct(",")) {
              take();
              continue;
            }
            break;
          }
        }
        expect_punct(")");
        Expr out;
        out.loc = e->loc;
        out.node = std::move(c);
        e = make_expr(std::move(out));
      } else if (is_punct("[")) {
        take();
        IndexExpr n;
        n.base = std::move(e);
        n.index = parse_expr();
        expect_punct("]");
        Expr out;
        out.loc = loc;
        out.node = std::move(n);
        e = make_expr(std::move(out));
      } else if (is_punct(".") || is_punct("->")) {
        bool arrow = cur().text == "->";
        take();
        FieldExpr n;
        n.base = std::move(e);
        n.field = expect_ident().text;
        n.arrow = arrow;
        Expr out;
        out.loc = loc;
        out.node = std::move(n);
        e = make_expr(std::move(out));
      } else {
        break;
      }
    }
    return e;
  }

  ExprPtr parse_primary() {
    SourceLoc loc = cur().loc;
    if (cur().kind == TokKind::Int) {
      Token t = take();
      Expr e;
      e.loc = loc;
      e.node = IntLit{t.value};
      return make_expr(std::move(e));
    }
    if (cur().kind == TokKind::Ident) {
      if (is_type_start())
        throw ParseError("type name '" + cur().text + "' used where a value is expected", loc);
      Token t = take();
      Expr e;
      e.loc = loc;
      e.node = VarRef{t.text};
      return make_expr(std::move(e));
    }
    if (is_punct("(")) {
      take();
      ExprPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    throw ParseError("expected an expression but found '" + describe(cur()) + "'", loc);
  }
};

inline Ast parse_program(const std::string& source) {
  Lexer lex(source);
  Parser p(lex.run());
  return p.run();
}

}  // namespace leakbound
