#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/builtins.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/types.hpp"

namespace leakbound {

// Target model. Affects long/unsigned long width and the alignment used for
// trailing-pad regions behind copy_to_user.
struct Arch {
  int bits = 32;  // 32 or 64

  int long_bits() const { return bits; }
  int align() const { return bits / 8; }
};

struct TypeEnv {
  Arch arch;
  std::map<std::string, TypePtr> typedefs;  // user typedefs, resolved
  std::map<std::string, TypePtr> records;   // interned; one TypeSpec per record

  TypePtr resolve(const TypeName& tn, SourceLoc loc) const {
    TypePtr base = resolve_base(tn.base, loc);
    if (tn.array_len) {
      if (base->kind == TypeKind::Array)
        throw TypeError("array of array type is not supported", loc);
      base = make_array(base, *tn.array_len);
    }
    return base;
  }

  TypePtr resolve_base(const std::string& w, SourceLoc loc) const {
    if (w.rfind("struct ", 0) == 0) {
      auto it = records.find(w.substr(7));
      if (it == records.end()) throw TypeError("unknown struct '" + w + "'", loc);
      return it->second;
    }
    if (w == "bool") return make_bool();
    if (w == "char" || w == "s8" || w == "int8_t") return make_signed(8);
    if (w == "short" || w == "s16" || w == "int16_t") return make_signed(16);
    if (w == "int" || w == "s32" || w == "int32_t") return make_signed(32);
    if (w == "long long" || w == "s64" || w == "int64_t" || w == "loff_t")
      return make_signed(64);
    if (w == "unsigned char" || w == "u8" || w == "uint8_t") return make_unsigned(8);
    if (w == "unsigned short" || w == "u16" || w == "uint16_t") return make_unsigned(16);
    if (w == "unsigned int" || w == "u32" || w == "uint32_t" || w == "size_t")
      return make_unsigned(32);
    if (w == "unsigned long long" || w == "u64" || w == "uint64_t") return make_unsigned(64);
    if (w == "long") return make_signed(arch.long_bits());
    if (w == "unsigned long") return make_unsigned(arch.long_bits());
    auto it = typedefs.find(w);
    if (it != typedefs.end()) return it->second;
    throw TypeError("unknown type '" + w + "'", loc);
  }

  // Canonical surface spelling used in diagnostics and emitted code.
  std::string spell(const TypePtr& t) const {
    if (t->kind == TypeKind::SignedInt && t->width_bits == arch.long_bits() &&
        arch.long_bits() == 64)
      return "long long";
    return type_name_str(*t);
  }
};

struct ParamSig {
  std::string name;
  TypePtr type;       // pointee type for output params
  bool is_output = false;
};

struct FuncSig {
  TypePtr ret;  // null = void
  std::vector<ParamSig> params;

  const ParamSig* find(const std::string& n) const {
    for (const auto& p : params)
      if (p.name == n) return &p;
    return nullptr;
  }
};

// A parsed, typed program: the tree is annotated and all implicit conversions
// are explicit synthesized casts.
struct Program {
  Ast ast;
  TypeEnv env;
  std::map<std::string, FuncSig> sigs;
};

// Constant evaluation for region lengths and array bounds. Handles literals,
// sizeof, and +,-,* over those; anything else is not a constant here.
inline std::optional<std::int64_t> const_eval(const TypeEnv& env, const Expr& e) {
  if (const auto* i = e.as<IntLit>()) return static_cast<std::int64_t>(i->value);
  if (const auto* s = e.as<SizeofExpr>()) {
    if (s->of_type) return env.resolve(*s->of_type, e.loc)->size_bytes();
    if (s->of_expr && s->of_expr->type) return s->of_expr->type->size_bytes();
    return std::nullopt;
  }
  if (const auto* c = e.as<CastExpr>()) return const_eval(env, *c->arg);
  if (const auto* u = e.as<UnaryExpr>()) {
    auto v = const_eval(env, *u->arg);
    if (v && u->op == UnOp::Neg) return -*v;
    return std::nullopt;
  }
  if (const auto* b = e.as<BinaryExpr>()) {
    auto l = const_eval(env, *b->lhs);
    auto r = const_eval(env, *b->rhs);
    if (!l || !r) return std::nullopt;
    switch (b->op) {
      case BinOp::Add: return *l + *r;
      case BinOp::Sub: return *l - *r;
      case BinOp::Mul: return *l * *r;
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

class TypeChecker {
 public:
  TypeChecker(Ast ast, Arch arch) : prog_{std::move(ast), TypeEnv{arch, {}, {}}, {}} {}

  Program run() {
    collect_types();
    collect_sigs();
    for (auto& f : prog_.ast.functions) check_function(f);
    check_recursion();
    return std::move(prog_);
  }

 private:
  Program prog_;

  struct VarInfo {
    TypePtr type;           // pointee type for pointer params
    bool is_pointer = false;
    bool is_param = false;
    int region_extra = 0;   // driver regions carry a trailing pad
  };

  std::vector<std::map<std::string, VarInfo>> scopes_;
  const FuncSig* cur_sig_ = nullptr;
  std::string cur_func_;
  std::map<std::string, std::set<std::string>> call_edges_;

  TypeEnv& env() { return prog_.env; }

  // ---- declarations ----

  void collect_types() {
    for (const auto& r : prog_.ast.records) {
      if (env().records.count(r.name))
        throw TypeError("struct '" + r.name + "' defined twice", r.loc);
      std::vector<Field> fields;
      for (const auto& f : r.fields) {
        TypePtr ft = env().resolve(f.declared, f.loc);
        for (const auto& g : fields)
          if (g.name == f.name)
            throw TypeError("duplicate field '" + f.name + "' in struct " + r.name, f.loc);
        fields.push_back(Field{f.name, ft});
      }
      env().records[r.name] = make_record(r.name, std::move(fields));
    }
    for (const auto& t : prog_.ast.typedefs) {
      if (env().typedefs.count(t.name))
        throw TypeError("typedef '" + t.name + "' defined twice", t.loc);
      env().typedefs[t.name] = env().resolve(t.aliased, t.loc);
    }
  }

  void collect_sigs() {
    for (const auto& f : prog_.ast.functions) {
      if (prog_.sigs.count(f.name))
        throw TypeError("function '" + f.name + "' defined twice", f.loc);
      if (is_builtin_name(f.name))
        throw TypeError("'" + f.name + "' is a builtin and cannot be redefined", f.loc);
      FuncSig sig;
      if (f.return_type.base != "void") {
        sig.ret = env().resolve(f.return_type, f.loc);
        if (sig.ret->kind == TypeKind::Array || sig.ret->kind == TypeKind::Record)
          throw TypeError("functions return scalars only", f.loc);
      }
      for (const auto& p : f.params) {
        if (sig.find(p.name))
          throw TypeError("duplicate parameter '" + p.name + "'", p.loc);
        ParamSig ps;
        ps.name = p.name;
        ps.is_output = p.declared.is_pointer;
        TypeName tn = p.declared;
        tn.is_pointer = false;
        ps.type = env().resolve(tn, p.loc);
        if (ps.is_output && ps.type->kind == TypeKind::Array)
          throw TypeError("output parameters are scalars or structs, not arrays", p.loc);
        sig.params.push_back(std::move(ps));
      }
      prog_.sigs[f.name] = std::move(sig);
    }
  }

  void check_recursion() {
    // the call graph must be a DAG; report any cycle
    std::map<std::string, int> state;  // 0 unseen, 1 in progress, 2 done
    std::function<void(const std::string&)> dfs = [&](const std::string& f) {
      state[f] = 1;
      for (const auto& g : call_edges_[f]) {
        if (state[g] == 1)
          throw TypeError("recursion detected through '" + f + "' and '" + g +
                          "'; recursive calls are not supported");
        if (state[g] == 0) dfs(g);
      }
      state[f] = 2;
    };
    for (const auto& [name, sig] : prog_.sigs)
      if (state[name] == 0) dfs(name);
  }

  // ---- scopes ----

  void push_scope() { scopes_.emplace_back(); }
  void pop_scope() { scopes_.pop_back(); }

  void declare(const std::string& name, VarInfo info, SourceLoc loc) {
    for (const auto& s : scopes_)
      if (s.count(name))
        throw TypeError("'" + name + "' is already declared in an enclosing scope", loc);
    if (is_builtin_name(name) || prog_.sigs.count(name))
      throw TypeError("'" + name + "' is a function name and cannot be a variable", loc);
    scopes_.back()[name] = std::move(info);
  }

  const VarInfo* lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  // ---- functions ----

  void check_function(FunctionDef& f) {
    cur_sig_ = &prog_.sigs.at(f.name);
    cur_func_ = f.name;
    scopes_.clear();
    push_scope();
    for (const auto& p : cur_sig_->params) {
      VarInfo vi;
      vi.type = p.type;
      vi.is_pointer = p.is_output;
      vi.is_param = true;
      scopes_.back()[p.name] = vi;
    }
    check_body(f.body);
    pop_scope();
  }

  void check_body(StmtList& body) {
    for (auto& s : body) check_stmt(*s);
  }

  void check_stmt(Stmt& s) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            TypePtr t = env().resolve(n.declared, s.loc);
            if (n.init) {
              if (t->kind == TypeKind::Record || t->kind == TypeKind::Array) {
                if (!expr_as<NondetExpr>(n.init))
                  throw TypeError("aggregate variables cannot take an initializer", s.loc);
                n.init->type = t;
              } else {
                check_expr(n.init);
                coerce_assign(n.init, t, s.loc);
              }
            }
            VarInfo vi;
            vi.type = t;
            vi.region_extra = n.region_extra_bytes;
            declare(n.name, vi, s.loc);
          } else if constexpr (std::is_same_v<T, AssignStmt>) {
            TypePtr t = check_lvalue(n.target, /*writing=*/true);
            if (t->kind == TypeKind::Record || t->kind == TypeKind::Array)
              throw TypeError("whole-aggregate assignment is not supported; copy field by field",
                              s.loc);
            check_expr(n.value);
            coerce_assign(n.value, t, s.loc);
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            check_cond(n.cond);
            push_scope();
            check_body(n.then_body);
            pop_scope();
            push_scope();
            check_body(n.else_body);
            pop_scope();
          } else if constexpr (std::is_same_v<T, WhileStmt>) {
            check_cond(n.cond);
            push_scope();
            check_body(n.body);
            pop_scope();
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            push_scope();
            if (n.init) check_stmt(*n.init);
            if (n.cond) check_cond(n.cond);
            if (n.step) check_stmt(*n.step);
            push_scope();
            check_body(n.body);
            pop_scope();
            pop_scope();
          } else if constexpr (std::is_same_v<T, ReturnStmt>) {
            if (!cur_sig_->ret) {
              if (n.value) throw TypeError("void function returns a value", s.loc);
            } else {
              if (!n.value)
                throw TypeError("non-void function returns without a value", s.loc);
              check_expr(n.value);
              coerce_assign(n.value, cur_sig_->ret, s.loc);
            }
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            const auto* c = expr_as<CallExpr>(n.expr);
            if (!c)
              throw TypeError("expression statements must be calls", s.loc);
            check_expr(n.expr);
          } else if constexpr (std::is_same_v<T, AssumeStmt>) {
            check_cond(n.cond);
          } else if constexpr (std::is_same_v<T, AssertStmt>) {
            check_cond(n.cond);
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            push_scope();
            check_body(n.body);
            pop_scope();
          }
        },
        s.node);
  }

  void check_cond(ExprPtr& e) {
    check_expr(e);
    require_scalar(*e, "condition");
    to_bool(e);
  }

  // ---- conversions ----

  static bool is_int_like(const TypePtr& t) {
    return t->kind == TypeKind::SignedInt || t->kind == TypeKind::UnsignedInt ||
           t->kind == TypeKind::Bool;
  }

  void require_scalar(const Expr& e, const char* where) {
    if (!e.type || !is_int_like(e.type))
      throw TypeError(std::string(where) + " must have integer or bool type", e.loc);
  }

  void insert_cast(ExprPtr& e, TypePtr to) {
    if (type_equal(*e->type, *to)) return;
    Expr c;
    c.loc = e->loc;
    c.type = to;
    TypeName tn{env().spell(to), false, std::nullopt};
    c.node = CastExpr{tn, std::move(e), true};
    e = make_expr(std::move(c));
  }

  void to_bool(ExprPtr& e) { insert_cast(e, make_bool()); }

  // bool participates in arithmetic as a signed 32-bit value
  TypePtr promoted(const TypePtr& t) {
    if (t->kind == TypeKind::Bool) return make_signed(32);
    return t;
  }

  // Conversion rule: wider width wins and keeps its signedness; at equal
  // width unsigned wins.
  TypePtr common_type(TypePtr a, TypePtr b) {
    a = promoted(a);
    b = promoted(b);
    if (a->width_bits > b->width_bits) return a;
    if (b->width_bits > a->width_bits) return b;
    if (a->kind == TypeKind::UnsignedInt) return a;
    return b;
  }

  void coerce_assign(ExprPtr& e, const TypePtr& target, SourceLoc loc) {
    if (target->kind == TypeKind::Record || target->kind == TypeKind::Array) {
      if (!e->type || !type_equal(*e->type, *target))
        throw TypeError("aggregate types must match exactly", loc);
      return;
    }
    require_scalar(*e, "assigned value");
    insert_cast(e, target);
  }

  // ---- lvalues ----

  // Returns the type of the lvalue path, verifying the root is writable when
  // needed. Value parameters and aggregate inputs are read-only so that calls
  // can be inlined by substitution.
  TypePtr check_lvalue(ExprPtr& e, bool writing) {
    check_expr(e);
    const Expr* root = e.get();
    for (;;) {
      if (const auto* f = root->as<FieldExpr>()) {
        root = f->base.get();
      } else if (const auto* ix = root->as<IndexExpr>()) {
        root = ix->base.get();
      } else if (const auto* d = root->as<DerefExpr>()) {
        root = d->base.get();
      } else {
        break;
      }
    }
    const auto* v = root->as<VarRef>();
    if (!v) throw TypeError("not an assignable location", e->loc);
    const VarInfo* vi = lookup(v->name);
    if (!vi) throw TypeError("unknown variable '" + v->name + "'", e->loc);
    if (writing && vi->is_param && !vi->is_pointer)
      throw TypeError("parameter '" + v->name + "' is read-only", e->loc);
    if (e->as<VarRef>() && vi->is_pointer)
      throw TypeError("output parameter '" + v->name +
                      "' cannot be assigned as a whole; write through it", e->loc);
    return e->type;
  }

  // ---- expressions ----

  void check_expr(ExprPtr& ep) {
    Expr& e = *ep;
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit>) {
            if (n.value <= 0x7fffffffULL) {
              e.type = make_signed(32);
            } else if (n.value <= 0x7fffffffffffffffULL) {
              e.type = make_signed(64);
            } else {
              e.type = make_unsigned(64);
            }
          } else if constexpr (std::is_same_v<T, VarRef>) {
            const VarInfo* vi = lookup(n.name);
            if (!vi) throw TypeError("unknown variable '" + n.name + "'", e.loc);
            e.type = vi->type;  // pointer params: pointee; uses are restricted
          } else if constexpr (std::is_same_v<T, FieldExpr>) {
            check_expr(n.base);
            if (n.arrow) {
              const auto* v = expr_as<VarRef>(n.base);
              const VarInfo* vi = v ? lookup(v->name) : nullptr;
              if (!vi || !vi->is_pointer)
                throw TypeError("'->' applies only to output parameters", e.loc);
            } else {
              if (is_pointer_ref(*n.base))
                throw TypeError("use '->' to access fields through an output parameter",
                                e.loc);
            }
            if (!n.base->type || n.base->type->kind != TypeKind::Record)
              throw TypeError("field access on a non-struct value", e.loc);
            const Field* f = n.base->type->find_field(n.field);
            if (!f)
              throw TypeError("struct " + n.base->type->record_name + " has no field '" +
                              n.field + "'", e.loc);
            e.type = f->type;
          } else if constexpr (std::is_same_v<T, IndexExpr>) {
            check_expr(n.base);
            check_expr(n.index);
            if (!n.base->type || n.base->type->kind != TypeKind::Array)
              throw TypeError("indexing a non-array value", e.loc);
            require_scalar(*n.index, "array index");
            if (const auto* c = expr_as<IntLit>(n.index)) {
              if (c->value >= static_cast<std::uint64_t>(n.base->type->length))
                throw TypeError("index " + std::to_string(c->value) +
                                " is out of bounds for length " +
                                std::to_string(n.base->type->length), e.loc);
            }
            e.type = n.base->type->element;
          } else if constexpr (std::is_same_v<T, DerefExpr>) {
            const auto* v = expr_as<VarRef>(n.base);
            const VarInfo* vi = v ? lookup(v->name) : nullptr;
            if (!vi || !vi->is_pointer)
              throw TypeError("'*' applies only to output parameters", e.loc);
            check_expr(n.base);
            if (vi->type->kind == TypeKind::Record)
              throw TypeError("use '->' to access a struct output parameter", e.loc);
            e.type = vi->type;
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            check_expr(n.arg);
            require_scalar(*n.arg, "operand");
            if (n.op == UnOp::LogNot) {
              to_bool(n.arg);
              e.type = make_bool();
            } else {
              insert_cast(n.arg, promoted(n.arg->type));
              e.type = n.arg->type;
            }
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            check_binary(e, n);
          } else if constexpr (std::is_same_v<T, CastExpr>) {
            check_expr(n.arg);
            require_scalar(*n.arg, "cast operand");
            TypePtr t = env().resolve(n.target, e.loc);
            if (!is_int_like(t))
              throw TypeError("casts produce integer or bool values only", e.loc);
            e.type = t;
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            check_call(e, n);
          } else if constexpr (std::is_same_v<T, SizeofExpr>) {
            if (n.of_type) {
              env().resolve(*n.of_type, e.loc);
            } else {
              check_expr(n.of_expr);
              if (contains_call(*n.of_expr))
                throw TypeError("sizeof operand must not contain calls", e.loc);
            }
            e.type = make_unsigned(32);
          } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
            throw TypeError("'&' is only valid as a call argument", e.loc);
          } else if constexpr (std::is_same_v<T, NondetExpr>) {
            if (!e.type)
              throw InternalError("nondet expression reached typecheck without a type");
          } else if constexpr (std::is_same_v<T, AggEqExpr>) {
            check_expr(n.lhs);
            check_expr(n.rhs);
            if (!n.lhs->type || !n.rhs->type || !type_equal(*n.lhs->type, *n.rhs->type))
              throw InternalError("byte-compare of mismatched objects");
            e.type = make_bool();
          }
        },
        e.node);
  }

  bool is_pointer_ref(const Expr& e) const {
    const auto* v = e.as<VarRef>();
    if (!v) return false;
    const VarInfo* vi = lookup(v->name);
    return vi && vi->is_pointer;
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

  void check_binary(Expr& e, BinaryExpr& n) {
    check_expr(n.lhs);
    check_expr(n.rhs);
    require_scalar(*n.lhs, "operand");
    require_scalar(*n.rhs, "operand");
    switch (n.op) {
      case BinOp::LAnd:
      case BinOp::LOr:
        to_bool(n.lhs);
        to_bool(n.rhs);
        e.type = make_bool();
        return;
      case BinOp::Eq:
      case BinOp::Ne:
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Gt:
      case BinOp::Ge: {
        TypePtr c = common_type(n.lhs->type, n.rhs->type);
        insert_cast(n.lhs, c);
        insert_cast(n.rhs, c);
        e.type = make_bool();
        return;
      }
      case BinOp::Shl:
      case BinOp::Shr: {
        TypePtr lt = promoted(n.lhs->type);
        insert_cast(n.lhs, lt);
        insert_cast(n.rhs, promoted(n.rhs->type));
        e.type = lt;
        return;
      }
      default: {
        TypePtr c = common_type(n.lhs->type, n.rhs->type);
        insert_cast(n.lhs, c);
        insert_cast(n.rhs, c);
        e.type = c;
        return;
      }
    }
  }

  // ---- calls ----

  void check_call(Expr& e, CallExpr& n) {
    if (is_builtin_name(n.callee)) {
      check_builtin_call(e, n);
      return;
    }
    auto it = prog_.sigs.find(n.callee);
    if (it == prog_.sigs.end())
      throw TypeError("call to unknown function '" + n.callee + "'", e.loc);
    call_edges_[cur_func_].insert(n.callee);
    const FuncSig& sig = it->second;
    if (n.args.size() != sig.params.size())
      throw TypeError("'" + n.callee + "' expects " + std::to_string(sig.params.size()) +
                      " arguments, got " + std::to_string(n.args.size()), e.loc);
    for (size_t i = 0; i < n.args.size(); ++i) {
      const ParamSig& p = sig.params[i];
      if (p.is_output) {
        check_output_arg(n.args[i], p, e.loc);
      } else if (p.type->kind == TypeKind::Record || p.type->kind == TypeKind::Array) {
        check_expr(n.args[i]);
        if (!n.args[i]->type || !type_equal(*n.args[i]->type, *p.type))
          throw TypeError("argument " + std::to_string(i + 1) + " to '" + n.callee +
                          "' must have type " + env().spell(p.type), e.loc);
        if (is_pointer_ref(*n.args[i]))
          throw TypeError("cannot pass an output parameter by value", e.loc);
      } else {
        check_expr(n.args[i]);
        coerce_assign(n.args[i], p.type, e.loc);
      }
    }
    // An aggregate passed by value must not overlap an output argument of the
    // same call: the callee works on a copy, so writes through the output
    // pointer would not be visible in it, and the two views would disagree.
    std::vector<std::string> agg_roots, out_roots;
    for (size_t i = 0; i < n.args.size(); ++i) {
      const ParamSig& p = sig.params[i];
      const Expr* x = n.args[i].get();
      if (const auto* a = x->as<AddrOfExpr>()) x = a->arg.get();
      for (;;) {
        if (const auto* f = x->as<FieldExpr>()) x = f->base.get();
        else if (const auto* ix = x->as<IndexExpr>()) x = ix->base.get();
        else if (const auto* d = x->as<DerefExpr>()) x = d->base.get();
        else break;
      }
      const auto* v = x->as<VarRef>();
      if (!v) continue;
      if (p.is_output) out_roots.push_back(v->name);
      else if (p.type->kind == TypeKind::Record || p.type->kind == TypeKind::Array)
        agg_roots.push_back(v->name);
    }
    for (const auto& ar : agg_roots)
      for (const auto& outr : out_roots)
        if (ar == outr)
          throw TypeError("aggregate argument '" + ar +
                          "' aliases an output argument of the same call", e.loc);
    e.type = sig.ret;  // null for void
  }

  // An output argument is &lvalue of the pointee type, or a forwarded output
  // parameter of the same type.
  void check_output_arg(ExprPtr& arg, const ParamSig& p, SourceLoc loc) {
    if (auto* a = arg->as<AddrOfExpr>()) {
      TypePtr t = check_lvalue(a->arg, /*writing=*/true);
      if (!type_equal(*t, *p.type))
        throw TypeError("output argument '&...' must point to " + env().spell(p.type), loc);
      arg->type = t;
      return;
    }
    if (const auto* v = arg->as<VarRef>()) {
      const VarInfo* vi = lookup(v->name);
      if (vi && vi->is_pointer && type_equal(*vi->type, *p.type)) {
        arg->type = vi->type;
        return;
      }
    }
    throw TypeError("output argument must be '&variable' or a forwarded output parameter",
                    loc);
  }

  // Region arguments for the memory builtins: &lvalue, an array value, or an
  // output parameter. Returns the byte length available at that spot.
  struct Region {
    std::string root;
    int avail = 0;        // bytes from the start of the referenced subobject
    bool is_output = false;
  };

  Region check_region_arg(ExprPtr& arg, bool writable, SourceLoc loc) {
    Region r;
    auto root_of = [&](const Expr& path) -> std::string {
      const Expr* x = &path;
      for (;;) {
        if (const auto* f = x->as<FieldExpr>()) x = f->base.get();
        else if (const auto* ix = x->as<IndexExpr>()) x = ix->base.get();
        else if (const auto* d = x->as<DerefExpr>()) x = d->base.get();
        else break;
      }
      const auto* v = x->as<VarRef>();
      return v ? v->name : std::string();
    };
    if (auto* a = arg->as<AddrOfExpr>()) {
      TypePtr t = check_lvalue(a->arg, writable);
      arg->type = t;
      r.root = root_of(*a->arg);
      r.avail = t->size_bytes();
      const VarInfo* vi = lookup(r.root);
      if (vi && vi->is_pointer) r.is_output = true;
      // a whole-object reference picks up the trailing pad region, if any
      if (vi && a->arg->as<VarRef>()) r.avail += vi->region_extra;
      return r;
    }
    if (const auto* v = arg->as<VarRef>()) {
      const VarInfo* vi = lookup(v->name);
      if (!vi) throw TypeError("unknown variable '" + v->name + "'", loc);
      if (vi->is_pointer) {
        check_expr(arg);
        r.root = v->name;
        r.is_output = true;
        r.avail = vi->type->size_bytes();
        if (vi->type->kind == TypeKind::Record)
          r.avail += padding_bytes(vi->type->size_bytes(), env().arch.align());
        return r;
      }
      if (vi->type->kind == TypeKind::Array) {
        if (writable && vi->is_param)
          throw TypeError("parameter '" + v->name + "' is read-only", loc);
        check_expr(arg);
        r.root = v->name;
        r.avail = vi->type->size_bytes();
        return r;
      }
    }
    throw TypeError("region argument must be '&lvalue', an array, or an output parameter",
                    loc);
  }

  std::int64_t require_const_len(ExprPtr& arg, int avail, SourceLoc loc) {
    check_expr(arg);
    auto v = const_eval(env(), *arg);
    if (!v) throw TypeError("byte count must be a compile-time constant", loc);
    if (*v < 0) throw TypeError("byte count must not be negative", loc);
    if (*v > avail)
      throw TypeError("byte count " + std::to_string(*v) + " exceeds the " +
                      std::to_string(avail) + " bytes available", loc);
    insert_cast(arg, make_unsigned(32));
    return *v;
  }

  void check_builtin_call(Expr& e, CallExpr& n) {
    const BuiltinSig* b = find_builtin(n.callee, env().arch.bits);
    if (!b) throw TypeError("unknown builtin '" + n.callee + "'", e.loc);
    switch (b->kind) {
      case BuiltinKind::InputScalar: {
        if (!n.args.empty())
          throw TypeError(n.callee + "() takes no arguments", e.loc);
        e.type = b->value_type;
        return;
      }
      case BuiltinKind::Memcmp: {
        expect_args(n, 3, e.loc);
        Region a = check_region_arg(n.args[0], false, e.loc);
        Region c = check_region_arg(n.args[1], false, e.loc);
        int avail = std::min(a.avail, c.avail);
        require_const_len(n.args[2], avail, e.loc);
        e.type = make_signed(32);
        return;
      }
      case BuiltinKind::Memset: {
        expect_args(n, 3, e.loc);
        Region d = check_region_arg(n.args[0], true, e.loc);
        check_expr(n.args[1]);
        require_scalar(*n.args[1], "fill byte");
        insert_cast(n.args[1], make_unsigned(8));
        require_const_len(n.args[2], d.avail, e.loc);
        e.type = nullptr;  // void
        return;
      }
      case BuiltinKind::Memcpy: {
        expect_args(n, 3, e.loc);
        Region d = check_region_arg(n.args[0], true, e.loc);
        Region s = check_region_arg(n.args[1], false, e.loc);
        if (!d.root.empty() && d.root == s.root)
          throw TypeError("memcpy within a single object is not supported", e.loc);
        require_const_len(n.args[2], std::min(d.avail, s.avail), e.loc);
        e.type = nullptr;
        return;
      }
      case BuiltinKind::CopyToUser: {
        expect_args(n, 3, e.loc);
        Region d = check_region_arg(n.args[0], true, e.loc);
        if (!d.is_output)
          throw TypeError("copy_to_user destination must be an output parameter", e.loc);
        Region s = check_region_arg(n.args[1], false, e.loc);
        if (d.root == s.root)
          throw TypeError("copy_to_user source and destination overlap", e.loc);
        check_expr(n.args[2]);
        auto v = const_eval(env(), *n.args[2]);
        if (!v) throw TypeError("byte count must be a compile-time constant", e.loc);
        if (*v < 1 || *v > s.avail)
          throw TypeError("byte count " + std::to_string(*v) +
                          " does not fit the source region", e.loc);
        int written = static_cast<int>(*v) + padding_bytes(static_cast<int>(*v),
                                                           env().arch.align());
        if (written > d.avail)
          throw TypeError("copying " + std::to_string(*v) + " bytes plus " +
                          std::to_string(written - static_cast<int>(*v)) +
                          " trailing pad bytes overflows the destination region of " +
                          std::to_string(d.avail) + " bytes", e.loc);
        insert_cast(n.args[2], make_unsigned(32));
        e.type = make_signed(32);
        return;
      }
    }
  }

  void expect_args(const CallExpr& n, size_t k, SourceLoc loc) {
    if (n.args.size() != k)
      throw TypeError(n.callee + "() expects " + std::to_string(k) + " arguments", loc);
  }
};

inline Program typecheck(Ast ast, Arch arch = {}) {
  return TypeChecker(std::move(ast), arch).run();
}

}  // namespace leakbound
