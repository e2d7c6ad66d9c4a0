#pragma once

// Renders a driver instance as one standalone C translation unit: stub
// prototypes for the nondet sources and the assume/assert pair up front
// (suppress with LEAKBOUND_NO_STUBS to bind your own), packed record layout,
// then the surface functions and __driver verbatim. Observation regions that
// carry trailing pad bytes are wrapped in a pad-carrier struct so the byte
// compares cover the pad and an external copy_to_user model has room to
// write it.

#include <cctype>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/builtins.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/print.hpp"

namespace leakbound {
namespace detail {

// Must stay in sync with the printer's nondet_ suffixes.
inline std::string emit_nondet_suffix(const TypePtr& t) {
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

inline std::string emit_c_type(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::Bool: return "bool";
    case TypeKind::SignedInt:
      switch (t->width_bits) {
        case 8: return "signed char";
        case 16: return "short";
        case 32: return "int";
        default: return "long long";
      }
    case TypeKind::UnsignedInt:
      switch (t->width_bits) {
        case 8: return "unsigned char";
        case 16: return "unsigned short";
        case 32: return "unsigned int";
        default: return "unsigned long long";
      }
    case TypeKind::Record: return "struct " + t->record_name;
    case TypeKind::Array: break;
  }
  throw AnalysisError("cannot emit a C nondet source for an array-typed input");
}

struct EmitScan {
  std::map<std::string, TypePtr> nondets;  // suffix -> type
  std::set<std::string> inputs_used;       // input_* builtins called
  bool uses_copy_to_user = false;
  bool uses_string_h = false;  // memcmp / memcpy / memset (or synthesized ones)
  bool uses_bool = false;
};

inline void emit_scan_expr(const ExprPtr& e, EmitScan& s);

inline void emit_scan_type(const TypeName& tn, EmitScan& s) {
  if (tn.base == "bool") s.uses_bool = true;
}

inline void emit_scan_expr(const ExprPtr& e, EmitScan& s) {
  if (!e) return;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FieldExpr>) {
          emit_scan_expr(n.base, s);
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          emit_scan_expr(n.base, s);
          emit_scan_expr(n.index, s);
        } else if constexpr (std::is_same_v<T, DerefExpr>) {
          emit_scan_expr(n.base, s);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          emit_scan_expr(n.arg, s);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          emit_scan_expr(n.lhs, s);
          emit_scan_expr(n.rhs, s);
        } else if constexpr (std::is_same_v<T, CastExpr>) {
          emit_scan_type(n.target, s);
          emit_scan_expr(n.arg, s);
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          if (n.callee.rfind("input_", 0) == 0 && is_builtin_name(n.callee))
            s.inputs_used.insert(n.callee);
          else if (n.callee == "copy_to_user")
            s.uses_copy_to_user = true;
          else if (n.callee == "memcmp" || n.callee == "memcpy" || n.callee == "memset")
            s.uses_string_h = true;
          for (const auto& a : n.args) emit_scan_expr(a, s);
        } else if constexpr (std::is_same_v<T, SizeofExpr>) {
          if (n.of_type) emit_scan_type(*n.of_type, s);
          emit_scan_expr(n.of_expr, s);
        } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
          emit_scan_expr(n.arg, s);
        } else if constexpr (std::is_same_v<T, NondetExpr>) {
          s.nondets.emplace(emit_nondet_suffix(e->type), e->type);
          if (e->type && e->type->kind == TypeKind::Bool) s.uses_bool = true;
        } else if constexpr (std::is_same_v<T, AggEqExpr>) {
          s.uses_string_h = true;  // prints as memcmp
          emit_scan_expr(n.lhs, s);
          emit_scan_expr(n.rhs, s);
        }
      },
      e->node);
}

inline void emit_scan_stmts(const StmtList& body, EmitScan& s) {
  for (const auto& sp : body) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            emit_scan_type(n.declared, s);
            emit_scan_expr(n.init, s);
          } else if constexpr (std::is_same_v<T, AssignStmt>) {
            emit_scan_expr(n.target, s);
            emit_scan_expr(n.value, s);
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            emit_scan_expr(n.cond, s);
            emit_scan_stmts(n.then_body, s);
            emit_scan_stmts(n.else_body, s);
          } else if constexpr (std::is_same_v<T, WhileStmt>) {
            emit_scan_expr(n.cond, s);
            emit_scan_stmts(n.body, s);
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            if (n.init) {
              if (const auto* d = n.init->template as<DeclStmt>()) {
                emit_scan_type(d->declared, s);
                emit_scan_expr(d->init, s);
              } else if (const auto* a = n.init->template as<AssignStmt>()) {
                emit_scan_expr(a->target, s);
                emit_scan_expr(a->value, s);
              }
            }
            emit_scan_expr(n.cond, s);
            if (n.step) {
              if (const auto* a = n.step->template as<AssignStmt>()) {
                emit_scan_expr(a->target, s);
                emit_scan_expr(a->value, s);
              }
            }
            emit_scan_stmts(n.body, s);
          } else if constexpr (std::is_same_v<T, ReturnStmt>) {
            emit_scan_expr(n.value, s);
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            emit_scan_expr(n.expr, s);
          } else if constexpr (std::is_same_v<T, AssumeStmt>) {
            emit_scan_expr(n.cond, s);
          } else if constexpr (std::is_same_v<T, AssertStmt>) {
            emit_scan_expr(n.cond, s);
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            emit_scan_stmts(n.body, s);
          }
        },
        sp->node);
  }
}

// Pad-carrying observation region: declared type and the trailing byte count.
struct PadRegion {
  TypeName base;
  int extra = 0;
  std::string wrapper;  // synthesized struct name
};

inline std::string pad_wrapper_name(const TypeName& base, int extra) {
  std::string n = base.base;
  if (n.rfind("struct ", 0) == 0) n = n.substr(7);
  for (char& c : n)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) c = '_';
  return "__lb_" + n + "_pad" + std::to_string(extra);
}

// &r  ->  &r.v   for pad-region vars passed to the entry.
inline void rewrite_region_addrs(ExprPtr& e, const std::map<std::string, PadRegion>& regions);

inline void rewrite_region_addrs_in(CallExpr& c, const std::map<std::string, PadRegion>& regions) {
  for (auto& a : c.args) rewrite_region_addrs(a, regions);
}

inline void rewrite_region_addrs(ExprPtr& e, const std::map<std::string, PadRegion>& regions) {
  if (!e) return;
  if (auto* ad = expr_as<AddrOfExpr>(e)) {
    if (const auto* v = expr_as<VarRef>(ad->arg)) {
      if (regions.count(v->name)) {
        Expr f;
        f.node = FieldExpr{std::move(ad->arg), "v", false};
        ad->arg = make_expr(std::move(f));
        return;
      }
    }
    rewrite_region_addrs(ad->arg, regions);
    return;
  }
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FieldExpr> || std::is_same_v<T, DerefExpr>) {
          rewrite_region_addrs(n.base, regions);
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          rewrite_region_addrs(n.base, regions);
          rewrite_region_addrs(n.index, regions);
        } else if constexpr (std::is_same_v<T, UnaryExpr> || std::is_same_v<T, CastExpr>) {
          rewrite_region_addrs(n.arg, regions);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          rewrite_region_addrs(n.lhs, regions);
          rewrite_region_addrs(n.rhs, regions);
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          rewrite_region_addrs_in(n, regions);
        } else if constexpr (std::is_same_v<T, AggEqExpr>) {
          rewrite_region_addrs(n.lhs, regions);
          rewrite_region_addrs(n.rhs, regions);
        }
      },
      e->node);
}

// AggEq  ->  memcmp(&a, &b, len) == 0  with pad-aware length, so the C text
// no longer depends on type annotations the surgery below would stale out.
inline void rewrite_aggeq(ExprPtr& e, const std::map<std::string, PadRegion>& regions) {
  if (!e) return;
  if (auto* ag = expr_as<AggEqExpr>(e)) {
    rewrite_aggeq(ag->lhs, regions);
    rewrite_aggeq(ag->rhs, regions);
    int len = ag->lhs->type ? ag->lhs->type->size_bytes() : 0;
    if (const auto* v = expr_as<VarRef>(ag->lhs)) {
      auto it = regions.find(v->name);
      if (it != regions.end()) len += it->second.extra;
    }
    CallExpr cmp;
    cmp.callee = "memcmp";
    Expr la;
    la.node = AddrOfExpr{std::move(ag->lhs)};
    Expr ra;
    ra.node = AddrOfExpr{std::move(ag->rhs)};
    cmp.args.push_back(make_expr(std::move(la)));
    cmp.args.push_back(make_expr(std::move(ra)));
    Expr ln;
    ln.node = IntLit{static_cast<std::uint64_t>(len)};
    cmp.args.push_back(make_expr(std::move(ln)));
    Expr call;
    call.node = std::move(cmp);
    Expr zero;
    zero.node = IntLit{0};
    Expr eq;
    eq.node = BinaryExpr{BinOp::Eq, make_expr(std::move(call)), make_expr(std::move(zero))};
    *e = std::move(eq);
    return;
  }
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FieldExpr> || std::is_same_v<T, DerefExpr>) {
          rewrite_aggeq(n.base, regions);
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          rewrite_aggeq(n.base, regions);
          rewrite_aggeq(n.index, regions);
        } else if constexpr (std::is_same_v<T, UnaryExpr> || std::is_same_v<T, CastExpr>) {
          rewrite_aggeq(n.arg, regions);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          rewrite_aggeq(n.lhs, regions);
          rewrite_aggeq(n.rhs, regions);
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          for (auto& a : n.args) rewrite_aggeq(a, regions);
        } else if constexpr (std::is_same_v<T, AddrOfExpr>) {
          rewrite_aggeq(n.arg, regions);
        }
      },
      e->node);
}

inline StmtPtr make_memset_zero(const std::string& name, int len) {
  CallExpr c;
  c.callee = "memset";
  Expr v;
  v.node = VarRef{name};
  Expr a;
  a.node = AddrOfExpr{make_expr(std::move(v))};
  c.args.push_back(make_expr(std::move(a)));
  Expr z;
  z.node = IntLit{0};
  c.args.push_back(make_expr(std::move(z)));
  Expr l;
  l.node = IntLit{static_cast<std::uint64_t>(len)};
  c.args.push_back(make_expr(std::move(l)));
  Expr call;
  call.node = std::move(c);
  Stmt s;
  s.node = ExprStmt{make_expr(std::move(call))};
  return make_stmt(std::move(s));
}

// Declarations are zero-initialized in this language; C leaves them
// indeterminate, so bare decls get an explicit = 0 / memset.
inline bool emit_zero_init(const TypeEnv& env, StmtList& body, EmitScan& scan,
                           const std::map<std::string, PadRegion>& regions) {
  bool added_memset = false;
  for (size_t i = 0; i < body.size(); ++i) {
    Stmt& s = *body[i];
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            if (n.init) return;
            auto rit = regions.find(n.name);
            if (rit != regions.end()) {
              int full = env.resolve(rit->second.base, s.loc)->size_bytes() + rit->second.extra;
              body.insert(body.begin() + static_cast<long>(i) + 1,
                          make_memset_zero(n.name, full));
              added_memset = true;
              return;
            }
            TypePtr t = env.resolve(n.declared, s.loc);
            if (t->kind == TypeKind::Record || t->kind == TypeKind::Array) {
              body.insert(body.begin() + static_cast<long>(i) + 1,
                          make_memset_zero(n.name, t->size_bytes()));
              added_memset = true;
            } else {
              Expr z;
              z.node = IntLit{0};
              n.init = make_expr(std::move(z));
            }
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            added_memset |= emit_zero_init(env, n.then_body, scan, regions);
            added_memset |= emit_zero_init(env, n.else_body, scan, regions);
          } else if constexpr (std::is_same_v<T, WhileStmt>) {
            added_memset |= emit_zero_init(env, n.body, scan, regions);
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            added_memset |= emit_zero_init(env, n.body, scan, regions);
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            added_memset |= emit_zero_init(env, n.body, scan, regions);
          }
        },
        s.node);
  }
  return added_memset;
}

}  // namespace detail

inline void emit_driver_c(const DriverProgram& d, std::ostream& os) {
  const Program& p = d.prog;
  Ast ast = clone_ast(p.ast);

  FunctionDef* drv = nullptr;
  for (auto& f : ast.functions)
    if (f.name == kDriverName) drv = &f;
  if (!drv) throw InternalError("driver function missing from driver program");

  // pad-carrying regions, from the driver's own decls
  std::map<std::string, detail::PadRegion> regions;
  std::map<std::string, detail::PadRegion> wrappers;  // wrapper name -> shape
  for (auto& sp : drv->body) {
    auto* dc = sp->as<DeclStmt>();
    if (!dc || dc->region_extra_bytes <= 0) continue;
    detail::PadRegion r;
    r.base = dc->declared;
    r.extra = dc->region_extra_bytes;
    r.wrapper = detail::pad_wrapper_name(dc->declared, dc->region_extra_bytes);
    wrappers.emplace(r.wrapper, r);
    regions.emplace(dc->name, std::move(r));
  }

  detail::EmitScan scan;
  for (const auto& f : ast.functions) {
    detail::emit_scan_type(f.return_type, scan);
    for (const auto& pr : f.params) detail::emit_scan_type(pr.declared, scan);
    detail::emit_scan_stmts(f.body, scan);
  }
  for (const auto& r : ast.records)
    for (const auto& fl : r.fields) detail::emit_scan_type(fl.declared, scan);
  for (const auto& t : ast.typedefs) detail::emit_scan_type(t.aliased, scan);

  // surgery order matters: entry-call &r first, then AggEq (whose synthesized
  // memcmp takes the wrapper whole), then zeroing
  for (auto& sp : drv->body) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            detail::rewrite_region_addrs(n.init, regions);
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            detail::rewrite_region_addrs(n.expr, regions);
          } else if constexpr (std::is_same_v<T, AssumeStmt>) {
            detail::rewrite_region_addrs(n.cond, regions);
            detail::rewrite_aggeq(n.cond, regions);
          } else if constexpr (std::is_same_v<T, AssertStmt>) {
            detail::rewrite_region_addrs(n.cond, regions);
            detail::rewrite_aggeq(n.cond, regions);
          }
        },
        sp->node);
    if (auto* dc = sp->as<DeclStmt>()) {
      auto it = regions.find(dc->name);
      if (it != regions.end())
        dc->declared = TypeName{"struct " + it->second.wrapper, false, {}};
    }
  }
  bool memsets = false;
  const std::map<std::string, detail::PadRegion> no_regions;
  for (auto& f : ast.functions)
    memsets |= detail::emit_zero_init(p.env, f.body, scan,
                                      f.name == kDriverName ? regions : no_regions);
  if (memsets || !regions.empty()) scan.uses_string_h = true;

  const int arch_bits = p.env.arch.bits;
  const int n_copies = d.layout.copies;

  os << "/* self-composition driver: " << n_copies << " invocations of "
     << d.layout.entry << " on one shared low input";
  if (d.layout.has_assert)
    os << ";\n * the assert fails exactly when " << n_copies
       << " pairwise distinct observations coexist (policy N = " << n_copies - 1 << ")";
  os << ".\n";
  os << " *\n"
     << " * target model: " << arch_bits << "-bit long, two's-complement wraparound,\n"
     << " * packed record layout (no interior padding), zero-initialized locals.\n";
  if (scan.uses_copy_to_user || !regions.empty())
    os << " * copy_to_user(dst, src, n) copies n bytes and then writes fresh\n"
       << " * nondeterministic values into the trailing pad bytes; regions below\n"
       << " * are wrapped in *_pad structs so those bytes exist and get compared.\n";
  os << " * memcmp here returns 0 on equality and -1 otherwise.\n"
     << " *\n"
     << " * compiles as-is; to run it under a bounded model checker, define\n"
     << " * LEAKBOUND_NO_STUBS and bind nondet_*, assume and assert to the\n"
     << " * checker's intrinsics.\n"
     << " */\n\n";

  if (scan.uses_bool) os << "#include <stdbool.h>\n";
  if (scan.uses_string_h) os << "#include <string.h>\n";
  if (scan.uses_bool || scan.uses_string_h) os << "\n";

  os << "#ifndef LEAKBOUND_NO_STUBS\n";
  os << "extern void assume(int cond);\n";
  os << "extern void assert(int cond);\n";
  if (scan.uses_copy_to_user)
    os << "extern int copy_to_user(void *dst, const void *src, unsigned long n);\n";
  {
    static const std::pair<const char*, const char*> kInputs[] = {
        {"input_bool", "bool"},
        {"input_char", "signed char"},
        {"input_uchar", "unsigned char"},
        {"input_short", "short"},
        {"input_ushort", "unsigned short"},
        {"input_int", "int"},
        {"input_uint", "unsigned int"},
        {"input_long", "long"},
        {"input_ulong", "unsigned long"},
        {"input_longlong", "long long"},
        {"input_ulonglong", "unsigned long long"},
    };
    for (const auto& [name, ctype] : kInputs)
      if (scan.inputs_used.count(name)) os << "extern " << ctype << " " << name << "(void);\n";
  }
  os << "#endif\n";
  os << "#define __ASSUME(cond) assume(cond)\n";
  os << "#define __ASSERT(cond) assert(cond)\n\n";

  if (!ast.records.empty() || !wrappers.empty()) os << "#pragma pack(1)\n\n";

  Printer pr(os);
  bool first = true;
  for (const auto& t : ast.typedefs) {
    pr.print_typedef(t);
    first = false;
  }
  for (const auto& r : ast.records) {
    if (!first) os << "\n";
    pr.print_record(r);
    first = false;
  }
  for (const auto& [wname, shape] : wrappers) {
    if (!first) os << "\n";
    RecordDecl w;
    w.name = wname;
    w.fields.push_back(RecordField{shape.base, "v", {}});
    TypeName padt;
    padt.base = "unsigned char";
    padt.array_len = shape.extra;
    w.fields.push_back(RecordField{padt, "__pad", {}});
    pr.print_record(w);
    first = false;
  }

  // nondet prototypes need the record decls in scope, so they come after
  if (!scan.nondets.empty()) {
    if (!first) os << "\n";
    os << "#ifndef LEAKBOUND_NO_STUBS\n";
    for (const auto& [suffix, t] : scan.nondets)
      os << "extern " << detail::emit_c_type(t) << " nondet_" << suffix << "(void);\n";
    os << "#endif\n";
    first = false;
  }

  for (const auto& f : ast.functions) {
    os << "\n";
    pr.print_function(f);
  }
}

inline std::string emit_driver_c(const DriverProgram& d) {
  std::ostringstream os;
  emit_driver_c(d, os);
  return os.str();
}

}  // namespace leakbound
