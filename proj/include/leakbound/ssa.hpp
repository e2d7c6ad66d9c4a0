#pragma once

// Symbolic execution of the flattened driver into a bit-level circuit. Every
// variable maps to a little-endian bit vector covering its object, trailing
// pad included. Branches execute both arms on copies of the store and merge
// with muxes; a path guard contextualizes assumptions and assertions. The
// semantics here must match the interpreter exactly — the differential tests
// hold the two against each other.
//
// Free bits are allocated in groups, one group per stream draw the
// interpreter would make (a scalar nondet, one byte of an aggregate nondet,
// an input_* call, one pad byte of copy_to_user). Each group records the path
// guard under which the draw happens, so a satisfying assignment can be
// turned back into the exact stream a replay run will consume.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/bitgraph.hpp"
#include "leakbound/builtins.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/typecheck.hpp"
#include "leakbound/value.hpp"

namespace leakbound {

struct ObjectBits {
  TypePtr type;
  int extra = 0;
  BitVec bits;  // 8 * (size_bytes + extra)
};

enum class FreeOrigin { LowInput, HighInput, Internal };

struct FreeGroup {
  std::vector<std::uint32_t> nodes;  // free-bit node indices, LSB first
  int width = 0;
  FreeOrigin origin = FreeOrigin::Internal;
  int copy = 0;
  std::string label;
  BitRef guard = kTrue;  // path guard at the draw site
};

struct SsaAssert {
  BitRef cond;
  bool unwinding = false;
  SourceLoc loc;
};

struct SsaResult {
  Circuit circuit;
  std::vector<BitRef> assumes;
  std::vector<SsaAssert> asserts;
  std::map<std::string, ObjectBits> store;  // state after the driver body
  std::vector<FreeGroup> groups;            // allocation order = draw order
};

class SymbolicExec {
 public:
  SymbolicExec(const Program& prog, const DriverLayout& layout)
      : prog_(prog), layout_(&layout) {}

  SsaResult run(const StmtList& flat) {
    exec_list(flat);
    SsaResult r;
    r.circuit = std::move(c_);
    r.assumes = std::move(assumes_);
    r.asserts = std::move(asserts_);
    r.store = std::move(store_);
    r.groups = std::move(groups_);
    return r;
  }

 private:
  const Program& prog_;
  const DriverLayout* layout_;
  Circuit c_;
  std::map<std::string, ObjectBits> store_;
  BitRef guard_ = kTrue;
  std::vector<BitRef> assumes_;
  std::vector<SsaAssert> asserts_;
  std::vector<FreeGroup> groups_;

  // ---- free-bit allocation ----

  FreeOrigin classify(const std::string& name) const {
    for (const auto& n : layout_->low_vars)
      if (n == name) return FreeOrigin::LowInput;
    for (const auto& per_copy : layout_->high_vars)
      for (const auto& n : per_copy)
        if (n == name) return FreeOrigin::HighInput;
    return FreeOrigin::Internal;
  }

  BitVec alloc_group(int width, FreeOrigin origin, int copy, const std::string& label) {
    FreeGroup g;
    g.width = width;
    g.origin = origin;
    g.copy = copy;
    g.label = label;
    g.guard = guard_;
    BitVec v(static_cast<size_t>(width));
    for (int i = 0; i < width; ++i) {
      v[static_cast<size_t>(i)] = c_.fresh_free();
      g.nodes.push_back(v[static_cast<size_t>(i)].index());
    }
    groups_.push_back(std::move(g));
    return v;
  }

  // ---- object access ----

  struct Cand {
    int off = 0;       // byte offset inside the object
    BitRef guard = kTrue;
  };
  struct Path {
    std::string name;
    TypePtr type;           // type at the end of the path
    std::vector<Cand> cands;  // empty = statically out of range
  };

  Path gather(const Expr& e) {
    if (const auto* v = e.as<VarRef>()) {
      auto it = store_.find(v->name);
      if (it == store_.end()) throw InternalError("ssa: unknown variable '" + v->name + "'");
      return Path{v->name, it->second.type, {Cand{0, kTrue}}};
    }
    if (const auto* fe = e.as<FieldExpr>()) {
      if (fe->arrow) throw InternalError("ssa: pointer access survived inlining");
      Path base = gather(*fe->base);
      int off = *base.type->field_offset(fe->field);
      const Field* fd = base.type->find_field(fe->field);
      for (auto& cand : base.cands) cand.off += off;
      base.type = fd->type;
      return base;
    }
    if (const auto* ix = e.as<IndexExpr>()) {
      Path base = gather(*ix->base);
      BitVec idx = eval(*ix->index);
      int esz = base.type->element->size_bytes();
      int len = base.type->length;
      std::uint64_t k;
      std::vector<Cand> out;
      if (bv_is_const(c_, idx, &k)) {
        if (k < static_cast<std::uint64_t>(len))
          for (auto& cand : base.cands)
            out.push_back(Cand{cand.off + static_cast<int>(k) * esz, cand.guard});
        // out of range: no candidates — reads give zero, writes drop
      } else {
        for (int i = 0; i < len; ++i) {
          BitRef hit = bv_eq(c_, idx, bv_const(c_, static_cast<std::uint64_t>(i),
                                                static_cast<int>(idx.size())));
          if (hit == kFalse) continue;
          for (auto& cand : base.cands)
            out.push_back(Cand{cand.off + i * esz, c_.mk_and(cand.guard, hit)});
        }
      }
      base.cands = std::move(out);
      base.type = base.type->element;
      return base;
    }
    throw InternalError("ssa: not an object path");
  }

  // little-endian scalar load of `width` bits at byte offset `off`
  static BitVec load_bits(const ObjectBits& ob, int off, int width) {
    BitVec v(static_cast<size_t>(width));
    for (int k = 0; k < width; ++k) v[static_cast<size_t>(k)] = ob.bits[static_cast<size_t>(8 * off + k)];
    return v;
  }

  BitVec read_scalar_path(const Path& p, int width) {
    const ObjectBits& ob = store_.at(p.name);
    BitVec acc = bv_const(c_, 0, width);
    for (const auto& cand : p.cands)
      acc = bv_mux(c_, cand.guard, load_bits(ob, cand.off, width), acc);
    return acc;
  }

  // store `val` (value width) zero-extended to whole bytes, like write_raw
  void store_scalar_path(const Path& p, const BitVec& val) {
    ObjectBits& ob = store_.at(p.name);
    int width = static_cast<int>(val.size());
    int nbytes = width == 1 ? 1 : width / 8;
    for (const auto& cand : p.cands) {
      for (int k = 0; k < 8 * nbytes; ++k) {
        BitRef nv = k < width ? val[static_cast<size_t>(k)] : kFalse;
        size_t at = static_cast<size_t>(8 * cand.off + k);
        ob.bits[at] = c_.mk_mux(cand.guard, nv, ob.bits[at]);
      }
    }
  }

  // ---- region arguments for the memory builtins ----

  struct RegionPath {
    Path path;
    int avail = 0;
  };

  RegionPath resolve_region(const Expr& e) {
    if (const auto* a = e.as<AddrOfExpr>()) {
      Path p = gather(*a->arg);
      RegionPath r{std::move(p), 0};
      r.avail = r.path.type->size_bytes();
      if (a->arg->as<VarRef>()) {
        const ObjectBits& ob = store_.at(r.path.name);
        r.avail = static_cast<int>(ob.bits.size()) / 8;  // whole object incl. pad
      }
      return r;
    }
    if (const auto* v = e.as<VarRef>()) {
      auto it = store_.find(v->name);
      if (it != store_.end() && it->second.type->kind == TypeKind::Array) {
        Path p{v->name, it->second.type, {Cand{0, kTrue}}};
        return RegionPath{std::move(p), static_cast<int>(it->second.bits.size()) / 8};
      }
    }
    throw InternalError("ssa: pointer region survived inlining");
  }

  // one byte of the region, mux-folded over the candidates
  BitVec region_byte(const RegionPath& r, int k) {
    const ObjectBits& ob = store_.at(r.path.name);
    BitVec acc = bv_const(c_, 0, 8);
    for (const auto& cand : r.path.cands) {
      BitVec byte(8);
      for (int b = 0; b < 8; ++b)
        byte[static_cast<size_t>(b)] = ob.bits[static_cast<size_t>(8 * (cand.off + k) + b)];
      acc = bv_mux(c_, cand.guard, byte, acc);
    }
    return acc;
  }

  void region_write_byte(const RegionPath& r, int k, const BitVec& byte) {
    ObjectBits& ob = store_.at(r.path.name);
    for (const auto& cand : r.path.cands) {
      for (int b = 0; b < 8; ++b) {
        size_t at = static_cast<size_t>(8 * (cand.off + k) + b);
        ob.bits[at] = c_.mk_mux(cand.guard, byte[static_cast<size_t>(b)], ob.bits[at]);
      }
    }
  }

  std::uint64_t const_arg(const Expr& e, const char* what) {
    BitVec v = eval(e);
    std::uint64_t k;
    if (!bv_is_const(c_, v, &k))
      throw InternalError(std::string("ssa: ") + what + " is not a constant");
    return k;
  }

  // ---- expressions ----

  BitVec eval(const Expr& e) {
    if (const auto* lit = e.as<IntLit>())
      return bv_const(c_, lit->value, e.type->width_bits);
    if (e.as<VarRef>() || e.as<FieldExpr>() || e.as<IndexExpr>()) {
      Path p = gather(e);
      return read_scalar_path(p, e.type->width_bits);
    }
    if (const auto* u = e.as<UnaryExpr>()) {
      BitVec a = eval(*u->arg);
      switch (u->op) {
        case UnOp::Neg: return bv_neg(c_, a);
        case UnOp::BitNot: return bv_not(c_, a);
        case UnOp::LogNot: return BitVec{!bv_reduce_or(c_, a)};
      }
    }
    if (const auto* b = e.as<BinaryExpr>()) return eval_binary(e, *b);
    if (const auto* cast = e.as<CastExpr>()) {
      BitVec a = eval(*cast->arg);
      return convert(a, cast->arg->type, e.type);
    }
    if (const auto* s = e.as<SizeofExpr>()) {
      int n = s->of_type ? prog_.env.resolve(*s->of_type, e.loc)->size_bytes()
                         : s->of_expr->type->size_bytes();
      return bv_const(c_, static_cast<std::uint64_t>(n), e.type->width_bits);
    }
    if (const auto* q = e.as<AggEqExpr>()) {
      const auto* lv = q->lhs->as<VarRef>();
      const auto* rv = q->rhs->as<VarRef>();
      if (!lv || !rv) throw InternalError("ssa: byte-compare of non-variables");
      const ObjectBits& a = store_.at(lv->name);
      const ObjectBits& b = store_.at(rv->name);
      if (a.bits.size() != b.bits.size())
        throw InternalError("ssa: byte-compare of differently sized objects");
      return BitVec{bv_eq(c_, a.bits, b.bits)};
    }
    if (e.as<CallExpr>())
      throw InternalError("ssa: call in expression position; flattening failed");
    if (e.as<NondetExpr>())
      throw InternalError("ssa: nondet outside a declaration");
    throw InternalError("ssa: unhandled expression");
  }

  BitVec convert(const BitVec& v, const TypePtr& from, const TypePtr& to) {
    if (to->kind == TypeKind::Bool) return BitVec{bv_reduce_or(c_, v)};
    int tw = to->width_bits;
    int vw = static_cast<int>(v.size());
    if (tw <= vw) return bv_trunc(v, tw);
    return is_signed_type(from) ? bv_sext(c_, v, tw) : bv_zext(c_, v, tw);
  }

  BitVec eval_binary(const Expr& e, const BinaryExpr& b) {
    BitVec l = eval(*b.lhs);
    BitVec r = eval(*b.rhs);
    bool lsigned = is_signed_type(b.lhs->type);
    switch (b.op) {
      case BinOp::Add: return bv_add(c_, l, r);
      case BinOp::Sub: return bv_sub(c_, l, r);
      case BinOp::Mul: {
        std::uint64_t k;
        if (l.size() > 32 && !bv_is_const(c_, l, &k) && !bv_is_const(c_, r, &k))
          throw AnalysisError("multiplication over 32 bits needs a constant operand",
                              e.loc);
        return bv_mul(c_, l, r);
      }
      case BinOp::Div: {
        BitVec q, rem;
        if (lsigned) bv_sdivrem(c_, l, r, &q, &rem);
        else bv_udivrem(c_, l, r, &q, &rem);
        return q;
      }
      case BinOp::Rem: {
        BitVec q, rem;
        if (lsigned) bv_sdivrem(c_, l, r, &q, &rem);
        else bv_udivrem(c_, l, r, &q, &rem);
        return rem;
      }
      case BinOp::BitAnd: return bv_and(c_, l, r);
      case BinOp::BitOr: return bv_or(c_, l, r);
      case BinOp::BitXor: return bv_xor(c_, l, r);
      case BinOp::Shl: return bv_shift(c_, l, r, /*left=*/true, /*arith=*/false);
      case BinOp::Shr: return bv_shift(c_, l, r, /*left=*/false, /*arith=*/lsigned);
      case BinOp::Eq: return BitVec{bv_eq(c_, l, r)};
      case BinOp::Ne: return BitVec{!bv_eq(c_, l, r)};
      case BinOp::Lt: return BitVec{lsigned ? bv_slt(c_, l, r) : bv_ult(c_, l, r)};
      case BinOp::Gt: return BitVec{lsigned ? bv_slt(c_, r, l) : bv_ult(c_, r, l)};
      case BinOp::Le: return BitVec{!(lsigned ? bv_slt(c_, r, l) : bv_ult(c_, r, l))};
      case BinOp::Ge: return BitVec{!(lsigned ? bv_slt(c_, l, r) : bv_ult(c_, l, r))};
      case BinOp::LAnd:
        return BitVec{c_.mk_and(bv_reduce_or(c_, l), bv_reduce_or(c_, r))};
      case BinOp::LOr:
        return BitVec{c_.mk_or(bv_reduce_or(c_, l), bv_reduce_or(c_, r))};
    }
    throw InternalError("ssa: unhandled binary op");
  }

  // ---- builtins; returns false if the callee is not a builtin ----

  bool eval_builtin(const Expr&, const CallExpr& call, int copy, BitVec* out) {
    const BuiltinSig* b = is_builtin_name(call.callee)
                              ? find_builtin(call.callee, prog_.env.arch.bits)
                              : nullptr;
    if (!b) return false;
    switch (b->kind) {
      case BuiltinKind::InputScalar: {
        BitVec v = alloc_group(b->value_type->width_bits, FreeOrigin::Internal, copy,
                               call.callee);
        if (out) *out = std::move(v);
        return true;
      }
      case BuiltinKind::Memcmp: {
        RegionPath x = resolve_region(*call.args[0]);
        RegionPath y = resolve_region(*call.args[1]);
        int n = static_cast<int>(const_arg(*call.args[2], "memcmp length"));
        BitRef eq = kTrue;
        for (int k = 0; k < n; ++k)
          eq = c_.mk_and(eq, bv_eq(c_, region_byte(x, k), region_byte(y, k)));
        if (out)
          *out = bv_mux(c_, eq, bv_const(c_, 0, 32),
                        bv_const(c_, static_cast<std::uint64_t>(-1), 32));
        return true;
      }
      case BuiltinKind::Memset: {
        RegionPath d = resolve_region(*call.args[0]);
        BitVec byte = eval(*call.args[1]);
        byte.resize(8, kFalse);
        int n = static_cast<int>(const_arg(*call.args[2], "memset length"));
        for (int k = 0; k < n; ++k) region_write_byte(d, k, byte);
        if (out) throw InternalError("ssa: memset has no value");
        return true;
      }
      case BuiltinKind::Memcpy: {
        RegionPath d = resolve_region(*call.args[0]);
        RegionPath s = resolve_region(*call.args[1]);
        int n = static_cast<int>(const_arg(*call.args[2], "memcpy length"));
        std::vector<BitVec> bytes;
        for (int k = 0; k < n; ++k) bytes.push_back(region_byte(s, k));
        for (int k = 0; k < n; ++k) region_write_byte(d, k, bytes[static_cast<size_t>(k)]);
        if (out) throw InternalError("ssa: memcpy has no value");
        return true;
      }
      case BuiltinKind::CopyToUser: {
        RegionPath d = resolve_region(*call.args[0]);
        RegionPath s = resolve_region(*call.args[1]);
        int n = static_cast<int>(const_arg(*call.args[2], "copy_to_user length"));
        std::vector<BitVec> bytes;
        for (int k = 0; k < n; ++k) bytes.push_back(region_byte(s, k));
        for (int k = 0; k < n; ++k) region_write_byte(d, k, bytes[static_cast<size_t>(k)]);
        int pad = padding_bytes(n, prog_.env.arch.align());
        for (int k = 0; k < pad; ++k) {
          BitVec fresh = alloc_group(8, FreeOrigin::Internal, copy, "copy_to_user pad");
          region_write_byte(d, n + k, fresh);
        }
        if (out) *out = bv_const(c_, 0, 32);
        return true;
      }
    }
    throw InternalError("ssa: unhandled builtin");
  }

  // ---- statements ----

  void exec_list(const StmtList& body) {
    for (const auto& s : body) exec(*s);
  }

  void exec(const Stmt& s) {
    if (const auto* d = s.as<DeclStmt>()) {
      TypePtr t = prog_.env.resolve(d->declared, s.loc);
      ObjectBits ob;
      ob.type = t;
      ob.extra = d->region_extra_bytes;
      ob.bits.assign(static_cast<size_t>(8 * (t->size_bytes() + ob.extra)), kFalse);
      if (d->init) {
        if (d->init->as<NondetExpr>()) {
          if (t->kind == TypeKind::Record || t->kind == TypeKind::Array) {
            FreeOrigin origin = classify(d->name);
            for (int k = 0; k < t->size_bytes(); ++k) {
              BitVec byte = alloc_group(8, origin, s.copy_index, d->name);
              for (int b = 0; b < 8; ++b)
                ob.bits[static_cast<size_t>(8 * k + b)] = byte[static_cast<size_t>(b)];
            }
          } else {
            BitVec v = alloc_group(t->width_bits, classify(d->name), s.copy_index, d->name);
            write_fresh_scalar(ob, v);
          }
        } else if (const auto* call = expr_as<CallExpr>(d->init);
                   call && is_builtin_name(call->callee)) {
          BitVec v;
          eval_builtin(*d->init, *call, s.copy_index, &v);
          v = convert(v, d->init->type, t);
          write_fresh_scalar(ob, v);
        } else {
          BitVec v = eval(*d->init);
          write_fresh_scalar(ob, v);
        }
      }
      store_[d->name] = std::move(ob);
      return;
    }
    if (const auto* a = s.as<AssignStmt>()) {
      BitVec v = eval(*a->value);
      Path p = gather(*a->target);
      store_scalar_path(p, v);
      return;
    }
    if (const auto* i = s.as<IfStmt>()) {
      BitVec cv = eval(*i->cond);
      BitRef b = cv[0];
      if (b == kTrue) {
        exec_list(i->then_body);
        return;
      }
      if (b == kFalse) {
        exec_list(i->else_body);
        return;
      }
      auto saved = store_;
      BitRef outer = guard_;
      guard_ = c_.mk_and(outer, b);
      exec_list(i->then_body);
      auto then_store = std::move(store_);
      store_ = std::move(saved);
      guard_ = c_.mk_and(outer, !b);
      exec_list(i->else_body);
      guard_ = outer;
      for (auto& [name, tv] : then_store) {
        auto it = store_.find(name);
        if (it == store_.end()) {
          store_.emplace(name, std::move(tv));
        } else if (it->second.bits.size() == tv.bits.size()) {
          it->second.bits = bv_mux(c_, b, tv.bits, it->second.bits);
        }
        // size mismatch: branch-local redeclaration, dead after the join
      }
      return;
    }
    if (const auto* a = s.as<AssumeStmt>()) {
      BitVec cv = eval(*a->cond);
      assumes_.push_back(c_.mk_implies(guard_, bv_reduce_or(c_, cv)));
      return;
    }
    if (const auto* a = s.as<AssertStmt>()) {
      BitVec cv = eval(*a->cond);
      asserts_.push_back(
          SsaAssert{c_.mk_implies(guard_, bv_reduce_or(c_, cv)), a->unwinding, s.loc});
      return;
    }
    if (const auto* x = s.as<ExprStmt>()) {
      const auto* call = expr_as<CallExpr>(x->expr);
      if (!call) throw InternalError("ssa: expression statement is not a call");
      if (!eval_builtin(*x->expr, *call, s.copy_index, nullptr))
        throw InternalError("ssa: user call survived inlining");
      return;
    }
    if (const auto* blk = s.as<BlockStmt>()) {
      exec_list(blk->body);
      return;
    }
    throw InternalError("ssa: loops and returns must be flattened first");
  }

  // write a freshly computed scalar into a zeroed object at offset 0
  static void write_fresh_scalar(ObjectBits& ob, const BitVec& v) {
    for (size_t k = 0; k < v.size(); ++k) ob.bits[k] = v[k];
  }
};

inline SsaResult symbolic_exec(const DriverProgram& d, const StmtList& flat) {
  return SymbolicExec(d.prog, d.layout).run(flat);
}

// ---------------------------------------------------------------------------
// Concrete evaluation of a finished circuit (differential tests, model
// checking, counterexample decoding).
// ---------------------------------------------------------------------------

inline std::vector<bool> ssa_eval(const SsaResult& r,
                                  const std::unordered_map<std::uint32_t, bool>& free_bits) {
  return r.circuit.evaluate(free_bits);
}

inline std::vector<std::uint8_t> object_bytes(const ObjectBits& ob,
                                              const std::vector<bool>& vals) {
  std::vector<std::uint8_t> out(ob.bits.size() / 8, 0);
  for (size_t i = 0; i < ob.bits.size(); ++i)
    if (Circuit::read(vals, ob.bits[i])) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

inline std::uint64_t group_value(const FreeGroup& g, const std::vector<bool>& vals) {
  std::uint64_t x = 0;
  for (size_t i = 0; i < g.nodes.size() && i < 64; ++i)
    if (vals[g.nodes[i]]) x |= 1ull << i;
  return x;
}

inline std::string dump_ssa(const SsaResult& r) {
  std::ostringstream os;
  os << "nodes " << r.circuit.node_count() << "\n";
  for (const auto& g : r.groups) {
    os << "free ";
    switch (g.origin) {
      case FreeOrigin::LowInput: os << "low "; break;
      case FreeOrigin::HighInput: os << "high "; break;
      case FreeOrigin::Internal: os << "internal "; break;
    }
    os << g.label << " copy " << g.copy << " width " << g.width << " nodes";
    if (!g.nodes.empty()) os << " n" << g.nodes.front() << "..n" << g.nodes.back();
    os << "\n";
  }
  for (const auto& [name, ob] : r.store) {
    os << "var " << name << " " << type_name_str(*ob.type);
    if (ob.extra) os << " pad " << ob.extra;
    os << " bits " << ob.bits.size() << "\n";
  }
  os << "assumes " << r.assumes.size() << "\n";
  int unwinding = 0;
  for (const auto& a : r.asserts) unwinding += a.unwinding ? 1 : 0;
  os << "asserts " << r.asserts.size() << " (" << unwinding << " unwinding)\n";
  return os.str();
}

}  // namespace leakbound
