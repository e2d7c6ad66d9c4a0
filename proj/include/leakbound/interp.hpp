#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leakbound/ast.hpp"
#include "leakbound/builtins.hpp"
#include "leakbound/diag.hpp"
#include "leakbound/typecheck.hpp"
#include "leakbound/value.hpp"

namespace leakbound {

// Thrown by a strict stream when a run needs one more nondeterministic value
// than the prefix provides. The relation enumerator catches it and branches
// over the 2^bits possibilities.
struct StreamExhausted {
  int bits;
  size_t index;
};

class NondetStream {
 public:
  virtual ~NondetStream() = default;
  virtual std::uint64_t next_bits(int bits) = 0;
};

// Fixed prefix, strict about its end.
class VectorStream : public NondetStream {
 public:
  VectorStream() = default;
  explicit VectorStream(std::vector<std::uint64_t> vals) : vals_(std::move(vals)) {}

  std::uint64_t next_bits(int bits) override {
    if (pos_ >= vals_.size()) throw StreamExhausted{bits, pos_};
    widths_.push_back(bits);
    return mask_to(vals_[pos_++], bits);
  }

  size_t consumed() const { return pos_; }
  const std::vector<int>& widths() const { return widths_; }

 private:
  std::vector<std::uint64_t> vals_;
  size_t pos_ = 0;
  std::vector<int> widths_;
};

struct TraceStep {
  SourceLoc loc;
  std::string function;
  int copy = 0;
  std::string target;
  std::string value;
};
using Trace = std::vector<TraceStep>;

struct RunResult {
  enum class Status { Ok, AssumeFail, AssertFail };
  Status status = Status::Ok;
  std::optional<Value> ret;
  std::map<std::string, Object> outputs;  // output-parameter regions by name
  SourceLoc fail_loc;
};

struct InterpConfig {
  std::uint64_t step_budget = 1ull << 20;
  Trace* trace = nullptr;
  int copy_tag = 0;  // label recorded on trace steps
};

class Interp {
 public:
  Interp(const Program& prog, NondetStream& stream, InterpConfig cfg = {})
      : prog_(prog), stream_(stream), cfg_(cfg), steps_left_(cfg.step_budget) {}

  // Call `fn` with the given objects bound to its value parameters, in
  // parameter order. Output-parameter regions are allocated here, zeroed.
  RunResult call(const std::string& fn, std::vector<Object> value_args) {
    const FuncSig& sig = prog_.sigs.at(fn);
    const FunctionDef* def = prog_.ast.find_function(fn);
    if (!def) throw AnalysisError("no function '" + fn + "'");

    Frame frame;
    frame.func = fn;
    size_t vi = 0;
    std::vector<std::string> out_names;
    for (const auto& p : sig.params) {
      if (p.is_output) {
        int extra = p.type->kind == TypeKind::Record
                        ? padding_bytes(p.type->size_bytes(), prog_.env.arch.align())
                        : 0;
        frame.owned.push_back(make_object(p.type, extra));
        Object& o = frame.owned.back();
        frame.vars[p.name] = Slot{&o, 0, p.type, o.size(), true};
        out_names.push_back(p.name);
      } else {
        if (vi >= value_args.size())
          throw AnalysisError("too few arguments for '" + fn + "'");
        frame.owned.push_back(std::move(value_args[vi++]));
        Object& o = frame.owned.back();
        frame.vars[p.name] = Slot{&o, 0, p.type, o.size(), false};
      }
    }
    if (vi != value_args.size())
      throw AnalysisError("too many arguments for '" + fn + "'");

    RunResult res;
    status_ = RunResult::Status::Ok;
    Flow f = exec_body(def->body, frame, sig);
    res.status = status_;
    res.fail_loc = fail_loc_;
    if (res.status == RunResult::Status::Ok) {
      if (sig.ret) {
        if (f == Flow::Returned && frame.ret) {
          res.ret = frame.ret;
        } else {
          res.ret = make_value(sig.ret, 0);  // fell off the end
        }
      }
      for (const auto& n : out_names) res.outputs[n] = *frame.vars.at(n).obj;
    }
    return res;
  }

 private:
  const Program& prog_;
  NondetStream& stream_;
  InterpConfig cfg_;
  std::uint64_t steps_left_;
  RunResult::Status status_ = RunResult::Status::Ok;
  SourceLoc fail_loc_;

  struct Slot {
    Object* obj = nullptr;
    int offset = 0;       // where this binding starts inside obj
    TypePtr type;
    int avail = 0;        // bytes from offset to the end of obj (incl. pad)
    bool is_ref = false;  // output parameter bound into another frame
  };

  struct Frame {
    std::string func;
    std::map<std::string, Slot> vars;
    std::deque<Object> owned;
    std::optional<Value> ret;
  };

  enum class Flow { Next, Returned, Aborted };

  void spend() {
    if (steps_left_ == 0)
      throw AnalysisError("interpreter step budget exceeded; the program may not "
                          "terminate or needs a larger budget");
    --steps_left_;
  }

  void record(SourceLoc loc, const Frame& f, std::string target, std::string value) {
    if (!cfg_.trace) return;
    cfg_.trace->push_back(TraceStep{loc, f.func, cfg_.copy_tag, std::move(target),
                                    std::move(value)});
  }

  // ---- lvalues and regions ----

  struct Place {
    Object* obj = nullptr;
    int offset = 0;
    TypePtr type;
    bool in_bounds = true;  // false: dynamic index out of range
  };

  Place resolve_place(const Expr& e, Frame& f) {
    if (const auto* v = e.as<VarRef>()) {
      const Slot& s = f.vars.at(v->name);
      return Place{s.obj, s.offset, s.type, true};
    }
    if (const auto* d = e.as<DerefExpr>()) {
      return resolve_place(*d->base, f);
    }
    if (const auto* fe = e.as<FieldExpr>()) {
      Place base = resolve_place(*fe->base, f);
      const TypePtr& rt = fe->arrow ? f.vars.at(fe->base->as<VarRef>()->name).type
                                    : base.type;
      int off = *rt->field_offset(fe->field);
      const Field* fd = rt->find_field(fe->field);
      return Place{base.obj, base.offset + off, fd->type, base.in_bounds};
    }
    if (const auto* ix = e.as<IndexExpr>()) {
      Place base = resolve_place(*ix->base, f);
      Value idx = eval(*ix->index, f);
      std::uint64_t i = as_unsigned(idx);
      const TypePtr& at = base.type;
      int esz = at->element->size_bytes();
      if (i >= static_cast<std::uint64_t>(at->length))
        return Place{base.obj, base.offset, at->element, false};
      return Place{base.obj, base.offset + static_cast<int>(i) * esz, at->element,
                   base.in_bounds};
    }
    throw InternalError("resolve_place: not an lvalue");
  }

  struct RegionRef {
    Object* obj = nullptr;
    int offset = 0;
    int avail = 0;
    std::string root;
  };

  RegionRef resolve_region(const Expr& e, Frame& f) {
    if (const auto* a = e.as<AddrOfExpr>()) {
      Place p = resolve_place(*a->arg, f);
      if (!p.in_bounds)
        throw AnalysisError("address of an out-of-range element", e.loc);
      int avail = p.type->size_bytes();
      // whole-object reference includes the trailing pad region
      if (const auto* v = a->arg->as<VarRef>()) {
        const Slot& s = f.vars.at(v->name);
        avail = s.avail;
        (void)v;
      }
      return RegionRef{p.obj, p.offset, avail, root_name(*a->arg)};
    }
    if (const auto* v = e.as<VarRef>()) {
      const Slot& s = f.vars.at(v->name);
      return RegionRef{s.obj, s.offset, s.avail, v->name};
    }
    throw InternalError("resolve_region: unsupported region argument");
  }

  static std::string root_name(const Expr& e) {
    const Expr* x = &e;
    for (;;) {
      if (const auto* fe = x->as<FieldExpr>()) x = fe->base.get();
      else if (const auto* ix = x->as<IndexExpr>()) x = ix->base.get();
      else if (const auto* d = x->as<DerefExpr>()) x = d->base.get();
      else break;
    }
    const auto* v = x->as<VarRef>();
    return v ? v->name : "";
  }

  // ---- expression evaluation (strict everywhere, including && and ||) ----

  Value eval(const Expr& e, Frame& f) {
    if (const auto* i = e.as<IntLit>()) return make_value(e.type, i->value);
    if (e.as<VarRef>() || e.as<FieldExpr>() || e.as<IndexExpr>() || e.as<DerefExpr>()) {
      Place p = resolve_place(e, f);
      if (!p.in_bounds) return make_value(e.type, 0);  // out-of-range read
      return read_scalar(*p.obj, p.offset, e.type);
    }
    if (const auto* u = e.as<UnaryExpr>()) {
      Value a = eval(*u->arg, f);
      switch (u->op) {
        case UnOp::Neg: return make_value(e.type, ~a.raw + 1);
        case UnOp::BitNot: return make_value(e.type, ~a.raw);
        case UnOp::LogNot: return make_value(e.type, a.raw == 0 ? 1 : 0);
      }
    }
    if (const auto* b = e.as<BinaryExpr>()) return eval_binary(e, *b, f);
    if (const auto* c = e.as<CastExpr>()) {
      Value a = eval(*c->arg, f);
      return convert(a, e.type);
    }
    if (const auto* c = e.as<CallExpr>()) {
      std::optional<Value> r = eval_call(e, *c, f);
      if (!r) throw InternalError("void call used as a value");
      return *r;
    }
    if (const auto* s = e.as<SizeofExpr>()) {
      int n = s->of_type ? prog_.env.resolve(*s->of_type, e.loc)->size_bytes()
                         : s->of_expr->type->size_bytes();
      return make_value(e.type, static_cast<std::uint64_t>(n));
    }
    if (e.as<NondetExpr>()) {
      if (e.type->kind == TypeKind::Record || e.type->kind == TypeKind::Array)
        throw InternalError("aggregate nondet must initialize a declaration");
      return make_value(e.type, stream_.next_bits(e.type->width_bits));
    }
    if (const auto* q = e.as<AggEqExpr>()) {
      Place a = resolve_place(*q->lhs, f);
      Place b = resolve_place(*q->rhs, f);
      bool eq = a.obj->bytes == b.obj->bytes;
      return make_value(e.type, eq ? 1 : 0);
    }
    throw InternalError("eval: unhandled expression kind");
  }

  static Value convert(const Value& v, const TypePtr& to) {
    if (to->kind == TypeKind::Bool) return make_value(to, v.raw != 0 ? 1 : 0);
    std::uint64_t raw = is_signed_type(v.type)
                            ? static_cast<std::uint64_t>(as_signed(v))
                            : as_unsigned(v);
    return make_value(to, raw);
  }

  Value eval_binary(const Expr& e, const BinaryExpr& b, Frame& f) {
    Value l = eval(*b.lhs, f);
    Value r = eval(*b.rhs, f);
    const TypePtr& t = e.type;
    int w = l.type->width_bits;
    bool sgn = is_signed_type(l.type);
    auto B = [&](bool c) { return make_value(t, c ? 1 : 0); };
    switch (b.op) {
      case BinOp::Add: return make_value(t, l.raw + r.raw);
      case BinOp::Sub: return make_value(t, l.raw - r.raw);
      case BinOp::Mul: return make_value(t, l.raw * r.raw);
      case BinOp::Div:
      case BinOp::Rem: {
        // division by zero is defined: quotient 0, remainder = dividend
        if (r.raw == 0)
          return b.op == BinOp::Div ? make_value(t, 0) : make_value(t, l.raw);
        if (sgn) {
          std::int64_t a = as_signed(l), d = as_signed(r);
          if (a == INT64_MIN && d == -1)  // wraps at every width
            return b.op == BinOp::Div ? make_value(t, l.raw) : make_value(t, 0);
          std::int64_t q = a / d, m = a % d;
          return make_value(t, static_cast<std::uint64_t>(b.op == BinOp::Div ? q : m));
        }
        std::uint64_t q = l.raw / r.raw, m = l.raw % r.raw;
        return make_value(t, b.op == BinOp::Div ? q : m);
      }
      case BinOp::BitAnd: return make_value(t, l.raw & r.raw);
      case BinOp::BitOr: return make_value(t, l.raw | r.raw);
      case BinOp::BitXor: return make_value(t, l.raw ^ r.raw);
      case BinOp::Shl: {
        std::uint64_t amt = as_unsigned(r);
        if (amt >= static_cast<std::uint64_t>(w)) return make_value(t, 0);
        return make_value(t, l.raw << amt);
      }
      case BinOp::Shr: {
        std::uint64_t amt = as_unsigned(r);
        bool neg = sgn && (l.raw >> (w - 1) & 1);
        if (amt >= static_cast<std::uint64_t>(w))
          return make_value(t, neg ? ~0ULL : 0);
        if (!sgn) return make_value(t, l.raw >> amt);
        std::int64_t x = as_signed(l);
        return make_value(t, static_cast<std::uint64_t>(x >> amt));
      }
      case BinOp::Eq: return B(l.raw == r.raw);
      case BinOp::Ne: return B(l.raw != r.raw);
      case BinOp::Lt: return B(sgn ? as_signed(l) < as_signed(r) : l.raw < r.raw);
      case BinOp::Le: return B(sgn ? as_signed(l) <= as_signed(r) : l.raw <= r.raw);
      case BinOp::Gt: return B(sgn ? as_signed(l) > as_signed(r) : l.raw > r.raw);
      case BinOp::Ge: return B(sgn ? as_signed(l) >= as_signed(r) : l.raw >= r.raw);
      case BinOp::LAnd: return B(l.raw != 0 && r.raw != 0);
      case BinOp::LOr: return B(l.raw != 0 || r.raw != 0);
    }
    throw InternalError("eval_binary: unhandled operator");
  }

  // returns nullopt for void builtins
  std::optional<Value> eval_call(const Expr& e, const CallExpr& c, Frame& f) {
    if (is_builtin_name(c.callee)) return eval_builtin(e, c, f);

    const FuncSig& sig = prog_.sigs.at(c.callee);
    const FunctionDef* def = prog_.ast.find_function(c.callee);
    Frame callee;
    callee.func = c.callee;
    for (size_t i = 0; i < sig.params.size(); ++i) {
      const ParamSig& p = sig.params[i];
      const ExprPtr& arg = c.args[i];
      if (p.is_output) {
        RegionRef r = resolve_region(*arg, f);
        callee.vars[p.name] =
            Slot{r.obj, r.offset, p.type, r.avail, true};
      } else if (p.type->kind == TypeKind::Record || p.type->kind == TypeKind::Array) {
        Place src = resolve_place(*arg, f);
        Object copy = make_object(p.type);
        for (int k = 0; k < p.type->size_bytes(); ++k)
          copy.bytes[static_cast<size_t>(k)] =
              src.obj->bytes[static_cast<size_t>(src.offset + k)];
        callee.owned.push_back(std::move(copy));
        Object& o = callee.owned.back();
        callee.vars[p.name] = Slot{&o, 0, p.type, o.size(), false};
      } else {
        Value v = eval(*arg, f);
        callee.owned.push_back(object_from_value(v));
        Object& o = callee.owned.back();
        callee.vars[p.name] = Slot{&o, 0, p.type, o.size(), false};
      }
    }
    Flow fl = exec_body(def->body, callee, sig);
    if (fl == Flow::Aborted) throw AbortSignal{};
    if (!sig.ret) return std::nullopt;
    if (fl == Flow::Returned && callee.ret) return callee.ret;
    return make_value(sig.ret, 0);
  }

  std::optional<Value> eval_builtin(const Expr& e, const CallExpr& c, Frame& f) {
    const BuiltinSig* b = find_builtin(c.callee, prog_.env.arch.bits);
    switch (b->kind) {
      case BuiltinKind::InputScalar:
        return make_value(b->value_type, stream_.next_bits(b->value_type->width_bits));
      case BuiltinKind::Memcmp: {
        RegionRef x = resolve_region(*c.args[0], f);
        RegionRef y = resolve_region(*c.args[1], f);
        int n = static_cast<int>(as_unsigned(eval(*c.args[2], f)));
        bool eq = true;
        for (int k = 0; k < n; ++k)
          if (x.obj->bytes[static_cast<size_t>(x.offset + k)] !=
              y.obj->bytes[static_cast<size_t>(y.offset + k)]) {
            eq = false;
            break;
          }
        return make_value(make_signed(32), eq ? 0 : static_cast<std::uint64_t>(-1));
      }
      case BuiltinKind::Memset: {
        RegionRef d = resolve_region(*c.args[0], f);
        std::uint8_t byte = static_cast<std::uint8_t>(as_unsigned(eval(*c.args[1], f)));
        int n = static_cast<int>(as_unsigned(eval(*c.args[2], f)));
        for (int k = 0; k < n; ++k)
          d.obj->bytes[static_cast<size_t>(d.offset + k)] = byte;
        record(e.loc, f, d.root, bytes_hex(d.obj->bytes, d.offset, n));
        return std::nullopt;
      }
      case BuiltinKind::Memcpy: {
        RegionRef d = resolve_region(*c.args[0], f);
        RegionRef s = resolve_region(*c.args[1], f);
        int n = static_cast<int>(as_unsigned(eval(*c.args[2], f)));
        for (int k = 0; k < n; ++k)
          d.obj->bytes[static_cast<size_t>(d.offset + k)] =
              s.obj->bytes[static_cast<size_t>(s.offset + k)];
        record(e.loc, f, d.root, bytes_hex(d.obj->bytes, d.offset, n));
        return std::nullopt;
      }
      case BuiltinKind::CopyToUser: {
        RegionRef d = resolve_region(*c.args[0], f);
        RegionRef s = resolve_region(*c.args[1], f);
        int n = static_cast<int>(as_unsigned(eval(*c.args[2], f)));
        for (int k = 0; k < n; ++k)
          d.obj->bytes[static_cast<size_t>(d.offset + k)] =
              s.obj->bytes[static_cast<size_t>(s.offset + k)];
        // the bytes a compiler-level copy drags along after the payload: they
        // come from memory the program never wrote, so each is a fresh choice
        int pad = padding_bytes(n, prog_.env.arch.align());
        for (int k = 0; k < pad; ++k)
          d.obj->bytes[static_cast<size_t>(d.offset + n + k)] =
              static_cast<std::uint8_t>(stream_.next_bits(8));
        record(e.loc, f, d.root, bytes_hex(d.obj->bytes, d.offset, n + pad));
        return make_value(make_signed(32), 0);
      }
    }
    throw InternalError("eval_builtin: unhandled builtin");
  }

  // ---- statements ----

  struct AbortSignal {};  // assume/assert failure inside a nested call

  Flow exec_body(const StmtList& body, Frame& f, const FuncSig& sig) {
    try {
      for (const auto& s : body) {
        Flow fl = exec(*s, f, sig);
        if (fl != Flow::Next) return fl;
      }
    } catch (const AbortSignal&) {
      return Flow::Aborted;
    }
    return Flow::Next;
  }

  Flow exec_list(const StmtList& body, Frame& f, const FuncSig& sig) {
    for (const auto& s : body) {
      Flow fl = exec(*s, f, sig);
      if (fl != Flow::Next) return fl;
    }
    return Flow::Next;
  }

  Flow exec(const Stmt& s, Frame& f, const FuncSig& sig) {
    spend();
    if (const auto* d = s.as<DeclStmt>()) {
      TypePtr t = prog_.env.resolve(d->declared, s.loc);
      f.owned.push_back(make_object(t, d->region_extra_bytes));
      Object& o = f.owned.back();
      f.vars[d->name] = Slot{&o, 0, t, o.size(), false};
      if (d->init) {
        if (d->init->as<NondetExpr>() &&
            (t->kind == TypeKind::Record || t->kind == TypeKind::Array)) {
          for (int k = 0; k < t->size_bytes(); ++k)
            o.bytes[static_cast<size_t>(k)] =
                static_cast<std::uint8_t>(stream_.next_bits(8));
          record(s.loc, f, d->name, bytes_hex(o.bytes, 0, t->size_bytes()));
        } else {
          Value v = eval(*d->init, f);
          write_scalar(o, 0, v);
          record(s.loc, f, d->name, value_str(v));
        }
      }
      return Flow::Next;
    }
    if (const auto* a = s.as<AssignStmt>()) {
      Value v = eval(*a->value, f);
      Place p = resolve_place(*a->target, f);
      if (p.in_bounds) {
        write_scalar(*p.obj, p.offset, v);
        record(s.loc, f, to_path_string(*a->target), value_str(v));
      }
      return Flow::Next;
    }
    if (const auto* i = s.as<IfStmt>()) {
      Value c = eval(*i->cond, f);
      return exec_list(truthy(c) ? i->then_body : i->else_body, f, sig);
    }
    if (const auto* w = s.as<WhileStmt>()) {
      for (;;) {
        spend();
        Value c = eval(*w->cond, f);
        if (!truthy(c)) break;
        Flow fl = exec_list(w->body, f, sig);
        if (fl != Flow::Next) return fl;
      }
      return Flow::Next;
    }
    if (const auto* fo = s.as<ForStmt>()) {
      if (fo->init) {
        Flow fl = exec(*fo->init, f, sig);
        if (fl != Flow::Next) return fl;
      }
      for (;;) {
        spend();
        if (fo->cond) {
          Value c = eval(*fo->cond, f);
          if (!truthy(c)) break;
        }
        Flow fl = exec_list(fo->body, f, sig);
        if (fl != Flow::Next) return fl;
        if (fo->step) {
          fl = exec(*fo->step, f, sig);
          if (fl != Flow::Next) return fl;
        }
      }
      return Flow::Next;
    }
    if (const auto* r = s.as<ReturnStmt>()) {
      if (r->value) {
        f.ret = eval(*r->value, f);
        record(s.loc, f, "__return", value_str(*f.ret));
      }
      return Flow::Returned;
    }
    if (const auto* x = s.as<ExprStmt>()) {
      const auto* c = x->expr->as<CallExpr>();
      eval_call(*x->expr, *c, f);
      return Flow::Next;
    }
    if (const auto* a = s.as<AssumeStmt>()) {
      Value c = eval(*a->cond, f);
      if (!truthy(c)) {
        status_ = RunResult::Status::AssumeFail;
        fail_loc_ = s.loc;
        return Flow::Aborted;
      }
      return Flow::Next;
    }
    if (const auto* a = s.as<AssertStmt>()) {
      Value c = eval(*a->cond, f);
      if (!truthy(c)) {
        status_ = RunResult::Status::AssertFail;
        fail_loc_ = s.loc;
        return Flow::Aborted;
      }
      return Flow::Next;
    }
    if (const auto* b = s.as<BlockStmt>()) {
      return exec_list(b->body, f, sig);
    }
    throw InternalError("exec: unhandled statement kind");
  }

  static std::string to_path_string(const Expr& e) {
    if (const auto* v = e.as<VarRef>()) return v->name;
    if (const auto* fe = e.as<FieldExpr>())
      return to_path_string(*fe->base) + (fe->arrow ? "->" : ".") + fe->field;
    if (const auto* ix = e.as<IndexExpr>())
      return to_path_string(*ix->base) + "[]";
    if (const auto* d = e.as<DerefExpr>()) return "*" + to_path_string(*d->base);
    return "?";
  }
};

}  // namespace leakbound
