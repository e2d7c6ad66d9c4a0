#pragma once

// Bit-level circuit DAG. Word operations bit-blast immediately into two-input
// AND/XOR nodes with complemented edges; aggressive constant folding and
// structural hashing keep driver formulas small (equality tests over bytes
// the program fully determined collapse to constants here, long before the
// solver sees them).

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "leakbound/diag.hpp"
#include "leakbound/value.hpp"

namespace leakbound {

// A reference to a node, with a complement bit in the LSB.
struct BitRef {
  std::uint32_t code = 0;  // (node_index << 1) | negated

  static BitRef make(std::uint32_t idx, bool neg) {
    return BitRef{(idx << 1) | (neg ? 1u : 0u)};
  }
  std::uint32_t index() const { return code >> 1; }
  bool negated() const { return code & 1; }
  BitRef operator!() const { return BitRef{code ^ 1}; }
  bool operator==(const BitRef&) const = default;
};

constexpr BitRef kFalse{0};  // node 0 is the constant; kTrue is its negation
constexpr BitRef kTrue{1};

using BitVec = std::vector<BitRef>;

enum class GateOp : std::uint8_t { Const, Free, And, Xor };

struct Gate {
  GateOp op;
  BitRef a, b;
};

class Circuit {
 public:
  Circuit() {
    gates_.push_back(Gate{GateOp::Const, {}, {}});  // node 0 = false
  }

  std::uint32_t node_count() const { return static_cast<std::uint32_t>(gates_.size()); }
  const Gate& gate(std::uint32_t idx) const { return gates_[idx]; }

  BitRef fresh_free() {
    std::uint32_t idx = push(Gate{GateOp::Free, {}, {}});
    free_bits_.push_back(idx);
    return BitRef::make(idx, false);
  }

  const std::vector<std::uint32_t>& free_bits() const { return free_bits_; }

  BitRef mk_and(BitRef a, BitRef b) {
    if (a == kFalse || b == kFalse) return kFalse;
    if (a == kTrue) return b;
    if (b == kTrue) return a;
    if (a == b) return a;
    if (a == !b) return kFalse;
    if (b.code < a.code) std::swap(a, b);  // canonical order for hashing
    std::uint64_t key = hash_key(0, a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return BitRef{it->second};
    std::uint32_t idx = push(Gate{GateOp::And, a, b});
    BitRef r = BitRef::make(idx, false);
    cache_[key] = r.code;
    return r;
  }

  BitRef mk_xor(BitRef a, BitRef b) {
    if (a == kFalse) return b;
    if (b == kFalse) return a;
    if (a == kTrue) return !b;
    if (b == kTrue) return !a;
    if (a == b) return kFalse;
    if (a == !b) return kTrue;
    // canonicalize: positive edges on both inputs; negations move to the output
    bool out_neg = a.negated() ^ b.negated();
    BitRef pa{a.code & ~1u}, pb{b.code & ~1u};
    if (pb.code < pa.code) std::swap(pa, pb);
    std::uint64_t key = hash_key(1, pa, pb);
    auto it = cache_.find(key);
    if (it != cache_.end()) return BitRef{it->second ^ (out_neg ? 1u : 0u)};
    std::uint32_t idx = push(Gate{GateOp::Xor, pa, pb});
    cache_[key] = idx << 1;
    return BitRef::make(idx, out_neg);
  }

  BitRef mk_or(BitRef a, BitRef b) { return !mk_and(!a, !b); }
  BitRef mk_implies(BitRef a, BitRef b) { return mk_or(!a, b); }
  BitRef mk_eq(BitRef a, BitRef b) { return !mk_xor(a, b); }

  // c ? a : b
  BitRef mk_mux(BitRef c, BitRef a, BitRef b) {
    if (c == kTrue) return a;
    if (c == kFalse) return b;
    if (a == b) return a;
    // b ^ (c & (a ^ b))
    return mk_xor(b, mk_and(c, mk_xor(a, b)));
  }

  bool is_const(BitRef r) const { return r.index() == 0; }

  // ---- evaluation over a concrete free-bit assignment ----

  // values: one bool per node index (computed incrementally); free bits taken
  // from `free_values` keyed by node index.
  std::vector<bool> evaluate(const std::unordered_map<std::uint32_t, bool>& free_values) const {
    std::vector<bool> val(gates_.size(), false);
    for (std::uint32_t i = 0; i < gates_.size(); ++i) {
      const Gate& g = gates_[i];
      switch (g.op) {
        case GateOp::Const: val[i] = false; break;
        case GateOp::Free: {
          auto it = free_values.find(i);
          val[i] = it != free_values.end() && it->second;
          break;
        }
        case GateOp::And:
          val[i] = read(val, g.a) && read(val, g.b);
          break;
        case GateOp::Xor:
          val[i] = read(val, g.a) != read(val, g.b);
          break;
      }
    }
    return val;
  }

  static bool read(const std::vector<bool>& val, BitRef r) {
    return val[r.index()] != r.negated();
  }

 private:
  std::vector<Gate> gates_;
  std::vector<std::uint32_t> free_bits_;
  std::unordered_map<std::uint64_t, std::uint32_t> cache_;

  std::uint32_t push(Gate g) {
    gates_.push_back(g);
    return static_cast<std::uint32_t>(gates_.size() - 1);
  }

  static std::uint64_t hash_key(std::uint32_t tag, BitRef a, BitRef b) {
    return (static_cast<std::uint64_t>(tag) << 62) |
           (static_cast<std::uint64_t>(a.code) << 31) | b.code;
  }
};

// ---------------------------------------------------------------------------
// Word-level helpers over little-endian bit vectors (bit i = value bit i).
// ---------------------------------------------------------------------------

inline BitVec bv_const(Circuit& c, std::uint64_t value, int width) {
  (void)c;
  BitVec v(static_cast<size_t>(width));
  for (int i = 0; i < width; ++i) v[static_cast<size_t>(i)] = (value >> i & 1) ? kTrue : kFalse;
  return v;
}

inline BitVec bv_free(Circuit& c, int width) {
  BitVec v(static_cast<size_t>(width));
  for (int i = 0; i < width; ++i) v[static_cast<size_t>(i)] = c.fresh_free();
  return v;
}

// constant probe: all bits constant -> value
inline bool bv_is_const(const Circuit& c, const BitVec& v, std::uint64_t* out) {
  std::uint64_t x = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!c.is_const(v[i])) return false;
    if (v[i] == kTrue) x |= 1ull << i;
  }
  if (out) *out = x;
  return true;
}

inline BitVec bv_not(Circuit& c, BitVec a) {
  (void)c;
  for (auto& x : a) x = !x;
  return a;
}

inline BitVec bv_and(Circuit& c, const BitVec& a, const BitVec& b) {
  BitVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = c.mk_and(a[i], b[i]);
  return r;
}

inline BitVec bv_or(Circuit& c, const BitVec& a, const BitVec& b) {
  BitVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = c.mk_or(a[i], b[i]);
  return r;
}

inline BitVec bv_xor(Circuit& c, const BitVec& a, const BitVec& b) {
  BitVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = c.mk_xor(a[i], b[i]);
  return r;
}

inline BitVec bv_mux(Circuit& c, BitRef cond, const BitVec& a, const BitVec& b) {
  BitVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = c.mk_mux(cond, a[i], b[i]);
  return r;
}

// sum and carry-out of a ripple adder: a + b + cin
inline BitVec bv_add_carry(Circuit& c, const BitVec& a, const BitVec& b, BitRef cin,
                           BitRef* cout = nullptr) {
  BitVec r(a.size());
  BitRef carry = cin;
  for (size_t i = 0; i < a.size(); ++i) {
    BitRef axb = c.mk_xor(a[i], b[i]);
    r[i] = c.mk_xor(axb, carry);
    carry = c.mk_or(c.mk_and(a[i], b[i]), c.mk_and(axb, carry));
  }
  if (cout) *cout = carry;
  return r;
}

inline BitVec bv_add(Circuit& c, const BitVec& a, const BitVec& b) {
  return bv_add_carry(c, a, b, kFalse);
}

inline BitVec bv_sub(Circuit& c, const BitVec& a, const BitVec& b) {
  return bv_add_carry(c, a, bv_not(c, b), kTrue);
}

inline BitVec bv_neg(Circuit& c, const BitVec& a) {
  return bv_add_carry(c, bv_not(c, a), bv_const(c, 0, static_cast<int>(a.size())), kTrue);
}

inline BitVec bv_mul(Circuit& c, const BitVec& a, const BitVec& b) {
  int w = static_cast<int>(a.size());
  BitVec acc = bv_const(c, 0, w);
  for (int i = 0; i < w; ++i) {
    // acc += (b[i] ? a : 0) << i
    BitVec part(static_cast<size_t>(w), kFalse);
    for (int j = 0; i + j < w; ++j)
      part[static_cast<size_t>(i + j)] = c.mk_and(a[static_cast<size_t>(j)], b[static_cast<size_t>(i)]);
    acc = bv_add(c, acc, part);
  }
  return acc;
}

inline BitRef bv_reduce_or(Circuit& c, const BitVec& a) {
  BitRef r = kFalse;
  for (const auto& x : a) r = c.mk_or(r, x);
  return r;
}

inline BitRef bv_eq(Circuit& c, const BitVec& a, const BitVec& b) {
  BitRef r = kTrue;
  for (size_t i = 0; i < a.size(); ++i) r = c.mk_and(r, c.mk_eq(a[i], b[i]));
  return r;
}

// a < b, unsigned: borrow out of a - b
inline BitRef bv_ult(Circuit& c, const BitVec& a, const BitVec& b) {
  BitRef borrow = kFalse;
  for (size_t i = 0; i < a.size(); ++i) {
    // borrow' = (~a & b) | (~(a ^ b) & borrow)
    BitRef axb = c.mk_xor(a[i], b[i]);
    borrow = c.mk_or(c.mk_and(!a[i], b[i]), c.mk_and(!axb, borrow));
  }
  return borrow;
}

inline BitRef bv_slt(Circuit& c, const BitVec& a, const BitVec& b) {
  // flip sign bits and compare unsigned
  BitVec a2 = a, b2 = b;
  a2.back() = !a2.back();
  b2.back() = !b2.back();
  return bv_ult(c, a2, b2);
}

// Restoring division, unsigned. Defined at zero: q = 0, r = a.
inline void bv_udivrem(Circuit& c, const BitVec& a, const BitVec& b, BitVec* q_out,
                       BitVec* r_out) {
  int w = static_cast<int>(a.size());
  std::uint64_t bconst;
  bool b_is_const = bv_is_const(c, b, &bconst);
  if (b_is_const && bconst != 0 && (bconst & (bconst - 1)) == 0) {
    // power of two: shift and mask
    int k = 0;
    while (!(bconst >> k & 1)) ++k;
    BitVec q(static_cast<size_t>(w), kFalse);
    for (int i = 0; i + k < w; ++i) q[static_cast<size_t>(i)] = a[static_cast<size_t>(i + k)];
    BitVec r(static_cast<size_t>(w), kFalse);
    for (int i = 0; i < k; ++i) r[static_cast<size_t>(i)] = a[static_cast<size_t>(i)];
    if (q_out) *q_out = q;
    if (r_out) *r_out = r;
    return;
  }
  BitVec q(static_cast<size_t>(w), kFalse);
  BitVec rem = bv_const(c, 0, w);
  for (int i = w - 1; i >= 0; --i) {
    // rem = (rem << 1) | a[i]
    rem.insert(rem.begin(), a[static_cast<size_t>(i)]);
    rem.pop_back();
    BitRef ge = !bv_ult(c, rem, b);  // rem >= b
    q[static_cast<size_t>(i)] = ge;
    rem = bv_mux(c, ge, bv_sub(c, rem, b), rem);
  }
  BitRef bz = !bv_reduce_or(c, b);
  if (q_out) *q_out = bv_mux(c, bz, bv_const(c, 0, w), q);
  if (r_out) *r_out = bv_mux(c, bz, a, rem);
}

// Signed division truncating toward zero; q=0/r=a at zero; MIN/-1 wraps.
inline void bv_sdivrem(Circuit& c, const BitVec& a, const BitVec& b, BitVec* q_out,
                       BitVec* r_out) {
  BitRef sa = a.back(), sb = b.back();
  BitVec ua = bv_mux(c, sa, bv_neg(c, a), a);
  BitVec ub = bv_mux(c, sb, bv_neg(c, b), b);
  BitVec q, r;
  bv_udivrem(c, ua, ub, &q, &r);
  BitRef qneg = c.mk_xor(sa, sb);
  BitVec qs = bv_mux(c, qneg, bv_neg(c, q), q);
  BitVec rs = bv_mux(c, sa, bv_neg(c, r), r);
  // zero divisor overrides: q = 0, r = a (the unsigned core already yields
  // q=0/r=ua for ub=0; the sign muxes would distort that, so redo it here)
  BitRef bz = !bv_reduce_or(c, b);
  if (q_out) *q_out = bv_mux(c, bz, bv_const(c, 0, static_cast<int>(a.size())), qs);
  if (r_out) *r_out = bv_mux(c, bz, a, rs);
}

// Barrel shifter. Shift amount is read as unsigned from `amt` (any width);
// amounts >= width give 0 (or the sign fill for arithmetic right shifts).
inline BitVec bv_shift(Circuit& c, const BitVec& a, const BitVec& amt, bool left,
                       bool arith) {
  int w = static_cast<int>(a.size());
  BitRef fill = arith ? a.back() : kFalse;
  BitVec cur = a;
  // stage k shifts by 2^k when amt bit k is set
  int stages = 0;
  while ((1 << stages) < w) ++stages;
  for (int k = 0; k < stages && k < static_cast<int>(amt.size()); ++k) {
    int s = 1 << k;
    BitVec shifted(static_cast<size_t>(w));
    for (int i = 0; i < w; ++i) {
      int src = left ? i - s : i + s;
      shifted[static_cast<size_t>(i)] =
          (src >= 0 && src < w) ? cur[static_cast<size_t>(src)] : (left ? kFalse : fill);
    }
    cur = bv_mux(c, amt[static_cast<size_t>(k)], shifted, cur);
  }
  // any set amount bit at or above the width zeroes (or sign-fills) everything
  BitRef big = kFalse;
  for (int k = stages; k < static_cast<int>(amt.size()); ++k)
    big = c.mk_or(big, amt[static_cast<size_t>(k)]);
  if (!(big == kFalse)) {
    BitVec fillv(static_cast<size_t>(w), left ? kFalse : fill);
    cur = bv_mux(c, big, fillv, cur);
  }
  // exact-width case: amounts in [w, 2^stages) when w is not a power of two
  if ((1 << stages) != w) {
    BitVec av(amt.begin(), amt.begin() + std::min<size_t>(amt.size(), static_cast<size_t>(stages)));
    std::uint64_t cv;
    if (!bv_is_const(c, av, &cv) || cv >= static_cast<std::uint64_t>(w)) {
      BitRef ge = !bv_ult(c, av, bv_const(c, static_cast<std::uint64_t>(w),
                                          static_cast<int>(av.size())));
      BitVec fillv(static_cast<size_t>(w), left ? kFalse : fill);
      cur = bv_mux(c, ge, fillv, cur);
    }
  }
  return cur;
}

inline BitVec bv_zext(Circuit& c, BitVec a, int width) {
  (void)c;
  a.resize(static_cast<size_t>(width), kFalse);
  return a;
}

inline BitVec bv_sext(Circuit& c, BitVec a, int width) {
  (void)c;
  BitRef s = a.back();
  a.resize(static_cast<size_t>(width), s);
  return a;
}

inline BitVec bv_trunc(BitVec a, int width) {
  a.resize(static_cast<size_t>(width));
  return a;
}

inline std::uint64_t bv_value(const std::vector<bool>& node_vals, const BitVec& v) {
  std::uint64_t x = 0;
  for (size_t i = 0; i < v.size() && i < 64; ++i)
    if (Circuit::read(node_vals, v[i])) x |= 1ull << i;
  return x;
}

}  // namespace leakbound
