#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "leakbound/interp.hpp"
#include "leakbound/metrics.hpp"
#include "leakbound/relation.hpp"
#include "support/helpers.hpp"

using namespace leakbound;
using testutil::compile;
using testutil::harness_of;
using testutil::load_corpus;

namespace {

// convenience: run the entry point on scalar arguments, return the result
RunResult run(const Program& p, std::vector<std::uint64_t> scalars,
              std::vector<std::uint64_t> stream = {}) {
  Harness h = harness_of(p);
  std::vector<Object> args;
  size_t i = 0;
  for (const auto& in : h.inputs) {
    Object o = make_object(in.type);
    write_scalar(o, 0, make_value(in.type, scalars.at(i++)));
    args.push_back(std::move(o));
  }
  VectorStream vs(std::move(stream));
  Interp it(p, vs);
  return it.call(h.entry, std::move(args));
}

std::int64_t ret_of(const Program& p, std::vector<std::uint64_t> scalars) {
  RunResult r = run(p, std::move(scalars));
  REQUIRE(r.status == RunResult::Status::Ok);
  REQUIRE(r.ret.has_value());
  return as_signed(*r.ret);
}

Program expr_prog(const std::string& params, const std::string& body_expr) {
  return compile("#pragma leak high h\n#pragma leak low l\n#pragma leak observe __return\n"
                 "int f(" + params + ") { return " + body_expr + "; }\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Two's-complement evaluation semantics, values fixed by hand.
// ---------------------------------------------------------------------------

TEST_CASE("arithmetic wraps at the operation width") {
  Program p = expr_prog("unsigned char h, unsigned char l", "(h + l) & 255");
  CHECK(ret_of(p, {200, 100}) == ((200 + 100) & 255));

  // int overflow wraps
  Program q = expr_prog("int h, int l", "h + l");
  CHECK(ret_of(q, {0x7fffffff, 1}) == INT32_MIN);
  Program m = expr_prog("int h, int l", "h * l");
  CHECK(ret_of(m, {65536, 65536}) == 0);
  CHECK(ret_of(m, {0x10001, 0xffff}) == -1);  // (2^16+1)(2^16-1) = 2^32-1
}

TEST_CASE("division and remainder are total") {
  Program d = expr_prog("int h, int l", "h / l");
  Program r = expr_prog("int h, int l", "h % l");
  CHECK(ret_of(d, {static_cast<std::uint64_t>(-7), 2}) == -3);  // truncates toward zero
  CHECK(ret_of(r, {static_cast<std::uint64_t>(-7), 2}) == -1);
  CHECK(ret_of(d, {7, static_cast<std::uint64_t>(-2)}) == -3);
  CHECK(ret_of(d, {42, 0}) == 0);    // defined: quotient 0
  CHECK(ret_of(r, {42, 0}) == 42);   // defined: remainder is the dividend
  CHECK(ret_of(d, {0x80000000ull, static_cast<std::uint64_t>(-1)}) ==
        INT32_MIN);                  // INT_MIN / -1 wraps
  CHECK(ret_of(r, {0x80000000ull, static_cast<std::uint64_t>(-1)}) == 0);

  Program ud = expr_prog("unsigned int h, unsigned int l", "h / l");
  CHECK(ret_of(ud, {0xffffffffull, 16}) == 0x0fffffff);
}

TEST_CASE("shifts saturate past the width") {
  Program shl = expr_prog("unsigned int h, unsigned int l", "h << l");
  CHECK(ret_of(shl, {1, 31}) == INT32_MIN);  // bit 31 set
  CHECK(ret_of(shl, {1, 32}) == 0);          // amount >= width gives 0
  CHECK(ret_of(shl, {1, 200}) == 0);

  Program sshr = expr_prog("int h, int l", "h >> l");
  CHECK(ret_of(sshr, {static_cast<std::uint64_t>(-8), 1}) == -4);  // arithmetic
  CHECK(ret_of(sshr, {static_cast<std::uint64_t>(-8), 50}) == -1); // sign fills
  CHECK(ret_of(sshr, {8, 50}) == 0);

  Program ushr = expr_prog("unsigned int h, unsigned int l", "h >> l");
  CHECK(ret_of(ushr, {0x80000000ull, 31}) == 1);  // logical
}

TEST_CASE("comparisons respect operand signedness") {
  CHECK(ret_of(expr_prog("int h, int l", "h < l"), {static_cast<std::uint64_t>(-1), 0}) == 1);
  CHECK(ret_of(expr_prog("unsigned int h, unsigned int l", "h < l"),
               {0xffffffffull, 0}) == 0);  // -1 reads as UINT_MAX
  // mixed: int vs unsigned promotes to unsigned at rank 32
  CHECK(ret_of(expr_prog("int h, unsigned int l", "h < l"),
               {static_cast<std::uint64_t>(-1), 5}) == 0);
}

TEST_CASE("logical operators evaluate both sides and still short out values") {
  // strict evaluation is observable only through side effects; with none,
  // truth tables are all that remain
  Program a = expr_prog("int h, int l", "h && l");
  CHECK(ret_of(a, {0, 5}) == 0);
  CHECK(ret_of(a, {3, 5}) == 1);
  Program o = expr_prog("int h, int l", "h || l");
  CHECK(ret_of(o, {0, 0}) == 0);
  CHECK(ret_of(o, {0, 9}) == 1);
  CHECK(ret_of(expr_prog("int h, int l", "!h"), {7, 0}) == 0);
}

TEST_CASE("casts truncate and extend correctly") {
  CHECK(ret_of(expr_prog("int h, int l", "(unsigned char) h"), {0x1ff, 0}) == 0xff);
  CHECK(ret_of(expr_prog("int h, int l", "(signed char) h"), {0xff, 0}) == -1);
  CHECK(ret_of(expr_prog("int h, int l", "(bool) h"), {42, 0}) == 1);
  CHECK(ret_of(expr_prog("signed char h, int l", "(int) h"), {0x80, 0}) == -128);
  CHECK(ret_of(expr_prog("unsigned char h, int l", "(int) h"), {0x80, 0}) == 128);
}

TEST_CASE("locals are zero-initialized and assignment converts") {
  Program p = compile(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(int h) { unsigned char c; int unused; c = h; return c + unused; }\n");
  Harness hh = harness_of(p);
  std::vector<Object> args;
  Object o = make_object(hh.inputs[0].type);
  write_scalar(o, 0, make_value(hh.inputs[0].type, 0x1234));
  args.push_back(std::move(o));
  VectorStream vs;
  Interp it(p, vs);
  RunResult r = it.call("f", std::move(args));
  REQUIRE(r.status == RunResult::Status::Ok);
  CHECK(as_signed(*r.ret) == 0x34);
}

TEST_CASE("value helpers mask and sign-extend") {
  CHECK(width_mask(8) == 0xff);
  CHECK(width_mask(64) == ~0ull);
  CHECK(mask_to(0x1ff, 8) == 0xff);
  CHECK(sign_extend(0x80, 8) == -128);
  CHECK(sign_extend(0x7f, 8) == 127);
  CHECK(sign_extend(0xffffffffull, 32) == -1);
}

// ---------------------------------------------------------------------------
// Leakage measures.
// ---------------------------------------------------------------------------

TEST_CASE("channel capacity is the log of the class count") {
  CHECK(channel_capacity(1) == 0.0);
  CHECK(channel_capacity(4) == 2.0);
  CHECK(channel_capacity(3) == Catch::Approx(std::log2(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(channel_capacity(0), AnalysisError);
}

TEST_CASE("policy breach and non-interference predicates") {
  CHECK(policy_breached(5, 4));
  CHECK_FALSE(policy_breached(4, 4));
  CHECK(non_interfering(EquivalenceRelation::from_blocks(4, {{0, 1, 2, 3}})));
  CHECK_FALSE(non_interfering(EquivalenceRelation::from_blocks(4, {{0, 1}, {2, 3}})));
}

TEST_CASE("shannon entropy of hand-built partitions") {
  // the 4-class modulo partition of 16 elements
  std::vector<std::vector<int>> blocks(4);
  for (int h = 0; h < 16; ++h) blocks[static_cast<size_t>(h % 4)].push_back(h);
  EquivalenceRelation rel = EquivalenceRelation::from_blocks(16, blocks);
  CHECK(rel.class_count() == 4);

  Distribution uniform(16, 1.0 / 16.0);
  CHECK(shannon_entropy(rel, uniform) == Catch::Approx(2.0).margin(1e-9));

  // evens carry 1/8 each, odds nothing: two classes remain visible
  Distribution evens(16, 0.0);
  for (int h = 0; h < 16; h += 2) evens[static_cast<size_t>(h)] = 1.0 / 8.0;
  CHECK(shannon_entropy(rel, evens) == Catch::Approx(1.0).margin(1e-9));

  // a point distribution leaks nothing
  Distribution point(16, 0.0);
  point[3] = 1.0;
  CHECK(shannon_entropy(rel, point) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("double-mode entropy of the password split") {
  // 64-bit secret, one guess: {2^-64, 1 - 2^-64}
  double p = std::pow(2.0, -64);
  double h = shannon_entropy_probs({p, 1.0 - p});
  // plain doubles round 1-2^-64 to 1, so only the hit term remains: 64*2^-64
  CHECK(h == Catch::Approx(3.46944695e-18).epsilon(1e-6));
  CHECK(h == 64.0 * std::pow(2.0, -64));
}

TEST_CASE("dyadic entropy bounds expose what double mode hides") {
  std::vector<DyadicProb> probs{{1, 64}, {0xffffffffffffffffull, 64}};
  EntropyBounds b = shannon_entropy_bounds(probs);
  double dbl = 64.0 * std::pow(2.0, -64);
  CHECK(b.lo <= b.hi);
  // the true value strictly exceeds the double-mode answer: the complement
  // term -(1-p)log2(1-p) ~ 2^-64/ln2 is real, about 2% of the total
  CHECK(b.lo > dbl);
  CHECK(b.hi < dbl * 1.05);
  CHECK(b.hi - b.lo < 1e-19);

  // sanity on an exactly representable case: {1/2, 1/2} -> 1 bit
  EntropyBounds half = shannon_entropy_bounds({{1, 1}, {1, 1}});
  CHECK(half.lo <= 1.0);
  CHECK(half.hi >= 1.0);
  CHECK(half.hi - half.lo < 1e-9);

  CHECK_THROWS_AS(shannon_entropy_bounds({{3, 1}}), AnalysisError);  // 3/2 > 1
}

// ---------------------------------------------------------------------------
// Lattice of information.
// ---------------------------------------------------------------------------

namespace {

// all partitions of {0..n-1} via restricted growth strings
std::vector<EquivalenceRelation> all_partitions(int n) {
  std::vector<EquivalenceRelation> out;
  std::vector<int> rgs(static_cast<size_t>(n), 0);
  auto emit = [&] {
    EquivalenceRelation r;
    r.domain_size = n;
    r.class_of = rgs;
    out.push_back(r);
  };
  // rgs[0] = 0; rgs[i] <= max(rgs[0..i-1]) + 1
  std::function<void(int, int)> rec = [&](int i, int mx) {
    if (i == n) {
      emit();
      return;
    }
    for (int c = 0; c <= mx + 1; ++c) {
      rgs[static_cast<size_t>(i)] = c;
      rec(i + 1, std::max(mx, c));
    }
  };
  if (n == 0) {
    emit();
    return out;
  }
  rec(1, 0);
  return out;
}

}  // namespace

TEST_CASE("partition enumeration hits the Bell numbers") {
  CHECK(all_partitions(3).size() == 5);
  CHECK(all_partitions(4).size() == 15);
  CHECK(all_partitions(6).size() == 203);
}

TEST_CASE("refinement order on all partitions of a 6-element set") {
  std::vector<EquivalenceRelation> ps = all_partitions(6);
  REQUIRE(ps.size() == 203);

  // reflexive
  for (const auto& r : ps) CHECK(loi_leq(r, r));

  // antisymmetric (canonical forms are unique here, so <= both ways means ==)
  for (size_t i = 0; i < ps.size(); ++i)
    for (size_t j = 0; j < ps.size(); ++j)
      if (loi_leq(ps[i], ps[j]) && loi_leq(ps[j], ps[i])) {
        INFO(i << " vs " << j);
        REQUIRE(ps[i].same_partition(ps[j]));
      }

  // transitive
  std::vector<std::vector<bool>> leq(ps.size(), std::vector<bool>(ps.size()));
  for (size_t i = 0; i < ps.size(); ++i)
    for (size_t j = 0; j < ps.size(); ++j) leq[i][j] = loi_leq(ps[i], ps[j]);
  for (size_t i = 0; i < ps.size(); ++i)
    for (size_t j = 0; j < ps.size(); ++j) {
      if (!leq[i][j]) continue;
      for (size_t k = 0; k < ps.size(); ++k)
        if (leq[j][k] && !leq[i][k]) {
          INFO(i << " <= " << j << " <= " << k);
          REQUIRE(false);
        }
    }

  // bottom and top
  EquivalenceRelation bot = EquivalenceRelation::from_blocks(6, {{0, 1, 2, 3, 4, 5}});
  EquivalenceRelation top =
      EquivalenceRelation::from_blocks(6, {{0}, {1}, {2}, {3}, {4}, {5}});
  for (const auto& r : ps) {
    CHECK(loi_leq(bot, r));
    CHECK(loi_leq(r, top));
  }
}

TEST_CASE("refinement is monotone in class count and entropy") {
  std::vector<EquivalenceRelation> ps = all_partitions(6);
  std::mt19937_64 rng(20240817);
  std::vector<Distribution> dists;
  dists.emplace_back(6, 1.0 / 6.0);
  for (int d = 0; d < 8; ++d) {
    Distribution v(6);
    double tot = 0;
    for (auto& x : v) tot += (x = std::uniform_real_distribution<>(0.01, 1.0)(rng));
    for (auto& x : v) x /= tot;
    dists.push_back(std::move(v));
  }

  for (size_t i = 0; i < ps.size(); ++i)
    for (size_t j = 0; j < ps.size(); ++j) {
      if (!loi_leq(ps[i], ps[j])) continue;
      REQUIRE(ps[i].class_count() <= ps[j].class_count());
      for (const auto& d : dists) {
        INFO(i << " <= " << j);
        REQUIRE(shannon_entropy(ps[i], d) <= shannon_entropy(ps[j], d) + 1e-9);
      }
    }
}

TEST_CASE("relations compare only on one domain, partitions must be total") {
  EquivalenceRelation a = EquivalenceRelation::from_blocks(3, {{0, 1}, {2}});
  EquivalenceRelation b = EquivalenceRelation::from_blocks(4, {{0, 1}, {2, 3}});
  CHECK_THROWS_AS(loi_leq(a, b), AnalysisError);
  CHECK_THROWS_AS(EquivalenceRelation::from_blocks(3, {{0, 1}}), AnalysisError);
  CHECK_THROWS_AS(EquivalenceRelation::from_blocks(3, {{0, 1}, {1, 2}}), AnalysisError);
  CHECK_THROWS_AS(EquivalenceRelation::from_blocks(3, {{0, 1, 7}}), AnalysisError);
}

// ---------------------------------------------------------------------------
// Brute-force oracle.
// ---------------------------------------------------------------------------

TEST_CASE("input domains form an indexable cross product") {
  Program p8 = compile("#pragma leak high h\n#pragma leak observe __return\n"
                       "int f(unsigned char h) { return h; }\n");
  TypePtr u8 = harness_of(p8).inputs[0].type;
  InputDomain d;
  d.add_scalar_range(u8, 0, 2);
  d.add_scalar_range(u8, 10, 11);
  CHECK(d.dims() == 2);
  CHECK(d.size() == 6);
  // last dimension varies fastest
  CHECK(d.at(0) == InputTuple{{0}, {10}});
  CHECK(d.at(1) == InputTuple{{0}, {11}});
  CHECK(d.at(2) == InputTuple{{1}, {10}});
  CHECK(d.at(5) == InputTuple{{2}, {11}});

  InputDomain wide;
  Program p32 = compile("#pragma leak high h\n#pragma leak observe __return\n"
                        "int f(unsigned int h) { return 0; }\n");
  TypePtr u32 = harness_of(p32).inputs[0].type;
  CHECK_THROWS_WITH(wide.add_scalar_full(u32),
                    Catch::Matchers::ContainsSubstring("restrict"));
}

TEST_CASE("the modulo partition comes out of the oracle") {
  Program p = load_corpus("modulo.mc");
  Harness h = harness_of(p);
  TypePtr u8 = h.inputs[0].type;

  // at l = 1: {1,5,9,13} all observe 2; adding 2 splits the relation
  InputDomain cls;
  cls.add({{1}, {5}, {9}, {13}});
  OracleRelation one = enumerate_relation(p, h, {{1}}, cls);
  CHECK(one.class_count() == 1);
  CHECK(one.classes[0].members == 4);

  InputDomain split;
  split.add({{1}, {5}, {9}, {13}, {2}});
  CHECK(enumerate_relation(p, h, {{1}}, split).class_count() == 2);

  // full high domain: 4 classes, 4 members each, high values >= 16 blocked
  InputDomain full;
  full.add_scalar_full(u8);
  OracleRelation rel = enumerate_relation(p, h, {{1}}, full);
  CHECK(rel.class_count() == 4);
  for (const auto& c : rel.classes) CHECK(c.members == 4);
  CHECK(rel.points == 256);
  CHECK(rel.blocked == 240);

  // a low blocked by the program's own assumption yields an empty relation
  OracleRelation dead = enumerate_relation(p, h, {{7}}, full);
  CHECK(dead.class_count() == 0);
  CHECK(dead.blocked == 256);
}

TEST_CASE("oracle capacity maximizes over the low domain") {
  Program p = load_corpus("modulo.mc");
  Harness h = harness_of(p);
  InputDomain lows, highs;
  lows.add_scalar_full(h.inputs[1].type);
  highs.add_scalar_full(h.inputs[0].type);
  CapacityOracle cap = oracle_capacity(p, h, lows, highs);
  CHECK(cap.class_count == 4);
  CHECK(cap.best_low == InputTuple{{0}});  // first maximizer wins ties
}

TEST_CASE("nondet draws extend the oracle domain with correct weights") {
  Program p = compile(
      "#pragma leak high h\n#pragma leak low l\n#pragma leak observe __return\n"
      "int f(unsigned char h, unsigned char l) {\n"
      "  unsigned char m;\n  m = input_uchar();\n  return (m & 1) + h * 2;\n}\n");
  Harness h = harness_of(p);
  InputDomain highs;
  highs.add_scalar_range(h.inputs[0].type, 0, 3);
  OracleRelation rel = enumerate_relation(p, h, {{0}}, highs);
  // 4 highs x 256 draws, observations (m&1) + 2h -> 8 classes
  CHECK(rel.class_count() == 8);
  CHECK(rel.points == 4 * 256);
  double total = 0;
  for (const auto& c : rel.classes) {
    CHECK(c.members == 128);
    total += c.weight;
  }
  CHECK(total == Catch::Approx(1.0).epsilon(1e-12));

  // replaying a class representative's stream reproduces its observation
  const OracleClass& c0 = rel.classes[0];
  std::vector<Object> args;
  Object ho = make_object(h.inputs[0].type);
  ho.bytes = c0.rep_highs[0];
  args.push_back(std::move(ho));
  Object lo = make_object(h.inputs[1].type);
  args.push_back(std::move(lo));
  VectorStream vs(c0.rep_stream);
  Interp it(p, vs);
  RunResult rr = it.call("f", std::move(args));
  REQUIRE(rr.status == RunResult::Status::Ok);
  // the observation key stores the return as 8 little-endian bytes
  std::vector<std::uint8_t> key;
  std::uint64_t raw = rr.ret->raw;
  for (int i = 0; i < 8; ++i) {
    key.push_back(static_cast<std::uint8_t>(raw & 0xff));
    raw >>= 8;
  }
  CHECK(key == c0.key);
}

TEST_CASE("oracle rejects what it cannot enumerate") {
  Program wide = compile(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(unsigned char h) { unsigned int m; m = input_uint(); return h + m; }\n");
  Harness h = harness_of(wide);
  InputDomain highs;
  highs.add_scalar_range(h.inputs[0].type, 0, 0);
  CHECK_THROWS_WITH(enumerate_relation(wide, h, {}, highs),
                    Catch::Matchers::ContainsSubstring("too wide"));

  Program p = load_corpus("modulo.mc");
  Harness mh = harness_of(p);
  InputDomain full;
  full.add_scalar_full(mh.inputs[0].type);
  OracleConfig tight;
  tight.budget = 10;
  CHECK_THROWS_WITH(enumerate_relation(p, mh, {{0}}, full, tight),
                    Catch::Matchers::ContainsSubstring("budget"));
}

TEST_CASE("a failing assertion aborts enumeration loudly") {
  Program p = compile(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(unsigned char h) { __ASSERT(h < 2); return h; }\n");
  Harness h = harness_of(p);
  InputDomain highs;
  highs.add_scalar_range(h.inputs[0].type, 0, 5);
  CHECK_THROWS_WITH(enumerate_relation(p, h, {}, highs),
                    Catch::Matchers::ContainsSubstring("assertion"));
}
