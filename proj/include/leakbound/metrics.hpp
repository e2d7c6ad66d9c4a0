#pragma once

// Lattice-of-Information measures over explicit equivalence relations.
// The order here: r1 <= r2 when r2 refines r1, i.e. r2 makes at least the
// distinctions r1 makes. Leakage measures are monotone along it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "leakbound/diag.hpp"

namespace leakbound {

struct EquivalenceRelation {
  int domain_size = 0;
  std::vector<int> class_of;  // element -> dense class id

  int class_count() const {
    int m = -1;
    for (int c : class_of) m = std::max(m, c);
    return m + 1;
  }

  static EquivalenceRelation from_blocks(int n, const std::vector<std::vector<int>>& blocks) {
    EquivalenceRelation r;
    r.domain_size = n;
    r.class_of.assign(static_cast<size_t>(n), -1);
    int id = 0;
    for (const auto& b : blocks) {
      for (int e : b) {
        if (e < 0 || e >= n) throw AnalysisError("partition element out of range");
        if (r.class_of[static_cast<size_t>(e)] != -1)
          throw AnalysisError("partition blocks overlap");
        r.class_of[static_cast<size_t>(e)] = id;
      }
      ++id;
    }
    for (int c : r.class_of)
      if (c == -1) throw AnalysisError("partition does not cover the domain");
    return r;
  }

  // canonical form: classes renumbered by first occurrence
  std::vector<int> canonical() const {
    std::map<int, int> seen;
    std::vector<int> out;
    out.reserve(class_of.size());
    for (int c : class_of) {
      auto it = seen.find(c);
      if (it == seen.end()) it = seen.emplace(c, static_cast<int>(seen.size())).first;
      out.push_back(it->second);
    }
    return out;
  }

  bool same_partition(const EquivalenceRelation& o) const {
    return domain_size == o.domain_size && canonical() == o.canonical();
  }
};

// r1 <= r2: every class of r2 lies inside a class of r1.
inline bool loi_leq(const EquivalenceRelation& r1, const EquivalenceRelation& r2) {
  if (r1.domain_size != r2.domain_size)
    throw AnalysisError("relations compare only on a shared domain");
  std::map<int, int> image;  // r2 class -> r1 class
  for (int e = 0; e < r1.domain_size; ++e) {
    int c2 = r2.class_of[static_cast<size_t>(e)];
    int c1 = r1.class_of[static_cast<size_t>(e)];
    auto it = image.find(c2);
    if (it == image.end()) {
      image[c2] = c1;
    } else if (it->second != c1) {
      return false;
    }
  }
  return true;
}

using Distribution = std::vector<double>;  // probability per domain element

inline std::vector<double> class_probs(const EquivalenceRelation& rel,
                                       const Distribution& dist) {
  if (static_cast<int>(dist.size()) != rel.domain_size)
    throw AnalysisError("distribution size does not match the domain");
  std::vector<double> p(static_cast<size_t>(rel.class_count()), 0.0);
  for (int e = 0; e < rel.domain_size; ++e)
    p[static_cast<size_t>(rel.class_of[static_cast<size_t>(e)])] +=
        dist[static_cast<size_t>(e)];
  return p;
}

// Default mode: plain double evaluation, matching what a straightforward
// implementation prints. p*log2(p) terms with p rounding to 1 contribute
// exactly 0 here; see shannon_entropy_bounds for the honest interval.
inline double shannon_entropy_probs(const std::vector<double>& probs) {
  double h = 0;
  for (double p : probs) {
    if (p < 0) throw AnalysisError("negative probability");
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

inline double shannon_entropy(const EquivalenceRelation& rel, const Distribution& dist) {
  return shannon_entropy_probs(class_probs(rel, dist));
}

// ---------------------------------------------------------------------------
// High-precision mode. Probabilities are exact dyadics num/2^den, and each
// -p*log2(p) term is bracketed with rational bounds on ln:
//   (x-1)/x <= ln(x) <= x-1
// applied to the mantissa only, so the interval stays tight. Results expose
// what double evaluation hides: for p = 2^-64 the complement term
// -(1-p)log2(1-p) is ~1.44*2^-64, about 2% of the dominant 64*2^-64 term
// that double mode reports alone.
// ---------------------------------------------------------------------------

struct DyadicProb {
  std::uint64_t num = 0;
  int den_log2 = 0;  // value = num / 2^den_log2
};

struct EntropyBounds {
  double lo = 0;
  double hi = 0;
};

namespace detail {

constexpr double kLn2Lo = 0.6931471805599452;  // < ln 2
constexpr double kLn2Hi = 0.6931471805599454;  // > ln 2

struct Interval {
  double lo, hi;
};

inline Interval widen(Interval x) {
  return {std::nextafter(x.lo, -1e308), std::nextafter(x.hi, 1e308)};
}

inline Interval iadd(Interval a, Interval b) { return widen({a.lo + b.lo, a.hi + b.hi}); }

inline Interval imul_pos(Interval a, Interval b) {
  // both intervals non-negative
  return widen({a.lo * b.lo, a.hi * b.hi});
}

// log2(num) for an integer num >= 1, via num = 2^b * m with m in [1,2)
inline Interval ilog2_int(std::uint64_t num) {
  int b = 63;
  while (!(num >> b & 1)) --b;
  double m = static_cast<double>(num) / std::pow(2.0, b);  // exact for m from dyadic num
  // ln m in [(m-1)/m, m-1], both >= 0
  double ln_lo = (m - 1.0) / m;
  double ln_hi = m - 1.0;
  Interval log2m = widen({ln_lo / kLn2Hi, ln_hi / kLn2Lo});
  if (m == 1.0) log2m = {0.0, 0.0};
  return {static_cast<double>(b) + log2m.lo, static_cast<double>(b) + log2m.hi};
}

}  // namespace detail

// Bounds on -sum p*log2(p) for exact dyadic probabilities.
inline EntropyBounds shannon_entropy_bounds(const std::vector<DyadicProb>& probs) {
  using namespace detail;
  Interval total{0.0, 0.0};
  for (const auto& p : probs) {
    if (p.num == 0) continue;
    if (p.den_log2 < 0 || p.den_log2 > 64)
      throw AnalysisError("dyadic probability denominator out of range");
    if (p.den_log2 < 64 && p.num > (1ull << p.den_log2))
      throw AnalysisError("dyadic probability exceeds 1");
    double pv = static_cast<double>(p.num) * std::pow(2.0, -p.den_log2);
    Interval pi = widen({pv, pv});
    if (pi.lo < 0) pi.lo = 0;

    bool near_one = p.den_log2 > 0 && p.num > (p.den_log2 == 64
                                                   ? 0x8000000000000000ull
                                                   : (1ull << (p.den_log2 - 1)));
    Interval term;
    if (near_one) {
      // p = 1-q with small q: -ln p in [q, q/(1-q)], so
      // -p*log2(p) in [p*q/ln2, q/ln2] up to rounding
      std::uint64_t qnum = p.den_log2 == 64 ? (0 - p.num) : ((1ull << p.den_log2) - p.num);
      double qv = static_cast<double>(qnum) * std::pow(2.0, -p.den_log2);
      Interval qi = widen({qv, qv});
      if (qi.lo < 0) qi.lo = 0;
      term = widen({pi.lo * qi.lo / kLn2Hi, qi.hi / (pi.lo * kLn2Lo)});
    } else {
      // -p log2 p = p * (den - log2 num)
      Interval l2n = ilog2_int(p.num);
      Interval inner = widen({static_cast<double>(p.den_log2) - l2n.hi,
                              static_cast<double>(p.den_log2) - l2n.lo});
      if (inner.lo < 0) inner.lo = 0;  // p <= 1 so the true term is >= 0
      term = imul_pos(pi, inner);
    }
    total = iadd(total, term);
  }
  return EntropyBounds{total.lo, total.hi};
}

// ---------------------------------------------------------------------------

inline double channel_capacity(std::uint64_t class_count) {
  if (class_count == 0)
    throw AnalysisError("channel capacity needs at least one class");
  return std::log2(static_cast<double>(class_count));
}

inline bool non_interfering(const EquivalenceRelation& rel) {
  return rel.class_count() == 1;
}

inline bool policy_breached(std::uint64_t class_count, std::uint64_t n) {
  return class_count > n;
}

}  // namespace leakbound
