#pragma once

// Seeded random programs for differential testing: the encoder and the
// interpreter must agree bit-for-bit on every one of these. The shapes are
// chosen so each run completes -- counted loops only, no assumptions, and
// division is total by the language's definition -- and so encoding never
// refuses the program (all scalars stay at or below 32 bits, where
// multiplication needs no constant operand).

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

class RandProg {
 public:
  explicit RandProg(std::uint64_t seed) : rng_(seed) {}

  struct Generated {
    std::string source;
    int high_bits = 8;   // width of h's type
    int low_bits = 8;    // width of l's type
  };

  Generated generate() {
    locals_.clear();
    counters_ = 0;
    std::ostringstream body;

    const char* scalar[] = {"unsigned char", "signed char",  "unsigned short",
                            "short",         "unsigned int", "int"};
    int hw = pick(6), lw = pick(6);
    Generated g;
    g.high_bits = width_of(scalar[hw]);
    g.low_bits = width_of(scalar[lw]);

    vars_ = {"h", "l"};
    int nlocals = 2 + pick(3);
    std::ostringstream decls;
    for (int i = 0; i < nlocals; ++i) {
      std::string name = "v" + std::to_string(i);
      decls << "  " << scalar[pick(6)] << " " << name << ";\n";
      locals_.push_back(name);
      vars_.push_back(name);
    }

    stmt_list(body, 1 + pick(5), 0, 1);
    std::ostringstream all;
    all << "#pragma leak high h\n"
        << "#pragma leak low l\n"
        << "#pragma leak observe __return\n"
        << "int f(" << scalar[hw] << " h, " << scalar[lw] << " l) {\n"
        << decls.str() << body.str() << "  return " << expr(2) << ";\n}\n";
    g.source = all.str();
    return g;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> vars_;    // readable
  std::vector<std::string> locals_;  // assignable
  int counters_ = 0;

  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

  static int width_of(const std::string& t) {
    if (t.find("char") != std::string::npos) return 8;
    if (t.find("short") != std::string::npos) return 16;
    return 32;
  }

  std::string literal() {
    switch (pick(5)) {
      case 0: return std::to_string(pick(4));
      case 1: return std::to_string(pick(256));
      case 2: return "-" + std::to_string(1 + pick(128));
      case 3: return std::to_string(65535 + pick(1000));
      default: return std::to_string(pick(8));
    }
  }

  std::string expr(int depth) {
    if (depth <= 0 || pick(4) == 0)
      return pick(3) == 0 ? literal() : vars_[static_cast<size_t>(pick(static_cast<int>(vars_.size())))];
    switch (pick(10)) {
      case 0: {
        const char* ops[] = {"+", "-", "*", "&", "|", "^"};
        return "(" + expr(depth - 1) + " " + ops[pick(6)] + " " + expr(depth - 1) + ")";
      }
      case 1: {
        const char* ops[] = {"/", "%"};
        return "(" + expr(depth - 1) + " " + ops[pick(2)] + " " + expr(depth - 1) + ")";
      }
      case 2: {
        const char* ops[] = {"<<", ">>"};
        // keep the amount a small constant so both engines agree trivially on
        // the interesting cases and the circuit stays flat
        return "(" + expr(depth - 1) + " " + ops[pick(2)] + " " + std::to_string(pick(9)) + ")";
      }
      case 3: {
        const char* ops[] = {"==", "!=", "<", "<=", ">", ">="};
        return "(" + expr(depth - 1) + " " + ops[pick(6)] + " " + expr(depth - 1) + ")";
      }
      case 4: {
        const char* ops[] = {"&&", "||"};
        return "(" + expr(depth - 1) + " " + ops[pick(2)] + " " + expr(depth - 1) + ")";
      }
      case 5: {
        const char* ops[] = {"-", "~", "!"};
        return "(" + std::string(ops[pick(3)]) + expr(depth - 1) + ")";
      }
      case 6: {
        const char* types[] = {"unsigned char", "signed char", "unsigned short",
                               "short", "unsigned int", "int", "bool"};
        return "((" + std::string(types[pick(7)]) + ") " + expr(depth - 1) + ")";
      }
      default: {
        const char* ops[] = {"+", "-", "*"};
        return "(" + expr(depth - 1) + " " + ops[pick(3)] + " " + expr(depth - 1) + ")";
      }
    }
  }

  void assign(std::ostringstream& os, int indent) {
    if (locals_.empty()) return;
    os << std::string(static_cast<size_t>(indent) * 2, ' ')
       << locals_[static_cast<size_t>(pick(static_cast<int>(locals_.size())))] << " = "
       << expr(2 + pick(2)) << ";\n";
  }

  void stmt_list(std::ostringstream& os, int n, int depth, int indent) {
    for (int i = 0; i < n; ++i) stmt(os, depth, indent);
  }

  void stmt(std::ostringstream& os, int depth, int indent) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    int c = pick(depth < 2 ? 6 : 4);
    if (c < 3) {
      assign(os, indent);
      return;
    }
    if (c == 3) {
      os << pad << "if (" << expr(2) << ") {\n";
      stmt_list(os, 1 + pick(2), depth + 1, indent + 1);
      if (pick(2) == 0) {
        os << pad << "} else {\n";
        stmt_list(os, 1 + pick(2), depth + 1, indent + 1);
      }
      os << pad << "}\n";
      return;
    }
    // counted loops with a dedicated counter nothing else touches; at most
    // three iterations so an unwinding bound of four always covers them
    std::string cnt = "c" + std::to_string(counters_++);
    int iters = 1 + pick(3);
    if (c == 4) {
      os << pad << "int " << cnt << ";\n";
      os << pad << "for (" << cnt << " = 0; " << cnt << " < " << iters << "; " << cnt
         << " = " << cnt << " + 1) {\n";
      stmt_list(os, 1 + pick(2), depth + 1, indent + 1);
      os << pad << "}\n";
    } else {
      os << pad << "int " << cnt << ";\n";
      os << pad << "while (" << cnt << " < " << iters << ") {\n";
      stmt_list(os, 1 + pick(2), depth + 1, indent + 1);
      os << pad << "  " << cnt << " = " << cnt << " + 1;\n";
      os << pad << "}\n";
    }
  }
};

}  // namespace testutil
