#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "leakbound/ast.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/harness.hpp"
#include "leakbound/parser.hpp"
#include "leakbound/print.hpp"
#include "leakbound/typecheck.hpp"
#include "support/helpers.hpp"

using namespace leakbound;
using testutil::compile;
using testutil::harness_of;
using testutil::load_corpus;

namespace {

const char* kModulo =
    "#pragma leak high h\n"
    "#pragma leak low l\n"
    "#pragma leak observe __return\n"
    "int leak(unsigned char h, unsigned char l) {\n"
    "  __ASSUME(h < 16);\n"
    "  __ASSUME(l < 2);\n"
    "  return (h % 4) + l;\n"
    "}\n";

}  // namespace

TEST_CASE("programs survive a print/parse round trip") {
  for (const char* name :
       {"modulo.mc", "password.mc", "underflow.mc", "atalk.mc", "tcmsg.mc",
        "sigaltstack.mc", "getpass.mc", "login.mc", "loop3.mc", "checksum.mc"}) {
    Ast a = parse_program(testutil::read_file(testutil::corpus_path(name)));
    std::string printed = to_string(a);
    Ast b = parse_program(printed);
    INFO(name);
    CHECK(ast_equal(a, b));
  }
}

TEST_CASE("printer keeps the verification spellings") {
  Ast a = parse_program(kModulo);
  std::string printed = to_string(a);
  CHECK(testutil::contains(printed, "__ASSUME(h < 16);"));
  CHECK(testutil::contains(printed, "#pragma leak high h"));
  CHECK(testutil::contains(printed, "return h % 4 + l;"));  // precedence-aware
}

TEST_CASE("operator precedence in the parser matches the evaluator's shape") {
  Ast a = parse_program(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(int h) { return 1 + 2 * h == 3 & 1; }\n");
  Ast b = parse_program(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(int h) { return (((1 + (2 * h)) == 3) & 1); }\n");
  CHECK(ast_equal(a, b));
}

TEST_CASE("parse errors carry a location and a usable message") {
  CHECK_THROWS_AS(parse_program("int f( {"), ParseError);
  CHECK_THROWS_WITH(parse_program("#pragma leak medium x\nint f(int x) { return 0; }"),
                    Catch::Matchers::ContainsSubstring("high, low, or observe"));
  CHECK_THROWS_WITH(parse_program("#pragma leak high h\n"),
                    Catch::Matchers::ContainsSubstring("not followed by a function"));
  CHECK_THROWS_WITH(parse_program("int f(int x) { #pragma leak high x\n return 0; }"),
                    Catch::Matchers::ContainsSubstring("start of a line"));
  CHECK_THROWS_WITH(parse_program("int f(int x) {\n#pragma leak high x\n return 0; }"),
                    Catch::Matchers::ContainsSubstring("top level"));
  try {
    parse_program("int f(int x) {\n  return @;\n}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.loc().line == 2);
  }
}

TEST_CASE("builtin scalar types resolve to their exact widths") {
  Program p = compile(
      "#pragma leak high a\n#pragma leak observe __return\n"
      "int f(char a, unsigned char b, short c, unsigned short d, int e,\n"
      "      unsigned int g, long long i, unsigned long long j, bool k,\n"
      "      loff_t m, size_t n, s8 o, u8 q, s16 r, u16 s, s32 t, u32 u,\n"
      "      s64 v, u64 w) { return 0; }\n");
  const FuncSig& sig = p.sigs.at("f");
  auto width = [&](const char* name) {
    for (const auto& prm : sig.params)
      if (prm.name == name) return prm.type->width_bits;
    FAIL("no param " << name);
    return -1;
  };
  CHECK(width("a") == 8);
  CHECK(width("b") == 8);
  CHECK(width("c") == 16);
  CHECK(width("d") == 16);
  CHECK(width("e") == 32);
  CHECK(width("g") == 32);
  CHECK(width("i") == 64);
  CHECK(width("j") == 64);
  CHECK(width("k") == 1);
  CHECK(width("m") == 64);   // loff_t
  CHECK(width("n") == 32);   // size_t
  CHECK(width("o") == 8);
  CHECK(width("v") == 64);
  CHECK(width("w") == 64);
}

TEST_CASE("long tracks the target architecture") {
  const char* src =
      "#pragma leak high a\n#pragma leak observe __return\n"
      "int f(long a, unsigned long b) { return 0; }\n";
  Program p32 = compile(src, 32);
  Program p64 = compile(src, 64);
  CHECK(p32.sigs.at("f").params[0].type->width_bits == 32);
  CHECK(p32.sigs.at("f").params[1].type->width_bits == 32);
  CHECK(p64.sigs.at("f").params[0].type->width_bits == 64);
  CHECK(p64.sigs.at("f").params[1].type->width_bits == 64);
}

TEST_CASE("records use a packed layout") {
  Program p = load_corpus("tcmsg.mc");
  CHECK(p.env.records.at("tcmsg")->size_bytes() == 20);

  Program a = load_corpus("atalk.mc");
  CHECK(a.env.records.at("sockaddr_at")->size_bytes() == 16);

  CHECK(load_corpus("sigaltstack.mc", 32).env.records.at("stack_t")->size_bytes() == 12);
  CHECK(load_corpus("sigaltstack.mc", 64).env.records.at("stack_t")->size_bytes() == 20);
  CHECK(load_corpus("sigaltstack_pad1.mc", 32).env.records.at("report_t")->size_bytes() == 11);
  CHECK(load_corpus("sigaltstack_pad1.mc", 64).env.records.at("report_t")->size_bytes() == 15);
}

TEST_CASE("trailing pad arithmetic") {
  CHECK(padding_bytes(20, 8) == 4);
  CHECK(padding_bytes(12, 4) == 0);
  CHECK(padding_bytes(16, 8) == 0);
  CHECK(padding_bytes(16, 4) == 0);
  CHECK(padding_bytes(15, 8) == 1);
  CHECK(padding_bytes(11, 4) == 1);
  CHECK(padding_bytes(13, 4) == 3);
  CHECK(padding_bytes(1, 8) == 7);
  CHECK(padding_bytes(8, 8) == 0);
}

TEST_CASE("typedefs resolve and may shadow builtin spellings harmlessly") {
  Program p = compile(
      "typedef long long loff_t;\n"
      "typedef unsigned short word;\n"
      "#pragma leak high a\n#pragma leak observe __return\n"
      "int f(loff_t a, word b) { return 0; }\n");
  CHECK(p.sigs.at("f").params[0].type->width_bits == 64);
  CHECK(p.sigs.at("f").params[1].type->width_bits == 16);

  CHECK_THROWS_WITH(compile("typedef int t;\ntypedef int t;\n"
                            "#pragma leak high a\n#pragma leak observe __return\n"
                            "int f(t a) { return 0; }\n"),
                    Catch::Matchers::ContainsSubstring("defined twice"));
}

TEST_CASE("type errors are rejected with locations") {
  // unknown type name
  CHECK_THROWS_AS(compile("#pragma leak high a\n#pragma leak observe __return\n"
                          "int f(widget a) { return 0; }\n"),
                  ParseError);  // 'widget' is not a type, so the parse fails first
  // assignment to an undeclared name
  CHECK_THROWS_AS(compile("#pragma leak high a\n#pragma leak observe __return\n"
                          "int f(int a) { b = 1; return 0; }\n"),
                  TypeError);
  // memcpy length must be constant
  CHECK_THROWS_WITH(
      compile("struct s { int x; };\n"
              "#pragma leak high a\n#pragma leak observe o\n"
              "int f(int a, struct s* o) { struct s t; t.x = a;\n"
              "  memcpy(o, &t, a); return 0; }\n"),
      Catch::Matchers::ContainsSubstring("constant"));
  // copy_to_user must target an output parameter
  CHECK_THROWS_WITH(
      compile("struct s { int x; };\n"
              "#pragma leak high a\n#pragma leak observe o\n"
              "int f(int a, struct s* o) { struct s t; struct s u;\n"
              "  copy_to_user(&u, &t, 4); return 0; }\n"),
      Catch::Matchers::ContainsSubstring("output parameter"));
  // length larger than the region
  CHECK_THROWS_WITH(
      compile("struct s { int x; };\n"
              "#pragma leak high a\n#pragma leak observe o\n"
              "int f(int a, struct s* o) { struct s t;\n"
              "  memcpy(o, &t, 64); return 0; }\n"),
      Catch::Matchers::ContainsSubstring("64"));
}

TEST_CASE("surface __ASSERT is reserved for the analysis") {
  Program p = compile(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(int h) { __ASSERT(h == 0); return 0; }\n");
  Harness h = harness_of(p);
  CHECK_THROWS_WITH(build_driver(p, h, 2, true),
                    Catch::Matchers::ContainsSubstring("__ASSUME"));
}

TEST_CASE("harness resolution enforces complete annotations") {
  // missing role on an input
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak high h\n#pragma leak observe __return\n"
                                       "int f(int h, int x) { return x; }\n")),
                    Catch::Matchers::ContainsSubstring("no role"));
  // no high at all
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak low l\n#pragma leak observe __return\n"
                                       "int f(int l) { return l; }\n")),
                    Catch::Matchers::ContainsSubstring("no high input"));
  // no observation
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak high h\n"
                                       "int f(int h) { return h; }\n")),
                    Catch::Matchers::ContainsSubstring("no observation"));
  // a doubly-marked parameter is rejected before anything else
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak high h\n#pragma leak observe h\n"
                                       "int f(int h) { return h; }\n")),
                    Catch::Matchers::ContainsSubstring("more than one role"));
  // value inputs cannot be observed
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak high h\n#pragma leak observe l\n"
                                       "int f(int h, int l) { return h; }\n")),
                    Catch::Matchers::ContainsSubstring("cannot be observed"));
  // output parameters carry no role
  CHECK_THROWS_WITH(harness_of(compile("struct s { int x; };\n"
                                       "#pragma leak high h\n#pragma leak high o\n"
                                       "#pragma leak observe __return\n"
                                       "int f(int h, struct s* o) { return 0; }\n")),
                    Catch::Matchers::ContainsSubstring("observe"));
  // observing the return of a void function
  CHECK_THROWS_WITH(harness_of(compile("struct s { int x; };\n"
                                       "#pragma leak high h\n#pragma leak observe __return\n"
                                       "void f(int h, struct s* o) { o->x = 1; }\n")),
                    Catch::Matchers::ContainsSubstring("void"));
  // pragma naming a non-parameter
  CHECK_THROWS_WITH(harness_of(compile("#pragma leak high h\n#pragma leak low ghost\n"
                                       "#pragma leak observe __return\n"
                                       "int f(int h) { return h; }\n")),
                    Catch::Matchers::ContainsSubstring("ghost"));
}

TEST_CASE("harness shape for an output record") {
  Program p = load_corpus("sigaltstack.mc", 64);
  Harness h = harness_of(p);
  CHECK(h.entry == "do_sigaltstack");
  REQUIRE(h.inputs.size() == 2);
  CHECK(h.inputs[0].name == "resid");
  CHECK(h.inputs[0].role == Role::High);
  CHECK(h.inputs[1].name == "flags");
  CHECK(h.inputs[1].role == Role::Low);
  REQUIRE(h.outputs.size() == 1);
  CHECK(h.outputs[0].name == "uoss");
  CHECK(h.outputs[0].observed);
  CHECK(h.outputs[0].region_bytes == 24);
  CHECK(h.outputs[0].pad_bytes == 4);
  CHECK_FALSE(h.observes_return);  // only the copied-out record is visible

  Harness h32 = harness_of(load_corpus("sigaltstack.mc", 32));
  CHECK(h32.outputs[0].region_bytes == 12);
  CHECK(h32.outputs[0].pad_bytes == 0);
}

TEST_CASE("default entry picks the single annotated function") {
  Program p = compile(
      "int helper(int x) { return x + 1; }\n"
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int main_entry(int h) { return helper(h); }\n");
  CHECK(default_entry(p) == "main_entry");

  Program two = compile(
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int f(int h) { return h; }\n"
      "#pragma leak high h\n#pragma leak observe __return\n"
      "int g(int h) { return h; }\n");
  CHECK_THROWS_AS(default_entry(two), HarnessError);
}
