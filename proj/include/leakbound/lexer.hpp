#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "leakbound/diag.hpp"

namespace leakbound {

enum class TokKind { Ident, Int, Punct, Pragma, Eof };

struct Token {
  TokKind kind = TokKind::Eof;
  std::string text;           // identifier spelling, punctuator, or pragma payload
  std::uint64_t value = 0;    // Int only
  SourceLoc loc;
};

class Lexer {
 public:
  explicit Lexer(std::string src) : src_(std::move(src)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      Token t = next();
      bool done = t.kind == TokKind::Eof;
      out.push_back(std::move(t));
      if (done) break;
    }
    return out;
  }

 private:
  std::string src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  bool at_line_start_ = true;

  char peek(size_t off = 0) const {
    return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
  }

  char get() {
    char c = peek();
    ++pos_;
    if (c == '\n') {
      ++line_;
      col_ = 1;
      at_line_start_ = true;
    } else {
      ++col_;
      if (!std::isspace(static_cast<unsigned char>(c))) at_line_start_ = false;
    }
    return c;
  }

  void skip_space_and_comments() {
    for (;;) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else if (c == '/' && peek(1) == '/') {
        while (peek() && peek() != '\n') get();
      } else if (c == '/' && peek(1) == '*') {
        SourceLoc start{line_, col_};
        get();
        get();
        while (!(peek() == '*' && peek(1) == '/')) {
          if (!peek()) throw ParseError("unterminated block comment", start);
          get();
        }
        get();
        get();
      } else {
        return;
      }
    }
  }

  Token next() {
    skip_space_and_comments();
    SourceLoc loc{line_, col_};
    char c = peek();
    if (!c) return Token{TokKind::Eof, "", 0, loc};

    if (c == '#') {
      if (!at_line_start_)
        throw ParseError("'#' is only valid at the start of a line", loc);
      std::string payload;
      get();
      while (peek() && peek() != '\n') payload.push_back(get());
      // strip leading/trailing blanks
      size_t a = payload.find_first_not_of(" \t");
      size_t b = payload.find_last_not_of(" \t\r");
      payload = a == std::string::npos ? "" : payload.substr(a, b - a + 1);
      return Token{TokKind::Pragma, payload, 0, loc};
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')
        text.push_back(get());
      return Token{TokKind::Ident, text, 0, loc};
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string text;
      int base = 10;
      if (c == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
        get();
        get();
        base = 16;
        while (std::isxdigit(static_cast<unsigned char>(peek()))) text.push_back(get());
        if (text.empty()) throw ParseError("hex literal needs at least one digit", loc);
      } else {
        while (std::isdigit(static_cast<unsigned char>(peek()))) text.push_back(get());
      }
      // optional unsigned/long suffixes; the value alone decides the type
      while (peek() == 'u' || peek() == 'U' || peek() == 'l' || peek() == 'L') get();
      std::uint64_t value = 0;
      for (char d : text) {
        int digit = d <= '9' ? d - '0' : (d | 0x20) - 'a' + 10;
        if (value > (UINT64_MAX - digit) / base)
          throw ParseError("integer literal does not fit in 64 bits", loc);
        value = value * base + digit;
      }
      return Token{TokKind::Int, text, value, loc};
    }

    if (c == '\'') {
      // character constant, value = byte
      get();
      char v = get();
      if (v == '\\') {
        char e = get();
        switch (e) {
          case 'n': v = '\n'; break;
          case 't': v = '\t'; break;
          case '0': v = '\0'; break;
          case '\\': v = '\\'; break;
          case '\'': v = '\''; break;
          default: throw ParseError("unsupported escape in character constant", loc);
        }
      }
      if (get() != '\'') throw ParseError("unterminated character constant", loc);
      return Token{TokKind::Int, std::string(1, v), static_cast<std::uint64_t>(
                                                        static_cast<unsigned char>(v)),
                   loc};
    }

    static const char* two_char[] = {"->", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||"};
    for (const char* p : two_char) {
      if (c == p[0] && peek(1) == p[1]) {
        get();
        get();
        return Token{TokKind::Punct, p, 0, loc};
      }
    }

    static const std::string singles = "+-*/%&|^~!<>=()[]{};,.";
    if (singles.find(c) != std::string::npos) {
      get();
      return Token{TokKind::Punct, std::string(1, c), 0, loc};
    }

    throw ParseError(std::string("unexpected character '") + c + "'", loc);
  }
};

}  // namespace leakbound
