// Copyright 2026 The netexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// A small PlanOut-style assignment language:
//
//   # comment
//   prob = randomFloat(min=0, max=1, unit=group_id);
//   treated = bernoulliTrial(p=prob, unit=subject_id);
//
// Statements run in order. The builtin assigning variable v hashes with the
// salt "<experiment>.<v>", so distinct variables draw independently.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/hash.hpp"

namespace netexp::dsl {

enum class Builtin { kUniformChoice, kBernoulliTrial, kRandomFloat };

inline std::string builtin_name(Builtin b) {
  switch (b) {
    case Builtin::kUniformChoice: return "uniformChoice";
    case Builtin::kBernoulliTrial: return "bernoulliTrial";
    case Builtin::kRandomFloat: return "randomFloat";
  }
  return "?";
}

struct VariableRef {
  std::string name;
  friend bool operator==(const VariableRef&, const VariableRef&) = default;
};

struct UnitRef {
  std::string name;
  friend bool operator==(const UnitRef&, const UnitRef&) = default;
};

using Value = std::variant<double, std::vector<double>, VariableRef, UnitRef>;

struct Argument {
  std::string keyword;
  Value value;
  friend bool operator==(const Argument&, const Argument&) = default;
};

struct Statement {
  std::string variable;
  Builtin builtin = Builtin::kUniformChoice;
  std::vector<Argument> arguments;
  std::size_t line = 0;

  const Value* find(std::string_view keyword) const {
    for (const auto& a : arguments) {
      if (a.keyword == keyword) return &a.value;
    }
    return nullptr;
  }
  friend bool operator==(const Statement&, const Statement&) = default;
};

struct Program {
  std::vector<Statement> statements;

  // Assigned variables in order of first assignment.
  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : statements) {
      if (seen.insert(s.variable).second) out.push_back(s.variable);
    }
    return out;
  }

  // Unit names referenced anywhere in the program, in order of first use.
  std::vector<std::string> units() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : statements) {
      for (const auto& a : s.arguments) {
        if (auto* u = std::get_if<UnitRef>(&a.value); u && seen.insert(u->name).second) out.push_back(u->name);
      }
    }
    return out;
  }
};

namespace detail {

enum class TokenKind { kIdent, kNumber, kEquals, kLParen, kRParen, kLBracket, kRBracket, kComma, kSemicolon, kEnd };

struct Token {
  TokenKind kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

inline std::string describe(TokenKind k) {
  switch (k) {
    case TokenKind::kIdent: return "identifier";
    case TokenKind::kNumber: return "number";
    case TokenKind::kEquals: return "'='";
    case TokenKind::kLParen: return "'('";
    case TokenKind::kRParen: return "')'";
    case TokenKind::kLBracket: return "'['";
    case TokenKind::kRBracket: return "']'";
    case TokenKind::kComma: return "','";
    case TokenKind::kSemicolon: return "';'";
    case TokenKind::kEnd: return "end of input";
  }
  return "?";
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      Token tok{TokenKind::kEnd, {}, 0.0, line_, column_};
      if (pos_ >= src_.size()) {
        out.push_back(tok);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        tok.kind = TokenKind::kIdent;
        tok.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
        std::size_t start = pos_;
        advance();
        while (pos_ < src_.size()) {
          char d = src_[pos_];
          bool exp_sign = (d == '-' || d == '+') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E');
          if (!(std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == 'e' || d == 'E' || exp_sign)) break;
          advance();
        }
        tok.kind = TokenKind::kNumber;
        tok.text = std::string(src_.substr(start, pos_ - start));
        auto v = parse_number<double>(tok.text);
        if (!v) throw ParseError("invalid number \"" + tok.text + "\"", tok.line, tok.column);
        tok.number = *v;
      } else {
        switch (c) {
          case '=': tok.kind = TokenKind::kEquals; break;
          case '(': tok.kind = TokenKind::kLParen; break;
          case ')': tok.kind = TokenKind::kRParen; break;
          case '[': tok.kind = TokenKind::kLBracket; break;
          case ']': tok.kind = TokenKind::kRBracket; break;
          case ',': tok.kind = TokenKind::kComma; break;
          case ';': tok.kind = TokenKind::kSemicolon; break;
          default:
            throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
        }
        tok.text = std::string(1, c);
        advance();
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

struct BuiltinSignature {
  Builtin builtin;
  std::vector<std::string> required;
};

inline std::optional<BuiltinSignature> lookup_builtin(std::string_view name) {
  if (name == "uniformChoice") return BuiltinSignature{Builtin::kUniformChoice, {"choices", "unit"}};
  if (name == "bernoulliTrial") return BuiltinSignature{Builtin::kBernoulliTrial, {"p", "unit"}};
  if (name == "randomFloat") return BuiltinSignature{Builtin::kRandomFloat, {"min", "max", "unit"}};
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Program parse() {
    Program prog;
    while (peek().kind != TokenKind::kEnd) prog.statements.push_back(statement());
    return prog;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  const Token& expect(TokenKind kind) {
    const Token& t = tokens_[pos_];
    if (t.kind != kind) {
      std::string got = t.kind == TokenKind::kEnd ? "end of input" : "\"" + t.text + "\"";
      throw ParseError("expected " + describe(kind) + ", found " + got, t.line, t.column);
    }
    ++pos_;
    return t;
  }

  Statement statement() {
    const Token& var = expect(TokenKind::kIdent);
    Statement st;
    st.variable = var.text;
    st.line = var.line;
    expect(TokenKind::kEquals);
    const Token& fn = expect(TokenKind::kIdent);
    auto sig = lookup_builtin(fn.text);
    if (!sig) throw ParseError("unknown builtin \"" + fn.text + "\"", fn.line, fn.column);
    st.builtin = sig->builtin;
    expect(TokenKind::kLParen);
    if (peek().kind != TokenKind::kRParen) {
      while (true) {
        const Token& kw = expect(TokenKind::kIdent);
        if (std::find(sig->required.begin(), sig->required.end(), kw.text) == sig->required.end()) {
          throw ParseError("unexpected argument \"" + kw.text + "\" for " + fn.text, kw.line, kw.column);
        }
        if (st.find(kw.text)) throw ParseError("duplicate argument \"" + kw.text + "\"", kw.line, kw.column);
        expect(TokenKind::kEquals);
        st.arguments.push_back(Argument{kw.text, value(kw.text)});
        if (peek().kind != TokenKind::kComma) break;
        ++pos_;
      }
    }
    const Token& close = expect(TokenKind::kRParen);
    for (const auto& req : sig->required) {
      if (!st.find(req)) {
        throw ParseError(fn.text + " is missing required argument \"" + req + "\"", close.line, close.column);
      }
    }
    expect(TokenKind::kSemicolon);
    defined_.insert(st.variable);
    return st;
  }

  Value value(const std::string& keyword) {
    const Token& t = peek();
    if (keyword == "unit") {
      if (t.kind != TokenKind::kIdent) throw ParseError("unit must name a unit", t.line, t.column);
      ++pos_;
      return UnitRef{t.text};
    }
    if (keyword == "choices") {
      expect(TokenKind::kLBracket);
      std::vector<double> list;
      if (peek().kind != TokenKind::kRBracket) {
        while (true) {
          list.push_back(expect(TokenKind::kNumber).number);
          if (peek().kind != TokenKind::kComma) break;
          ++pos_;
        }
      }
      expect(TokenKind::kRBracket);
      return list;
    }
    if (t.kind == TokenKind::kNumber) {
      ++pos_;
      return t.number;
    }
    if (t.kind == TokenKind::kIdent) {
      if (!defined_.count(t.text)) throw ParseError("reference to undefined variable \"" + t.text + "\"", t.line, t.column);
      ++pos_;
      return VariableRef{t.text};
    }
    throw ParseError("expected a number or variable", t.line, t.column);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::set<std::string> defined_;
};

}  // namespace detail

inline Program parse(std::string_view source) {
  return detail::Parser(detail::Lexer(source).tokenize()).parse();
}

// Canonical string form of a numeric unit id (shortest round-trip decimal).
inline std::string unit_key(double value) { return format_double(value); }
inline std::string unit_key(long long value) { return std::to_string(value); }

using Bindings = std::map<std::string, std::string>;

// Variable values after running every statement, keyed by variable name.
using Values = std::map<std::string, double>;

inline Values evaluate(const Program& program, std::string_view experiment, const Bindings& units) {
  Values values;
  for (const Statement& st : program.statements) {
    const std::string salt = std::string(experiment) + "." + st.variable;
    auto number = [&](std::string_view kw) -> double {
      const Value& v = *st.find(kw);
      if (auto* d = std::get_if<double>(&v)) return *d;
      if (auto* ref = std::get_if<VariableRef>(&v)) {
        auto it = values.find(ref->name);
        if (it == values.end()) throw InvalidArgument("variable \"" + ref->name + "\" used before assignment");
        return it->second;
      }
      throw InvalidArgument("argument \"" + std::string(kw) + "\" must be numeric");
    };
    const auto& unit_name = std::get<UnitRef>(*st.find("unit")).name;
    auto bound = units.find(unit_name);
    if (bound == units.end()) {
      throw InvalidArgument("line " + std::to_string(st.line) + ": unit \"" + unit_name + "\" is not bound");
    }
    const double u = hash_uniform(salt, bound->second);
    double result = 0.0;
    switch (st.builtin) {
      case Builtin::kUniformChoice: {
        const auto& choices = std::get<std::vector<double>>(*st.find("choices"));
        if (choices.empty()) throw InvalidArgument("line " + std::to_string(st.line) + ": choices is empty");
        auto idx = static_cast<std::size_t>(std::floor(u * static_cast<double>(choices.size())));
        result = choices[std::min(idx, choices.size() - 1)];
        break;
      }
      case Builtin::kBernoulliTrial: {
        double p = number("p");
        if (!(p >= 0.0 && p <= 1.0)) {
          throw InvalidArgument("line " + std::to_string(st.line) + ": p=" + format_double(p) + " outside [0, 1]");
        }
        result = u < p ? 1.0 : 0.0;
        break;
      }
      case Builtin::kRandomFloat: {
        double lo = number("min"), hi = number("max");
        result = lo + u * (hi - lo);
        break;
      }
    }
    values[st.variable] = result;
  }
  return values;
}

}  // namespace netexp::dsl
