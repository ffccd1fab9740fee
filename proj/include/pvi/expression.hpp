#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "pvi/error.hpp"

namespace pvi {

/// A compiled arithmetic expression in the variables x, y, t.
///
/// Grammar (whitespace ignored):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' unary)?            right associative
///   primary := number | 'x' | 'y' | 't' | 'pi' | 'e'
///            | name '(' expr (',' expr)* ')' | '(' expr ')'
/// Functions: sin cos tan exp log sqrt abs tanh floor (one argument),
/// pow atan2 (two), min max (two or more).
class Expression {
 public:
  Expression() : Expression(std::string("0")) {}

  explicit Expression(std::string source) : source_(std::move(source)) {
    pos_ = 0;
    eval_ = parse_expr();
    skip_space();
    if (pos_ != source_.size()) fail("unexpected '" + std::string(1, source_[pos_]) + "'");
  }

  double operator()(double x, double y, double t = 0.0) const { return eval_(Vars{x, y, t}); }
  const std::string& source() const { return source_; }

 private:
  struct Vars {
    double x, y, t;
  };
  using Node = std::function<double(const Vars&)>;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression '" + source_ + "': " + what + " at column " + std::to_string(pos_ + 1), 0, source_);
  }

  void skip_space() {
    while (pos_ < source_.size() && std::isspace(static_cast<unsigned char>(source_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < source_.size() && source_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Node parse_expr() {
    Node lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        Node rhs = parse_term();
        lhs = [lhs, rhs](const Vars& v) { return lhs(v) + rhs(v); };
      } else if (accept('-')) {
        Node rhs = parse_term();
        lhs = [lhs, rhs](const Vars& v) { return lhs(v) - rhs(v); };
      } else {
        return lhs;
      }
    }
  }

  Node parse_term() {
    Node lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        Node rhs = parse_unary();
        lhs = [lhs, rhs](const Vars& v) { return lhs(v) * rhs(v); };
      } else if (accept('/')) {
        Node rhs = parse_unary();
        lhs = [lhs, rhs](const Vars& v) { return lhs(v) / rhs(v); };
      } else {
        return lhs;
      }
    }
  }

  Node parse_unary() {
    if (accept('-')) {
      Node a = parse_unary();
      return [a](const Vars& v) { return -a(v); };
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Node parse_power() {
    Node base = parse_primary();
    if (accept('^')) {
      Node ex = parse_unary();
      return [base, ex](const Vars& v) { return std::pow(base(v), ex(v)); };
    }
    return base;
  }

  Node parse_primary() {
    skip_space();
    if (pos_ >= source_.size()) fail("unexpected end of input");
    const char c = source_[pos_];
    if (accept('(')) {
      Node inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = source_.c_str() + pos_;
      char* end = nullptr;
      const double value = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      return [value](const Vars&) { return value; };
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < source_.size() && (std::isalnum(static_cast<unsigned char>(source_[pos_])) || source_[pos_] == '_')) ++pos_;
      const std::string name = source_.substr(start, pos_ - start);
      skip_space();
      if (pos_ < source_.size() && source_[pos_] == '(') {
        ++pos_;
        std::vector<Node> args{parse_expr()};
        while (accept(',')) args.push_back(parse_expr());
        expect(')');
        return call(name, std::move(args));
      }
      if (name == "x") return [](const Vars& v) { return v.x; };
      if (name == "y") return [](const Vars& v) { return v.y; };
      if (name == "t") return [](const Vars& v) { return v.t; };
      if (name == "pi") return [](const Vars&) { return std::numbers::pi; };
      if (name == "e") return [](const Vars&) { return std::numbers::e; };
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Node call(const std::string& name, std::vector<Node> args) {
    using Fn1 = double (*)(double);
    static const std::vector<std::pair<std::string, Fn1>> unary = {
        {"sin", [](double a) { return std::sin(a); }},   {"cos", [](double a) { return std::cos(a); }},
        {"tan", [](double a) { return std::tan(a); }},   {"exp", [](double a) { return std::exp(a); }},
        {"log", [](double a) { return std::log(a); }},   {"sqrt", [](double a) { return std::sqrt(a); }},
        {"abs", [](double a) { return std::abs(a); }},   {"tanh", [](double a) { return std::tanh(a); }},
        {"floor", [](double a) { return std::floor(a); }}};
    for (const auto& [fname, fn] : unary)
      if (fname == name) {
        if (args.size() != 1) fail(name + " takes one argument");
        Node a = args[0];
        Fn1 f = fn;
        return [a, f](const Vars& v) { return f(a(v)); };
      }
    if (name == "pow" || name == "atan2") {
      if (args.size() != 2) fail(name + " takes two arguments");
      Node a = args[0], b = args[1];
      if (name == "pow") return [a, b](const Vars& v) { return std::pow(a(v), b(v)); };
      return [a, b](const Vars& v) { return std::atan2(a(v), b(v)); };
    }
    if (name == "min" || name == "max") {
      if (args.size() < 2) fail(name + " takes at least two arguments");
      const bool is_max = name == "max";
      return [args, is_max](const Vars& v) {
        double r = args[0](v);
        for (std::size_t i = 1; i < args.size(); ++i) r = is_max ? std::max(r, args[i](v)) : std::min(r, args[i](v));
        return r;
      };
    }
    fail("unknown function '" + name + "'");
  }

  std::string source_;
  std::size_t pos_ = 0;
  Node eval_;
};

}  // namespace pvi
