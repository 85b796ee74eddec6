#pragma once

// Closed-form source expressions in x, y, z, t.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | primary
//   primary:= number | name | name '(' expr ')' | '(' expr ')'
//
// Names: x y z t, constants pi e, functions sin cos exp.

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "emdec/error.hpp"

namespace emdec {

class ExpressionError : public Error {
public:
  ExpressionError(std::size_t column, const std::string& what)
      : Error(ErrorKind::parse, "column " + std::to_string(column) + ": " + what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

class Expression {
public:
  Expression() : nodes_{Node{Op::number}}, text_("0") {}

  static Expression parse(std::string_view text) {
    Parser p{text, 0, {}};
    Expression e;
    e.nodes_.clear();
    e.text_.clear();
    p.nodes = &e.nodes_;
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    e.text_ = std::string(text);
    return e;
  }

  double operator()(double x, double y, double z, double t) const {
    const double vars[4] = {x, y, z, t};
    return eval(root_, vars);
  }

  const std::string& text() const noexcept { return text_; }

  // True when the expression is the literal constant zero.
  bool is_zero() const {
    const Node& n = nodes_[static_cast<std::size_t>(root_)];
    return n.op == Op::number && n.value == 0.0;
  }

private:
  enum class Op { number, var, neg, add, sub, mul, div, sin, cos, exp };
  struct Node {
    Op op;
    double value = 0.0;
    int var = 0;
    int a = -1, b = -1;
  };

  struct Parser {
    std::string_view s;
    std::size_t pos;
    std::vector<Node>* nodes;

    [[noreturn]] void fail(const std::string& what) const { throw ExpressionError(pos + 1, what); }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    int add(Node n) {
      nodes->push_back(n);
      return static_cast<int>(nodes->size()) - 1;
    }
    int expr() {
      int lhs = term();
      for (;;) {
        skip();
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
          const Op op = s[pos] == '+' ? Op::add : Op::sub;
          ++pos;
          lhs = add({op, 0.0, 0, lhs, term()});
        } else {
          return lhs;
        }
      }
    }
    int term() {
      int lhs = unary();
      for (;;) {
        skip();
        if (pos < s.size() && (s[pos] == '*' || s[pos] == '/')) {
          const Op op = s[pos] == '*' ? Op::mul : Op::div;
          ++pos;
          lhs = add({op, 0.0, 0, lhs, unary()});
        } else {
          return lhs;
        }
      }
    }
    int unary() {
      skip();
      if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        const bool neg = s[pos] == '-';
        ++pos;
        const int inner = unary();
        return neg ? add({Op::neg, 0.0, 0, inner, -1}) : inner;
      }
      return primary();
    }
    int primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end of expression");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        const int inner = expr();
        skip();
        if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
        ++pos;
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        double v = 0.0;
        auto res = std::from_chars(s.data() + pos, s.data() + s.size(), v);
        if (res.ec != std::errc()) fail("malformed number");
        pos = static_cast<std::size_t>(res.ptr - s.data());
        return add({Op::number, v});
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string_view name = s.substr(start, pos - start);
        if (name == "x") return add({Op::var, 0.0, 0});
        if (name == "y") return add({Op::var, 0.0, 1});
        if (name == "z") return add({Op::var, 0.0, 2});
        if (name == "t") return add({Op::var, 0.0, 3});
        if (name == "pi") return add({Op::number, std::numbers::pi});
        if (name == "e") return add({Op::number, std::numbers::e});
        Op fn;
        if (name == "sin") fn = Op::sin;
        else if (name == "cos") fn = Op::cos;
        else if (name == "exp") fn = Op::exp;
        else {
          pos = start;
          fail("unknown name '" + std::string(name) + "'");
        }
        skip();
        if (pos >= s.size() || s[pos] != '(') fail("expected '(' after " + std::string(name));
        ++pos;
        const int arg = expr();
        skip();
        if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
        ++pos;
        return add({fn, 0.0, 0, arg, -1});
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  double eval(int i, const double* vars) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::number: return n.value;
      case Op::var: return vars[n.var];
      case Op::neg: return -eval(n.a, vars);
      case Op::add: return eval(n.a, vars) + eval(n.b, vars);
      case Op::sub: return eval(n.a, vars) - eval(n.b, vars);
      case Op::mul: return eval(n.a, vars) * eval(n.b, vars);
      case Op::div: return eval(n.a, vars) / eval(n.b, vars);
      case Op::sin: return std::sin(eval(n.a, vars));
      case Op::cos: return std::cos(eval(n.a, vars));
      case Op::exp: return std::exp(eval(n.a, vars));
    }
    return 0.0;
  }

  std::vector<Node> nodes_;
  int root_ = 0;
  std::string text_;
};

} // namespace emdec
