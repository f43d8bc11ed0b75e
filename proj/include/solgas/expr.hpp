#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"
#include "solgas/func.hpp"

namespace solgas {

// Small fixed expression grammar for config-defined kernels and family
// functions:
//
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | var | param | fn '(' expr [',' expr] ')' | '(' expr ')'
//   fn     := ln | exp | tanh | cosh | sinh | sqrt | abs | pow
//
// Variables are named at parse time ("mu","eta" for kernels, "eta" for
// single-argument functions); parameters resolve to constants from the
// kernel's parameter map. ASTs evaluate on any scalar of the dual tower.

class Expr {
 public:
  Expr() = default;

  static Expr parse(const std::string& src, const std::vector<std::string>& vars,
                    const std::map<std::string, double>& params = {}) {
    Parser p{src, 0, &vars, &params};
    NodePtr root = p.parse_expr();
    p.skip_ws();
    if (p.pos != src.size()) throw ConfigError("expression: trailing input at '" + src.substr(p.pos) + "'");
    Expr e;
    e.root_ = std::move(root);
    e.arity_ = static_cast<int>(vars.size());
    return e;
  }

  explicit operator bool() const { return static_cast<bool>(root_); }
  int arity() const { return arity_; }

  template <class T>
  T eval(std::span<const T> args) const {
    return eval_node(*root_, args);
  }

  template <class T>
  T eval1(const T& x) const {
    return eval(std::span<const T>(&x, 1));
  }

  template <class T>
  T eval2(const T& x, const T& y) const {
    const T a[2] = {x, y};
    return eval(std::span<const T>(a, 2));
  }

  /// Wrap as a type-erased single-argument function.
  AnyFn1 as_fn1() const {
    Expr self = *this;
    return AnyFn1([self](const auto& x) { return self.eval1(x); });
  }

  AnyFn2 as_fn2() const {
    Expr self = *this;
    return AnyFn2([self](const auto& x, const auto& y) { return self.eval2(x, y); });
  }

 private:
  enum class Op {
    kConst, kVar, kAdd, kSub, kMul, kDiv, kNeg, kPow,
    kLn, kExp, kTanh, kCosh, kSinh, kSqrt, kAbs,
  };

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  struct Node {
    Op op;
    double cval = 0.0;
    int var = -1;
    NodePtr a, b;
  };

  NodePtr root_;
  int arity_ = 0;

  template <class T>
  static T eval_node(const Node& n, std::span<const T> args) {
    switch (n.op) {
      case Op::kConst: return T{n.cval};
      case Op::kVar: return args[n.var];
      case Op::kAdd: return eval_node(*n.a, args) + eval_node(*n.b, args);
      case Op::kSub: return eval_node(*n.a, args) - eval_node(*n.b, args);
      case Op::kMul: return eval_node(*n.a, args) * eval_node(*n.b, args);
      case Op::kDiv: return eval_node(*n.a, args) / eval_node(*n.b, args);
      case Op::kNeg: return -eval_node(*n.a, args);
      case Op::kPow: {
        // Integer constant exponents go through repeated squaring so that
        // negative bases stay valid.
        T base = eval_node(*n.a, args);
        if (n.b->op == Op::kConst) {
          double e = n.b->cval;
          if (e == static_cast<long long>(e) && std::abs(e) <= 64) {
            long long k = static_cast<long long>(e);
            bool invert_result = k < 0;
            if (invert_result) k = -k;
            T acc{1.0};
            T sq = base;
            while (k > 0) {
              if (k & 1) acc = acc * sq;
              sq = sq * sq;
              k >>= 1;
            }
            return invert_result ? T{1.0} / acc : acc;
          }
          return pow(base, n.b->cval);
        }
        return pow(base, eval_node(*n.b, args));
      }
      case Op::kLn: return log(eval_node(*n.a, args));
      case Op::kExp: return exp(eval_node(*n.a, args));
      case Op::kTanh: return tanh(eval_node(*n.a, args));
      case Op::kCosh: return cosh(eval_node(*n.a, args));
      case Op::kSinh: return sinh(eval_node(*n.a, args));
      case Op::kSqrt: return sqrt(eval_node(*n.a, args));
      case Op::kAbs: return abs(eval_node(*n.a, args));
    }
    throw ConfigError("expression: corrupt node");
  }

  struct Parser {
    const std::string& s;
    size_t pos;
    const std::vector<std::string>* vars;
    const std::map<std::string, double>* params;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) { ++pos; return true; }
      return false;
    }
    [[noreturn]] void fail(const std::string& what) {
      throw ConfigError("expression: " + what + " near position " + std::to_string(pos) +
                        " in '" + s + "'");
    }

    static NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
      auto n = std::make_shared<Node>();
      n->op = op; n->a = std::move(a); n->b = std::move(b);
      return n;
    }
    static NodePtr make_const(double v) {
      auto n = std::make_shared<Node>();
      n->op = Op::kConst; n->cval = v;
      return n;
    }

    NodePtr parse_expr() {
      NodePtr lhs = parse_term();
      for (;;) {
        if (eat('+')) lhs = make(Op::kAdd, lhs, parse_term());
        else if (eat('-')) lhs = make(Op::kSub, lhs, parse_term());
        else return lhs;
      }
    }
    NodePtr parse_term() {
      NodePtr lhs = parse_unary();
      for (;;) {
        if (eat('*')) lhs = make(Op::kMul, lhs, parse_unary());
        else if (eat('/')) lhs = make(Op::kDiv, lhs, parse_unary());
        else return lhs;
      }
    }
    NodePtr parse_unary() {
      if (eat('-')) return make(Op::kNeg, parse_unary());
      return parse_power();
    }
    NodePtr parse_power() {
      NodePtr base = parse_atom();
      if (eat('^')) return make(Op::kPow, base, parse_unary());
      return base;
    }
    NodePtr parse_atom() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of input");
      char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        size_t len = 0;
        double v = std::stod(s.substr(pos), &len);
        pos += len;
        return make_const(v);
      }
      if (c == '(') {
        ++pos;
        NodePtr e = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return e;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
          ++pos;
        std::string name = s.substr(start, pos - start);
        skip_ws();
        bool is_call = pos < s.size() && s[pos] == '(';
        if (is_call) {
          Op op;
          if (name == "ln" || name == "log") op = Op::kLn;
          else if (name == "exp") op = Op::kExp;
          else if (name == "tanh") op = Op::kTanh;
          else if (name == "cosh") op = Op::kCosh;
          else if (name == "sinh") op = Op::kSinh;
          else if (name == "sqrt") op = Op::kSqrt;
          else if (name == "abs") op = Op::kAbs;
          else if (name == "pow") {
            ++pos;
            NodePtr a = parse_expr();
            if (!eat(',')) fail("pow: expected ','");
            NodePtr b = parse_expr();
            if (!eat(')')) fail("pow: expected ')'");
            return make(Op::kPow, a, b);
          } else {
            fail("unknown function '" + name + "'");
          }
          ++pos;
          NodePtr a = parse_expr();
          if (!eat(')')) fail(name + ": expected ')'");
          return make(op, a);
        }
        if (name == "pi") return make_const(3.14159265358979323846);
        for (size_t i = 0; i < vars->size(); ++i) {
          if ((*vars)[i] == name) {
            auto n = std::make_shared<Node>();
            n->op = Op::kVar;
            n->var = static_cast<int>(i);
            return n;
          }
        }
        auto it = params->find(name);
        if (it != params->end()) return make_const(it->second);
        fail("unknown identifier '" + name + "'");
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };
};

}  // namespace solgas
