#pragma once

// One-variable expressions: parse, evaluate, print and differentiate.
//
// Grammar (see docs/expression-grammar.md):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'x' | 'pi' | 'e' | name '(' expr ')' | '(' expr ')'

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "diffcert/error.hpp"

namespace diffcert {

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Ln,
  Sqrt,
  Abs,
  Sign,
  Asin,
  Atan,
  DAbs,   // derivative of abs: sign(u), undefined at u == 0
  DSign,  // derivative of sign: 0, undefined at u == 0
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  NodePtr lhs;
  NodePtr rhs;
};

inline bool is_unary(Op op) { return op >= Op::Neg && op <= Op::DSign; }
inline bool is_binary(Op op) { return op >= Op::Add; }

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Sign: return "sign";
    case Op::Asin: return "asin";
    case Op::Atan: return "atan";
    case Op::DAbs: return "dabs";
    case Op::DSign: return "dsign";
    default: return nullptr;
  }
}

inline bool lookup_function(std::string_view name, Op& op) {
  struct Entry {
    std::string_view name;
    Op op;
  };
  static constexpr std::array<Entry, 16> table{{
      {"sin", Op::Sin},     {"cos", Op::Cos},       {"tan", Op::Tan},   {"exp", Op::Exp},
      {"ln", Op::Ln},       {"log", Op::Ln},        {"sqrt", Op::Sqrt}, {"abs", Op::Abs},
      {"sign", Op::Sign},   {"asin", Op::Asin},     {"arcsin", Op::Asin}, {"atan", Op::Atan},
      {"arctan", Op::Atan}, {"dabs", Op::DAbs},     {"dsign", Op::DSign}, {"sgn", Op::Sign},
  }};
  for (const auto& e : table) {
    if (e.name == name) {
      op = e.op;
      return true;
    }
  }
  return false;
}

inline std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Precedence used by the printer: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom.
inline int precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return n.value < 0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

inline void print_node(const Node& n, std::string& out);

inline void print_wrapped(const Node& n, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print_node(n, out);
  if (wrap) out += ')';
}

inline void print_node(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::Const: out += format_number(n.value); return;
    case Op::Var: out += 'x'; return;
    case Op::Neg:
      out += '-';
      print_wrapped(*n.lhs, precedence(*n.lhs) < 4, out);
      return;
    case Op::Add:
    case Op::Sub:
      print_wrapped(*n.lhs, false, out);
      out += n.op == Op::Add ? " + " : " - ";
      print_wrapped(*n.rhs, precedence(*n.rhs) <= 1 || (precedence(*n.rhs) == 3), out);
      return;
    case Op::Mul:
    case Op::Div:
      print_wrapped(*n.lhs, precedence(*n.lhs) < 2, out);
      out += n.op == Op::Mul ? "*" : "/";
      print_wrapped(*n.rhs, precedence(*n.rhs) <= 3, out);
      return;
    case Op::Pow:
      print_wrapped(*n.lhs, precedence(*n.lhs) <= 4, out);
      out += '^';
      print_wrapped(*n.rhs, precedence(*n.rhs) < 3, out);
      return;
    default:
      out += function_name(n.op);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
  }
}

inline std::string node_string(const Node& n) {
  std::string s;
  print_node(n, s);
  return s;
}

inline bool is_integer_value(double v) { return std::isfinite(v) && v == std::nearbyint(v) && std::fabs(v) < 1e9; }

[[noreturn]] inline void domain_error(const Node& n, double x, const std::string& what) {
  const std::string repr = node_string(n);
  throw EvalError(repr, x, "domain error in '" + repr + "' at x = " + format_number(x) + ": " + what);
}

// Applies a unary operator; `origin` is only used for error messages.
inline double apply_unary(Op op, double u, const Node& origin, double x) {
  switch (op) {
    case Op::Neg: return -u;
    case Op::Sin: return std::sin(u);
    case Op::Cos: return std::cos(u);
    case Op::Tan: return std::tan(u);
    case Op::Exp: return std::exp(u);
    case Op::Ln:
      if (!(u > 0.0)) domain_error(origin, x, "argument " + format_number(u) + " is not positive");
      return std::log(u);
    case Op::Sqrt:
      if (u < 0.0) domain_error(origin, x, "argument " + format_number(u) + " is negative");
      return std::sqrt(u);
    case Op::Abs: return std::fabs(u);
    case Op::Sign: return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    case Op::Asin:
      if (u < -1.0 || u > 1.0) domain_error(origin, x, "argument " + format_number(u) + " outside [-1, 1]");
      return std::asin(u);
    case Op::Atan: return std::atan(u);
    case Op::DAbs:
      if (u == 0.0) domain_error(origin, x, "derivative of abs is undefined at its kink");
      return u > 0.0 ? 1.0 : -1.0;
    case Op::DSign:
      if (u == 0.0) domain_error(origin, x, "derivative of sign is undefined at its jump");
      return 0.0;
    default: return 0.0;
  }
}

inline double apply_binary(Op op, double l, double r, bool int_pow, const Node& origin, double x) {
  switch (op) {
    case Op::Add: return l + r;
    case Op::Sub: return l - r;
    case Op::Mul: return l * r;
    case Op::Div:
      if (r == 0.0) domain_error(origin, x, "division by zero");
      return l / r;
    case Op::Pow:
      if (int_pow) {
        if (l == 0.0 && r < 0.0) domain_error(origin, x, "zero raised to a negative power");
        return std::pow(l, r);
      }
      if (l < 0.0) domain_error(origin, x, "negative base " + format_number(l) + " with non-integer exponent");
      if (l == 0.0 && r < 0.0) domain_error(origin, x, "zero raised to a negative power");
      return std::pow(l, r);
    default: return 0.0;
  }
}

struct Instr {
  Op op;
  bool int_pow;
  double value;
  const Node* origin;
};

struct Program {
  std::vector<Instr> code;
  std::size_t depth = 0;
};

inline void compile(const Node& n, Program& p, std::size_t& cur) {
  if (n.op == Op::Const || n.op == Op::Var) {
    p.code.push_back({n.op, false, n.value, &n});
    ++cur;
  } else if (is_unary(n.op)) {
    compile(*n.lhs, p, cur);
    p.code.push_back({n.op, false, 0.0, &n});
  } else {
    compile(*n.lhs, p, cur);
    compile(*n.rhs, p, cur);
    const bool ip = n.op == Op::Pow && n.rhs->op == Op::Const && is_integer_value(n.rhs->value);
    p.code.push_back({n.op, ip, 0.0, &n});
    --cur;
  }
  if (cur > p.depth) p.depth = cur;
}

}  // namespace detail

/// Immutable expression in the single variable `x`.  Copies share structure;
/// evaluation is thread-safe.
class Expr {
 public:
  Expr() : Expr(make_constant(0.0)) {}

  static Expr constant(double v) { return Expr(make_constant(v)); }
  static Expr variable() {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Var;
    return Expr(std::move(n));
  }

  static Expr unary(Op op, const Expr& u);
  static Expr binary(Op op, const Expr& l, const Expr& r);

  /// Value at x; throws EvalError outside the domain or on overflow.
  double operator()(double x) const {
    const auto& code = program_->code;
    if (program_->depth <= 48) {
      std::array<double, 48> stack;
      return run(code, stack.data(), x);
    }
    std::vector<double> stack(program_->depth);
    return run(code, stack.data(), x);
  }

  bool is_constant() const { return root_->op == Op::Const; }
  double constant_value() const { return root_->value; }
  Op op() const { return root_->op; }
  Expr lhs() const { return Expr(root_->lhs); }
  Expr rhs() const { return Expr(root_->rhs); }

  std::string str() const { return detail::node_string(*root_); }

  const detail::Node& node() const { return *root_; }

 private:
  explicit Expr(detail::NodePtr root) : root_(std::move(root)) {
    auto p = std::make_shared<detail::Program>();
    std::size_t cur = 0;
    detail::compile(*root_, *p, cur);
    program_ = std::move(p);
  }

  static detail::NodePtr make_constant(double v) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
  }

  static double run(const std::vector<detail::Instr>& code, double* stack, double x) {
    std::size_t sp = 0;
    for (const auto& ins : code) {
      switch (ins.op) {
        case Op::Const: stack[sp++] = ins.value; break;
        case Op::Var: stack[sp++] = x; break;
        default:
          if (detail::is_unary(ins.op)) {
            stack[sp - 1] = detail::apply_unary(ins.op, stack[sp - 1], *ins.origin, x);
          } else {
            --sp;
            stack[sp - 1] = detail::apply_binary(ins.op, stack[sp - 1], stack[sp], ins.int_pow, *ins.origin, x);
          }
          if (!std::isfinite(stack[sp - 1])) detail::domain_error(*ins.origin, x, "result is not finite");
      }
    }
    return stack[0];
  }

  detail::NodePtr root_;
  std::shared_ptr<const detail::Program> program_;
};

inline Expr Expr::unary(Op op, const Expr& u) {
  if (u.is_constant() && op != Op::DAbs && op != Op::DSign) {
    const double v = u.constant_value();
    bool ok = std::isfinite(v);
    double r = 0.0;
    if (ok) {
      try {
        r = detail::apply_unary(op, v, u.node(), 0.0);
        ok = std::isfinite(r);
      } catch (const EvalError&) {
        ok = false;
      }
    }
    if (ok) return constant(r);
  }
  if (op == Op::Neg && u.op() == Op::Neg) return u.lhs();
  auto n = std::make_shared<detail::Node>();
  n->op = op;
  n->lhs = u.root_;
  return Expr(std::move(n));
}

inline Expr Expr::binary(Op op, const Expr& l, const Expr& r) {
  if (l.is_constant() && r.is_constant()) {
    const bool ip = op == Op::Pow && detail::is_integer_value(r.constant_value());
    try {
      const double v = detail::apply_binary(op, l.constant_value(), r.constant_value(), ip, l.node(), 0.0);
      if (std::isfinite(v)) return constant(v);
    } catch (const EvalError&) {
    }
  }
  // Identities that never shrink the domain of definition.
  auto is = [](const Expr& e, double v) { return e.is_constant() && e.constant_value() == v; };
  switch (op) {
    case Op::Add:
      if (is(l, 0.0)) return r;
      if (is(r, 0.0)) return l;
      break;
    case Op::Sub:
      if (is(r, 0.0)) return l;
      if (is(l, 0.0)) return unary(Op::Neg, r);
      break;
    case Op::Mul:
      if (is(l, 0.0) || is(r, 0.0)) return constant(0.0);
      if (is(l, 1.0)) return r;
      if (is(r, 1.0)) return l;
      if (is(l, -1.0)) return unary(Op::Neg, r);
      if (is(r, -1.0)) return unary(Op::Neg, l);
      break;
    case Op::Div:
      if (is(r, 1.0)) return l;
      break;
    case Op::Pow:
      if (is(r, 1.0)) return l;
      break;
    default: break;
  }
  auto n = std::make_shared<detail::Node>();
  n->op = op;
  n->lhs = l.root_;
  n->rhs = r.root_;
  return Expr(std::move(n));
}

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Op::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(Op::Div, a, b); }
inline Expr operator-(const Expr& a) { return Expr::unary(Op::Neg, a); }
inline Expr pow(const Expr& a, const Expr& b) { return Expr::binary(Op::Pow, a, b); }
inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }

inline double eval(const Expr& e, double x) { return e(x); }
inline std::string print(const Expr& e) { return e.str(); }

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expression");
    Expr e = expression();
    skip_ws();
    if (pos_ < text_.size()) fail("operator or end of input");
    return e;
  }

 private:
  Expr expression() {
    Expr lhs = term();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-')) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary_expr();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        lhs = lhs * unary_expr();
      } else if (accept('/')) {
        lhs = lhs / unary_expr();
      } else {
        return lhs;
      }
    }
  }

  Expr unary_expr() {
    skip_ws();
    if (accept('-')) return -unary_expr();
    if (accept('+')) return unary_expr();
    return power();
  }

  Expr power() {
    Expr base = primary();
    skip_ws();
    if (accept('^')) return pow(base, unary_expr());
    return base;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("number, identifier or '('");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (accept('(')) {
      Expr e = expression();
      skip_ws();
      if (!accept(')')) fail("')'");
      return e;
    }
    fail("number, identifier or '('");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    const std::string token(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || token == ".") {
      pos_ = start;
      fail("number");
    }
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return Expr::variable();
    if (name == "pi") return Expr::constant(std::numbers::pi);
    if (name == "e") return Expr::constant(std::numbers::e);
    Op op{};
    if (!lookup_function(name, op)) {
      throw ParseError(start, "identifier",
                       "unknown identifier '" + std::string(name) + "' at offset " + std::to_string(start));
    }
    skip_ws();
    if (!accept('(')) fail("'('");
    Expr arg = expression();
    skip_ws();
    if (!accept(')')) fail("')'");
    return Expr::unary(op, arg);
  }

  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& expected) {
    std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    throw ParseError(pos_, expected,
                     "syntax error at offset " + std::to_string(pos_) + ": expected " + expected + ", found " + found);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses an infix expression in `x`.  Throws ParseError with the byte offset
/// of the offending token.
inline Expr parse(std::string_view text) { return detail::Parser(text).parse(); }

/// Exact symbolic derivative with respect to x.  Only constant folding and
/// trivial identities are applied to the result.
inline Expr differentiate(const Expr& e) {
  const Expr one = Expr::constant(1.0);
  switch (e.op()) {
    case Op::Const: return Expr::constant(0.0);
    case Op::Var: return one;
    case Op::Add: return differentiate(e.lhs()) + differentiate(e.rhs());
    case Op::Sub: return differentiate(e.lhs()) - differentiate(e.rhs());
    case Op::Mul: {
      const Expr u = e.lhs(), v = e.rhs();
      return differentiate(u) * v + u * differentiate(v);
    }
    case Op::Div: {
      const Expr u = e.lhs(), v = e.rhs();
      const Expr du = differentiate(u), dv = differentiate(v);
      if (dv.is_constant() && dv.constant_value() == 0.0) return du / v;
      return (du * v - u * dv) / (v * v);
    }
    case Op::Pow: {
      const Expr u = e.lhs(), v = e.rhs();
      if (v.is_constant()) {
        const double c = v.constant_value();
        return Expr::constant(c) * pow(u, Expr::constant(c - 1.0)) * differentiate(u);
      }
      return e * (differentiate(v) * Expr::unary(Op::Ln, u) + v * differentiate(u) / u);
    }
    default: break;
  }
  const Expr u = e.lhs();
  const Expr du = differentiate(u);
  switch (e.op()) {
    case Op::Neg: return -du;
    case Op::Sin: return Expr::unary(Op::Cos, u) * du;
    case Op::Cos: return -(Expr::unary(Op::Sin, u) * du);
    case Op::Tan: {
      const Expr c = Expr::unary(Op::Cos, u);
      return du / (c * c);
    }
    case Op::Exp: return e * du;
    case Op::Ln: return du / u;
    case Op::Sqrt: return du / (Expr::constant(2.0) * e);
    case Op::Abs: return Expr::unary(Op::DAbs, u) * du;
    case Op::Sign:
    case Op::DAbs:
    case Op::DSign: return Expr::unary(Op::DSign, u) * du;
    case Op::Asin: return du / Expr::unary(Op::Sqrt, one - u * u);
    case Op::Atan: return du / (one + u * u);
    default: return Expr::constant(0.0);
  }
}

}  // namespace diffcert
