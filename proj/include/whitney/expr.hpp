#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "whitney/error.hpp"
#include "whitney/jet.hpp"

namespace whitney {

class UnknownIdentifier : public SyntaxError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t position)
      : SyntaxError("unknown identifier '" + name + "'", position), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

enum class Op { Num, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Log, Sqrt, Tanh };

struct Node {
  Op op;
  double value = 0.0;
  std::vector<std::shared_ptr<const Node>> args;
};

using NodePtr = std::shared_ptr<const Node>;

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Num: return "Num";
    case Op::Var: return "Var";
    case Op::Neg: return "Neg";
    case Op::Add: return "Add";
    case Op::Sub: return "Sub";
    case Op::Mul: return "Mul";
    case Op::Div: return "Div";
    case Op::Pow: return "Pow";
    case Op::Sin: return "Sin";
    case Op::Cos: return "Cos";
    case Op::Exp: return "Exp";
    case Op::Log: return "Log";
    case Op::Sqrt: return "Sqrt";
    case Op::Tanh: return "Tanh";
  }
  return "?";
}

inline bool is_constant(const Node& n) {
  if (n.op == Op::Var) return false;
  for (const auto& a : n.args)
    if (!is_constant(*a)) return false;
  return true;
}

// Straight-line program over normalized Taylor coefficients, one slot per instruction.
struct Instr {
  enum Kind { Num, Var, Neg, Add, Sub, Mul, Div, PowInt, PowReal, PowGeneral, Sin, Cos, Exp, Log, Sqrt, Tanh };
  Kind kind;
  int a = -1;
  int b = -1;
  double value = 0.0;
  long exponent = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : s_(src) {}

  NodePtr parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError("syntax error: " + what, pos_); }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r'))
      ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static NodePtr make(Op op, std::vector<NodePtr> args, double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = value;
    n->args = std::move(args);
    return n;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Op::Add, {lhs, term()});
      else if (accept('-')) lhs = make(Op::Sub, {lhs, term()});
      else return lhs;
    }
  }
  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Op::Mul, {lhs, unary()});
      else if (accept('/')) lhs = make(Op::Div, {lhs, unary()});
      else return lhs;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Op::Pow, {base, unary()});
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (is_alpha(c)) return identifier();
    fail("unexpected character");
  }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && is_digit(s_[pos_])) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && is_digit(s_[pos_])) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && is_digit(s_[p])) {
        pos_ = p;
        while (pos_ < s_.size() && is_digit(s_[pos_])) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return make(Op::Num, {}, v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (is_alpha(s_[pos_]) || is_digit(s_[pos_]))) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name == "t") return make(Op::Var, {});
    if (name == "pi") return make(Op::Num, {}, std::numbers::pi);
    Op op;
    if (name == "sin") op = Op::Sin;
    else if (name == "cos") op = Op::Cos;
    else if (name == "exp") op = Op::Exp;
    else if (name == "log") op = Op::Log;
    else if (name == "sqrt") op = Op::Sqrt;
    else if (name == "tanh") op = Op::Tanh;
    else throw UnknownIdentifier(name, start);
    if (!accept('(')) fail("expected '(' after function name");
    auto arg = expr();
    if (!accept(')')) fail("expected ')'");
    return make(op, {arg});
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Immutable parsed expression in the variable t, with a compiled Taylor-mode program.
class Expr {
 public:
  Expr() : Expr(constant_node(0.0)) {}
  explicit Expr(NodePtr root) : root_(std::move(root)), program_(std::make_shared<Program>()) {
    program_->result = compile(*root_);
  }

  static Expr parse(std::string_view source) {
    Expr e(detail::Parser(source).parse());
    e.source_ = std::string(source);
    return e;
  }
  static Expr constant(double v) { return Expr(constant_node(v)); }

  const Node& root() const { return *root_; }
  const std::string& source() const { return source_; }
  bool is_constant() const { return detail::is_constant(*root_); }

  std::size_t node_count() const { return count(*root_); }
  std::string to_string() const { return render(*root_); }

  Jet jet(double t, int m, int order_cap = kDefaultOrderCap) const {
    if (m < 0) throw InvalidArgument("negative jet order");
    if (m > order_cap) throw OrderOverflow("jet order " + std::to_string(m) + " exceeds cap " + std::to_string(order_cap));
    const auto& prog = program_->code;
    const int w = m + 1;
    thread_local std::vector<double> slots;
    thread_local std::vector<double> scratch;
    slots.assign(prog.size() * w, 0.0);
    scratch.assign(3 * w, 0.0);
    for (std::size_t i = 0; i < prog.size(); ++i) {
      const auto& in = prog[i];
      double* out = &slots[i * w];
      const double* a = in.a >= 0 ? &slots[in.a * w] : nullptr;
      const double* b = in.b >= 0 ? &slots[in.b * w] : nullptr;
      using K = detail::Instr;
      switch (in.kind) {
        case K::Num: out[0] = in.value; break;
        case K::Var:
          out[0] = t;
          if (m >= 1) out[1] = 1.0;
          break;
        case K::Neg:
          for (int k = 0; k < w; ++k) out[k] = -a[k];
          break;
        case K::Add:
          for (int k = 0; k < w; ++k) out[k] = a[k] + b[k];
          break;
        case K::Sub:
          for (int k = 0; k < w; ++k) out[k] = a[k] - b[k];
          break;
        case K::Mul: taylor::mul(a, b, out, m); break;
        case K::Div: taylor::div(a, b, out, m); break;
        case K::PowInt: taylor::pow_int(a, in.exponent, out, &scratch[0], &scratch[w], m); break;
        case K::PowReal: taylor::pow_real(a, in.value, out, m); break;
        case K::PowGeneral:
          taylor::log(a, &scratch[0], m);
          taylor::mul(&scratch[0], b, &scratch[w], m);
          taylor::exp(&scratch[w], out, m);
          break;
        case K::Sin: taylor::sincos(a, out, &scratch[0], m); break;
        case K::Cos: taylor::sincos(a, &scratch[0], out, m); break;
        case K::Exp: taylor::exp(a, out, m); break;
        case K::Log: taylor::log(a, out, m); break;
        case K::Sqrt: taylor::sqrt(a, out, m); break;
        case K::Tanh: taylor::tanh(a, out, &scratch[0], m); break;
      }
    }
    Jet result(m);
    taylor::to_derivatives(&slots[program_->result * w], result.data(), m);
    if (!result.all_finite()) throw DomainError("non-finite jet at t = " + detail::format_number(t));
    return result;
  }

  double operator()(double t) const { return jet(t, 0)[0]; }

 private:
  struct Program {
    std::vector<detail::Instr> code;
    int result = 0;
  };

  static NodePtr constant_node(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Num;
    n->value = v;
    return n;
  }

  static std::size_t count(const Node& n) {
    std::size_t c = 1;
    for (const auto& a : n.args) c += count(*a);
    return c;
  }

  static std::string render(const Node& n) {
    if (n.op == Op::Num) return detail::format_number(n.value);
    if (n.op == Op::Var) return "Var";
    std::string s = detail::op_name(n.op);
    s += '(';
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      if (i) s += ", ";
      s += render(*n.args[i]);
    }
    return s + ')';
  }

  int emit(detail::Instr in) {
    program_->code.push_back(in);
    return static_cast<int>(program_->code.size()) - 1;
  }

  int compile(const Node& n) {
    using K = detail::Instr;
    switch (n.op) {
      case Op::Num: return emit({K::Num, -1, -1, n.value, 0});
      case Op::Var: return emit({K::Var});
      case Op::Neg: return emit({K::Neg, compile(*n.args[0])});
      case Op::Add: {
        int a = compile(*n.args[0]);
        return emit({K::Add, a, compile(*n.args[1])});
      }
      case Op::Sub: {
        int a = compile(*n.args[0]);
        return emit({K::Sub, a, compile(*n.args[1])});
      }
      case Op::Mul: {
        int a = compile(*n.args[0]);
        return emit({K::Mul, a, compile(*n.args[1])});
      }
      case Op::Div: {
        int a = compile(*n.args[0]);
        return emit({K::Div, a, compile(*n.args[1])});
      }
      case Op::Pow: {
        int a = compile(*n.args[0]);
        const Node& e = *n.args[1];
        if (detail::is_constant(e)) {
          const double p = Expr(n.args[1]).jet(0.0, 0)[0];
          if (p == std::trunc(p) && std::abs(p) <= 1e9) return emit({K::PowInt, a, -1, p, static_cast<long>(p)});
          return emit({K::PowReal, a, -1, p, 0});
        }
        return emit({K::PowGeneral, a, compile(e)});
      }
      case Op::Sin: return emit({K::Sin, compile(*n.args[0])});
      case Op::Cos: return emit({K::Cos, compile(*n.args[0])});
      case Op::Exp: return emit({K::Exp, compile(*n.args[0])});
      case Op::Log: return emit({K::Log, compile(*n.args[0])});
      case Op::Sqrt: return emit({K::Sqrt, compile(*n.args[0])});
      case Op::Tanh: return emit({K::Tanh, compile(*n.args[0])});
    }
    throw InvalidArgument("bad expression node");
  }

  NodePtr root_;
  std::shared_ptr<Program> program_;
  std::string source_;
};

inline Expr parse_expr(std::string_view source) { return Expr::parse(source); }

inline Jet eval_jet(const Expr& f, double t, int m) { return f.jet(t, m); }

// Parses a constant expression such as "pi/2"; "inf" and "-inf" are accepted.
inline double parse_constant(std::string_view text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  Expr e = Expr::parse(text);
  if (!e.is_constant()) throw InvalidArgument("expected a constant, got '" + std::string(text) + "'");
  return e(0.0);
}

}  // namespace whitney
