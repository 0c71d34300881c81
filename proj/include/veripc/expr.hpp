#pragma once

// Expression language for plant dynamics: parser, evaluator, symbolic
// differentiation, and a compiled stack-machine form for tight simulation
// loops. Trees are immutable after construction and safe to share.

#include <Eigen/Dense>

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace veripc::expr {

struct SyntaxError : Error {
  SyntaxError(std::size_t pos, const std::string& message)
      : Error("syntax error at " + std::to_string(pos) + ": " + message),
        position(pos) {}
  std::size_t position;
};

struct UnknownSymbol : Error {
  explicit UnknownSymbol(const std::string& n)
      : Error("unknown symbol: " + n), name(n) {}
  std::string name;
};

struct EvalError : Error {
  enum class Kind { DomainViolation, MissingVar };
  EvalError(Kind k, const std::string& message) : Error(message), kind(k) {}
  Kind kind;
};

struct UnsupportedOp : Error {
  using Error::Error;
};

enum class UnaryOp { Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Constant, Var, Unary, Binary };
  Kind kind = Kind::Constant;
  double value = 0.0;   // Constant
  std::string name;     // Var
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  NodePtr a, b;
};

class Expression {
 public:
  Expression() = default;
  explicit Expression(NodePtr root) : root_(std::move(root)) {}
  const NodePtr& root() const { return root_; }
  bool valid() const { return root_ != nullptr; }

 private:
  NodePtr root_;
};

struct SymbolTable {
  int state_dim = 0;
  int input_dim = 0;
  std::vector<std::string> params;

  // Classifies a name as state/input (1-based suffix) or declared parameter.
  enum class Kind { State, Input, Param, Unknown };
  std::pair<Kind, int> lookup(const std::string& name) const {
    const auto suffix_index = [&](char prefix, int limit) -> int {
      if (name.size() < 2 || name[0] != prefix) return -1;
      int idx = 0;
      auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (ec != std::errc() || p != name.data() + name.size()) return -1;
      if (idx < 1 || idx > limit) return -1;
      return idx - 1;
    };
    if (int i = suffix_index('x', state_dim); i >= 0) return {Kind::State, i};
    if (int i = suffix_index('u', input_dim); i >= 0) return {Kind::Input, i};
    for (const auto& p : params)
      if (p == name) return {Kind::Param, 0};
    return {Kind::Unknown, 0};
  }
};

namespace detail {

inline NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Constant;
  n->value = v;
  return n;
}

inline NodePtr variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Var;
  n->name = std::move(name);
  return n;
}

inline bool is_const(const NodePtr& e, double v) {
  return e->kind == Node::Kind::Constant && e->value == v;
}

inline NodePtr unary(UnaryOp op, NodePtr a) {
  if (a->kind == Node::Kind::Constant) {
    const double v = a->value;
    switch (op) {
      case UnaryOp::Neg: return constant(-v);
      case UnaryOp::Sin: return constant(std::sin(v));
      case UnaryOp::Cos: return constant(std::cos(v));
      case UnaryOp::Tan: return constant(std::tan(v));
      case UnaryOp::Exp: return constant(std::exp(v));
      case UnaryOp::Log: break;  // keep domain violations for evaluation
      case UnaryOp::Sqrt: break;
      case UnaryOp::Abs: return constant(std::abs(v));
    }
  }
  if (op == UnaryOp::Neg && a->kind == Node::Kind::Unary && a->uop == UnaryOp::Neg)
    return a->a;
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Unary;
  n->uop = op;
  n->a = std::move(a);
  return n;
}

inline NodePtr binary(BinaryOp op, NodePtr a, NodePtr b) {
  const bool ca = a->kind == Node::Kind::Constant;
  const bool cb = b->kind == Node::Kind::Constant;
  switch (op) {
    case BinaryOp::Add:
      if (is_const(a, 0)) return b;
      if (is_const(b, 0)) return a;
      if (ca && cb) return constant(a->value + b->value);
      break;
    case BinaryOp::Sub:
      if (is_const(b, 0)) return a;
      if (ca && cb) return constant(a->value - b->value);
      if (is_const(a, 0)) return unary(UnaryOp::Neg, std::move(b));
      break;
    case BinaryOp::Mul:
      if (is_const(a, 0) || is_const(b, 0)) return constant(0);
      if (is_const(a, 1)) return b;
      if (is_const(b, 1)) return a;
      if (ca && cb) return constant(a->value * b->value);
      break;
    case BinaryOp::Div:
      if (is_const(a, 0) && !is_const(b, 0)) return constant(0);
      if (is_const(b, 1)) return a;
      if (ca && cb && b->value != 0) return constant(a->value / b->value);
      break;
    case BinaryOp::Pow:
      if (is_const(b, 1)) return a;
      if (is_const(b, 0)) return constant(1);
      if (ca && cb) return constant(std::pow(a->value, b->value));
      break;
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Binary;
  n->bop = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

struct Token {
  enum class Kind { Number, Ident, Op, End } kind = Kind::End;
  double value = 0.0;
  std::string text;
  char op = 0;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : s_(text) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    tok_ = Token{};
    tok_.pos = i_;
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
      if (ec != std::errc()) throw SyntaxError(i_, "bad numeric literal");
      tok_.kind = Token::Kind::Number;
      tok_.value = v;
      i_ = static_cast<std::size_t>(p - s_.data());
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
        ++j;
      tok_.kind = Token::Kind::Ident;
      tok_.text = s_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    if (std::string("+-*/^()").find(c) != std::string::npos) {
      tok_.kind = Token::Kind::Op;
      tok_.op = c;
      ++i_;
      return;
    }
    throw SyntaxError(i_, std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t i_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(const std::string& text, const SymbolTable& symbols)
      : lex_(text), symbols_(symbols) {}

  NodePtr parse_expression() {
    NodePtr lhs = parse_term();
    while (lex_.peek().kind == Token::Kind::Op &&
           (lex_.peek().op == '+' || lex_.peek().op == '-')) {
      const char op = lex_.take().op;
      lhs = binary(op == '+' ? BinaryOp::Add : BinaryOp::Sub, std::move(lhs),
                   parse_term());
    }
    return lhs;
  }

  void expect_end() {
    if (lex_.peek().kind != Token::Kind::End)
      throw SyntaxError(lex_.peek().pos, "trailing input");
  }

 private:
  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (lex_.peek().kind == Token::Kind::Op &&
           (lex_.peek().op == '*' || lex_.peek().op == '/')) {
      const char op = lex_.take().op;
      lhs = binary(op == '*' ? BinaryOp::Mul : BinaryOp::Div, std::move(lhs),
                   parse_unary());
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (lex_.peek().kind == Token::Kind::Op && lex_.peek().op == '-') {
      lex_.take();
      return unary(UnaryOp::Neg, parse_unary());
    }
    if (lex_.peek().kind == Token::Kind::Op && lex_.peek().op == '+') {
      lex_.take();
      return parse_unary();
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (lex_.peek().kind == Token::Kind::Op && lex_.peek().op == '^') {
      const std::size_t at = lex_.take().pos;
      NodePtr exponent = parse_unary();
      if (exponent->kind != Node::Kind::Constant)
        throw SyntaxError(at, "exponent must be a constant");
      return binary(BinaryOp::Pow, std::move(base), std::move(exponent));
    }
    return base;
  }

  NodePtr parse_atom() {
    Token t = lex_.take();
    if (t.kind == Token::Kind::Number) return constant(t.value);
    if (t.kind == Token::Kind::Op && t.op == '(') {
      NodePtr inner = parse_expression();
      Token close = lex_.take();
      if (close.kind != Token::Kind::Op || close.op != ')')
        throw SyntaxError(close.pos, "expected ')'");
      return inner;
    }
    if (t.kind == Token::Kind::Ident) {
      static const std::map<std::string, UnaryOp> funcs = {
          {"sin", UnaryOp::Sin}, {"cos", UnaryOp::Cos},   {"tan", UnaryOp::Tan},
          {"exp", UnaryOp::Exp}, {"log", UnaryOp::Log},   {"sqrt", UnaryOp::Sqrt},
          {"abs", UnaryOp::Abs}};
      if (lex_.peek().kind == Token::Kind::Op && lex_.peek().op == '(') {
        auto it = funcs.find(t.text);
        if (it == funcs.end()) throw SyntaxError(t.pos, "unknown function " + t.text);
        lex_.take();
        NodePtr arg = parse_expression();
        Token close = lex_.take();
        if (close.kind != Token::Kind::Op || close.op != ')')
          throw SyntaxError(close.pos, "expected ')'");
        return unary(it->second, std::move(arg));
      }
      if (symbols_.lookup(t.text).first == SymbolTable::Kind::Unknown)
        throw UnknownSymbol(t.text);
      return variable(t.text);
    }
    throw SyntaxError(t.pos, "expected a value");
  }

  Lexer lex_;
  const SymbolTable& symbols_;
};

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

inline int precedence(const NodePtr& e) {
  switch (e->kind) {
    case Node::Kind::Constant:
      return e->value < 0 ? 3 : 5;
    case Node::Kind::Var:
      return 5;
    case Node::Kind::Unary:
      return e->uop == UnaryOp::Neg ? 3 : 5;
    case Node::Kind::Binary:
      switch (e->bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
      }
  }
  return 5;
}

inline std::string print(const NodePtr& e);

inline std::string print_child(const NodePtr& child, int parent_prec, bool tighten) {
  const int p = precedence(child);
  if (p < parent_prec || (tighten && p == parent_prec))
    return "(" + print(child) + ")";
  return print(child);
}

inline std::string print(const NodePtr& e) {
  switch (e->kind) {
    case Node::Kind::Constant:
      return format_double(e->value);
    case Node::Kind::Var:
      return e->name;
    case Node::Kind::Unary: {
      static const char* names[] = {"",    "sin", "cos",  "tan",
                                    "exp", "log", "sqrt", "abs"};
      if (e->uop == UnaryOp::Neg) return "-" + print_child(e->a, 3, false);
      return std::string(names[static_cast<int>(e->uop)]) + "(" + print(e->a) + ")";
    }
    case Node::Kind::Binary: {
      const int p = precedence(e);
      switch (e->bop) {
        case BinaryOp::Add:
          return print_child(e->a, p, false) + " + " + print_child(e->b, p, false);
        case BinaryOp::Sub:
          return print_child(e->a, p, false) + " - " + print_child(e->b, p, true);
        case BinaryOp::Mul:
          return print_child(e->a, p, false) + "*" + print_child(e->b, p, false);
        case BinaryOp::Div:
          return print_child(e->a, p, false) + "/" + print_child(e->b, p, true);
        case BinaryOp::Pow:
          return print_child(e->a, 5, false) + "^" + print_child(e->b, 5, false);
      }
    }
  }
  return "";
}

inline double eval_node(const NodePtr& e, const std::map<std::string, double>& env) {
  double v = 0.0;
  switch (e->kind) {
    case Node::Kind::Constant:
      v = e->value;
      break;
    case Node::Kind::Var: {
      auto it = env.find(e->name);
      if (it == env.end())
        throw EvalError(EvalError::Kind::MissingVar, "unbound variable " + e->name);
      v = it->second;
      break;
    }
    case Node::Kind::Unary: {
      const double a = eval_node(e->a, env);
      switch (e->uop) {
        case UnaryOp::Neg: v = -a; break;
        case UnaryOp::Sin: v = std::sin(a); break;
        case UnaryOp::Cos: v = std::cos(a); break;
        case UnaryOp::Tan: v = std::tan(a); break;
        case UnaryOp::Exp: v = std::exp(a); break;
        case UnaryOp::Log: v = std::log(a); break;
        case UnaryOp::Sqrt: v = std::sqrt(a); break;
        case UnaryOp::Abs: v = std::abs(a); break;
      }
      break;
    }
    case Node::Kind::Binary: {
      const double a = eval_node(e->a, env);
      const double b = eval_node(e->b, env);
      switch (e->bop) {
        case BinaryOp::Add: v = a + b; break;
        case BinaryOp::Sub: v = a - b; break;
        case BinaryOp::Mul: v = a * b; break;
        case BinaryOp::Div: v = a / b; break;
        case BinaryOp::Pow: v = std::pow(a, b); break;
      }
      break;
    }
  }
  if (!std::isfinite(v))
    throw EvalError(EvalError::Kind::DomainViolation, "non-finite value in evaluation");
  return v;
}

inline NodePtr diff_node(const NodePtr& e, const std::string& var) {
  switch (e->kind) {
    case Node::Kind::Constant:
      return constant(0);
    case Node::Kind::Var:
      return constant(e->name == var ? 1 : 0);
    case Node::Kind::Unary: {
      NodePtr da = diff_node(e->a, var);
      switch (e->uop) {
        case UnaryOp::Neg:
          return unary(UnaryOp::Neg, std::move(da));
        case UnaryOp::Sin:
          return binary(BinaryOp::Mul, unary(UnaryOp::Cos, e->a), std::move(da));
        case UnaryOp::Cos:
          return binary(BinaryOp::Mul,
                        unary(UnaryOp::Neg, unary(UnaryOp::Sin, e->a)),
                        std::move(da));
        case UnaryOp::Tan:
          return binary(BinaryOp::Div, std::move(da),
                        binary(BinaryOp::Pow, unary(UnaryOp::Cos, e->a), constant(2)));
        case UnaryOp::Exp:
          return binary(BinaryOp::Mul, unary(UnaryOp::Exp, e->a), std::move(da));
        case UnaryOp::Log:
          return binary(BinaryOp::Div, std::move(da), e->a);
        case UnaryOp::Sqrt:
          return binary(BinaryOp::Div, std::move(da),
                        binary(BinaryOp::Mul, constant(2), unary(UnaryOp::Sqrt, e->a)));
        case UnaryOp::Abs:
          throw UnsupportedOp("abs is not differentiable; dynamics must be C1");
      }
      break;
    }
    case Node::Kind::Binary: {
      switch (e->bop) {
        case BinaryOp::Add:
          return binary(BinaryOp::Add, diff_node(e->a, var), diff_node(e->b, var));
        case BinaryOp::Sub:
          return binary(BinaryOp::Sub, diff_node(e->a, var), diff_node(e->b, var));
        case BinaryOp::Mul:
          return binary(BinaryOp::Add,
                        binary(BinaryOp::Mul, diff_node(e->a, var), e->b),
                        binary(BinaryOp::Mul, e->a, diff_node(e->b, var)));
        case BinaryOp::Div:
          return binary(
              BinaryOp::Div,
              binary(BinaryOp::Sub,
                     binary(BinaryOp::Mul, diff_node(e->a, var), e->b),
                     binary(BinaryOp::Mul, e->a, diff_node(e->b, var))),
              binary(BinaryOp::Pow, e->b, constant(2)));
        case BinaryOp::Pow: {
          // exponent is constant by grammar
          const double c = e->b->value;
          return binary(BinaryOp::Mul,
                        binary(BinaryOp::Mul, constant(c),
                               binary(BinaryOp::Pow, e->a, constant(c - 1))),
                        diff_node(e->a, var));
        }
      }
    }
  }
  return constant(0);
}

inline NodePtr substitute(const NodePtr& e, const std::map<std::string, double>& values) {
  switch (e->kind) {
    case Node::Kind::Constant:
      return e;
    case Node::Kind::Var: {
      auto it = values.find(e->name);
      return it == values.end() ? e : constant(it->second);
    }
    case Node::Kind::Unary:
      return unary(e->uop, substitute(e->a, values));
    case Node::Kind::Binary:
      return binary(e->bop, substitute(e->a, values), substitute(e->b, values));
  }
  return e;
}

// Flat postorder program for allocation-free evaluation in simulation loops.
struct Instr {
  enum class Op {
    Const, LoadX, LoadU,
    Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs,
    Add, Sub, Mul, Div, Pow
  };
  Op op;
  double val = 0.0;
  int idx = 0;
};

struct Program {
  std::vector<Instr> code;

  double run(const double* x, const double* u) const {
    std::array<double, 64> stack{};
    int top = -1;
    for (const auto& ins : code) {
      switch (ins.op) {
        case Instr::Op::Const: stack[++top] = ins.val; break;
        case Instr::Op::LoadX: stack[++top] = x[ins.idx]; break;
        case Instr::Op::LoadU: stack[++top] = u[ins.idx]; break;
        case Instr::Op::Neg: stack[top] = -stack[top]; break;
        case Instr::Op::Sin: stack[top] = std::sin(stack[top]); break;
        case Instr::Op::Cos: stack[top] = std::cos(stack[top]); break;
        case Instr::Op::Tan: stack[top] = std::tan(stack[top]); break;
        case Instr::Op::Exp: stack[top] = std::exp(stack[top]); break;
        case Instr::Op::Log: stack[top] = std::log(stack[top]); break;
        case Instr::Op::Sqrt: stack[top] = std::sqrt(stack[top]); break;
        case Instr::Op::Abs: stack[top] = std::abs(stack[top]); break;
        case Instr::Op::Add: --top; stack[top] += stack[top + 1]; break;
        case Instr::Op::Sub: --top; stack[top] -= stack[top + 1]; break;
        case Instr::Op::Mul: --top; stack[top] *= stack[top + 1]; break;
        case Instr::Op::Div: --top; stack[top] /= stack[top + 1]; break;
        case Instr::Op::Pow:
          --top;
          stack[top] = std::pow(stack[top], stack[top + 1]);
          break;
      }
    }
    return stack[0];
  }
};

inline void compile_node(const NodePtr& e, const SymbolTable& symbols,
                         Program& out, int depth) {
  if (depth > 60) throw NumericalFailure("expression nesting too deep");
  switch (e->kind) {
    case Node::Kind::Constant:
      out.code.push_back({Instr::Op::Const, e->value, 0});
      return;
    case Node::Kind::Var: {
      auto [kind, idx] = symbols.lookup(e->name);
      if (kind == SymbolTable::Kind::State)
        out.code.push_back({Instr::Op::LoadX, 0.0, idx});
      else if (kind == SymbolTable::Kind::Input)
        out.code.push_back({Instr::Op::LoadU, 0.0, idx});
      else
        throw UnknownSymbol(e->name);  // params must be substituted first
      return;
    }
    case Node::Kind::Unary: {
      compile_node(e->a, symbols, out, depth + 1);
      static const Instr::Op ops[] = {Instr::Op::Neg, Instr::Op::Sin,
                                      Instr::Op::Cos, Instr::Op::Tan,
                                      Instr::Op::Exp, Instr::Op::Log,
                                      Instr::Op::Sqrt, Instr::Op::Abs};
      out.code.push_back({ops[static_cast<int>(e->uop)], 0.0, 0});
      return;
    }
    case Node::Kind::Binary: {
      compile_node(e->a, symbols, out, depth + 1);
      compile_node(e->b, symbols, out, depth + 1);
      static const Instr::Op ops[] = {Instr::Op::Add, Instr::Op::Sub,
                                      Instr::Op::Mul, Instr::Op::Div,
                                      Instr::Op::Pow};
      out.code.push_back({ops[static_cast<int>(e->bop)], 0.0, 0});
      return;
    }
  }
}

}  // namespace detail

inline Expression parse(const std::string& text, const SymbolTable& symbols) {
  if (text.empty()) throw SyntaxError(0, "empty expression");
  detail::Parser p(text, symbols);
  NodePtr root = p.parse_expression();
  p.expect_end();
  return Expression(std::move(root));
}

inline std::string to_string(const Expression& e) { return detail::print(e.root()); }

inline double evaluate(const Expression& e, const std::map<std::string, double>& env) {
  return detail::eval_node(e.root(), env);
}

inline Expression differentiate(const Expression& e, const std::string& var) {
  return Expression(detail::diff_node(e.root(), var));
}

inline Expression substitute_params(const Expression& e,
                                    const std::map<std::string, double>& values) {
  return Expression(detail::substitute(e.root(), values));
}

// Dynamics dx/dt = f(x, u) with compiled evaluators for f and its Jacobians.
// Parameters must already be substituted out of the component expressions.
class VectorField {
 public:
  VectorField(std::vector<Expression> components, int state_dim, int input_dim)
      : components_(std::move(components)),
        n_(state_dim),
        m_(input_dim),
        symbols_{state_dim, input_dim, {}} {
    if (static_cast<int>(components_.size()) != n_)
      throw DimensionMismatch("vector field: component count != state dimension");
    jx_.resize(static_cast<std::size_t>(n_));
    ju_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      f_prog_.push_back(compile(components_[static_cast<std::size_t>(i)]));
      for (int j = 0; j < n_; ++j) {
        Expression d = differentiate(components_[static_cast<std::size_t>(i)],
                                     "x" + std::to_string(j + 1));
        jx_[static_cast<std::size_t>(i)].push_back(d);
        jx_prog_.push_back(compile(d));
      }
      for (int j = 0; j < m_; ++j) {
        Expression d = differentiate(components_[static_cast<std::size_t>(i)],
                                     "u" + std::to_string(j + 1));
        ju_[static_cast<std::size_t>(i)].push_back(d);
        ju_prog_.push_back(compile(d));
      }
    }
  }

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  const std::vector<Expression>& components() const { return components_; }
  const std::vector<std::vector<Expression>>& jacobian_x() const { return jx_; }
  const std::vector<std::vector<Expression>>& jacobian_u() const { return ju_; }

  Eigen::VectorXd eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_dims(x, u);
    Eigen::VectorXd out(n_);
    for (int i = 0; i < n_; ++i)
      out[i] = f_prog_[static_cast<std::size_t>(i)].run(x.data(), u.data());
    if (!out.allFinite())
      throw EvalError(EvalError::Kind::DomainViolation, "non-finite flow value");
    return out;
  }

  Eigen::MatrixXd jac_x_at(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_dims(x, u);
    Eigen::MatrixXd J(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        J(i, j) = jx_prog_[static_cast<std::size_t>(i * n_ + j)].run(x.data(), u.data());
    if (!J.allFinite())
      throw EvalError(EvalError::Kind::DomainViolation, "non-finite state Jacobian");
    return J;
  }

  Eigen::MatrixXd jac_u_at(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_dims(x, u);
    Eigen::MatrixXd J(n_, m_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j)
        J(i, j) = ju_prog_[static_cast<std::size_t>(i * m_ + j)].run(x.data(), u.data());
    if (!J.allFinite())
      throw EvalError(EvalError::Kind::DomainViolation, "non-finite input Jacobian");
    return J;
  }

 private:
  detail::Program compile(const Expression& e) const {
    detail::Program prog;
    detail::compile_node(e.root(), symbols_, prog, 0);
    return prog;
  }

  void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    if (x.size() != n_ || u.size() != m_)
      throw DimensionMismatch("vector field: argument dimensions");
  }

  std::vector<Expression> components_;
  int n_, m_;
  SymbolTable symbols_;
  std::vector<detail::Program> f_prog_, jx_prog_, ju_prog_;
  std::vector<std::vector<Expression>> jx_, ju_;
};

inline std::pair<std::vector<std::vector<Expression>>,
                 std::vector<std::vector<Expression>>>
jacobian(const VectorField& f) {
  return {f.jacobian_x(), f.jacobian_u()};
}

inline VectorField make_vector_field(const std::vector<std::string>& components,
                                     int state_dim, int input_dim) {
  SymbolTable symbols{state_dim, input_dim, {}};
  std::vector<Expression> parsed;
  parsed.reserve(components.size());
  for (const auto& text : components) parsed.push_back(parse(text, symbols));
  return VectorField(std::move(parsed), state_dim, input_dim);
}

}  // namespace veripc::expr
