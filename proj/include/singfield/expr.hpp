#pragma once

// Infix expressions over named real variables.
//
// Grammar (tightest binding last):
//   expr    := term  (('+' | '-') term)*
//   term    := power (('*' | '/') power)*
//   power   := unary ('^' unary)*            left associative
//   unary   := ('-' | '+') unary | primary
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Unary minus binds tighter than '^', so "-x^2" is (-x)^2.  There is no
// implicit multiplication.  Functions: sqrt exp ln sin cos abs pow(x, y).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "singfield/error.hpp"
#include "singfield/jet.hpp"

namespace singfield {

namespace expr_detail {

enum class Kind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sqrt, Exp, Ln, Sin, Cos, Abs, Pow };

struct FuncInfo {
  std::string_view name;
  Func func;
  unsigned arity;
};

inline constexpr FuncInfo kFunctions[] = {
    {"sqrt", Func::Sqrt, 1}, {"exp", Func::Exp, 1}, {"ln", Func::Ln, 1},   {"sin", Func::Sin, 1},
    {"cos", Func::Cos, 1},   {"abs", Func::Abs, 1}, {"pow", Func::Pow, 2},
};

inline const FuncInfo* find_function(std::string_view name) {
  for (const FuncInfo& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

inline std::string_view function_name(Func f) {
  for (const FuncInfo& info : kFunctions) {
    if (info.func == f) return info.name;
  }
  return "?";
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Kind kind = Kind::Constant;
  double value = 0.0;
  unsigned var = 0;
  Func func = Func::Sqrt;
  std::vector<NodePtr> args;
};

inline int precedence(const Node& n) {
  switch (n.kind) {
    case Kind::Add:
    case Kind::Sub: return 1;
    case Kind::Mul:
    case Kind::Div: return 2;
    case Kind::Pow: return 3;
    case Kind::Negate: return 4;
    default: return 5;
  }
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string print(const Node& n, const std::vector<std::string>& vars) {
  auto wrap = [&](const Node& child, bool parens) {
    std::string s = print(child, vars);
    return parens ? "(" + s + ")" : s;
  };
  switch (n.kind) {
    case Kind::Constant: return format_number(n.value);
    case Kind::Variable: return vars[n.var];
    case Kind::Negate: return "-" + wrap(*n.args[0], precedence(*n.args[0]) < 4);
    case Kind::Call: {
      std::string s(function_name(n.func));
      s += "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) s += ", ";
        s += print(*n.args[i], vars);
      }
      return s + ")";
    }
    default: {
      const int p = precedence(n);
      const char* op = n.kind == Kind::Add   ? " + "
                       : n.kind == Kind::Sub ? " - "
                       : n.kind == Kind::Mul ? "*"
                       : n.kind == Kind::Div ? "/"
                                             : "^";
      return wrap(*n.args[0], precedence(*n.args[0]) < p) + op +
             wrap(*n.args[1], precedence(*n.args[1]) <= p);
    }
  }
}

inline bool same_tree(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case Kind::Constant:
      if (a.value != b.value) return false;
      break;
    case Kind::Variable:
      if (a.var != b.var) return false;
      break;
    case Kind::Call:
      if (a.func != b.func) return false;
      break;
    default: break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& vars) : src_(src), vars_(vars) {}

  NodePtr parse() {
    NodePtr root = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) syntax("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return root;
  }

 private:
  static constexpr int kMaxDepth = 200;

  [[noreturn]] void syntax(const std::string& msg) const {
    throw Error(Errc::SyntaxError, msg + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Kind k, NodePtr l, NodePtr r) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->args = {std::move(l), std::move(r)};
    return n;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.syntax("expression nested too deeply");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  NodePtr parse_expr() {
    DepthGuard guard(*this);
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Kind::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(Kind::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_power();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Kind::Mul, lhs, parse_power());
      } else if (accept('/')) {
        lhs = binary(Kind::Div, lhs, parse_power());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_power() {
    NodePtr lhs = parse_unary();
    while (accept('^')) lhs = binary(Kind::Pow, lhs, parse_unary());
    return lhs;
  }

  NodePtr parse_unary() {
    DepthGuard guard(*this);
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Kind::Negate;
      n->args = {parse_unary()};
      return n;
    }
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) syntax("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_expr();
      if (!accept(')')) syntax("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    syntax("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos_ = start;
      syntax("malformed number");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) syntax("malformed exponent");
    }
    double v = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || !std::isfinite(v)) {
      pos_ = start;
      syntax("number out of range");
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->value = v;
    return n;
  }

  NodePtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));
    for (unsigned i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Variable;
        n->var = i;
        return n;
      }
    }
    const FuncInfo* f = find_function(name);
    if (!f) throw Error(Errc::UnknownIdentifier, "unknown identifier '" + name + "'", start);
    if (!accept('(')) syntax("expected '(' after function '" + name + "'");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Call;
    n->func = f->func;
    n->args.push_back(parse_expr());
    while (accept(',')) n->args.push_back(parse_expr());
    if (!accept(')')) syntax("expected ')'");
    if (n->args.size() != f->arity) {
      throw Error(Errc::ArityMismatch,
                  "function '" + name + "' takes " + std::to_string(f->arity) + " argument(s), got " +
                      std::to_string(n->args.size()),
                  start);
    }
    return n;
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

// Arithmetic shims so one evaluator serves both doubles and jets.
inline bool is_integer(double v) { return std::isfinite(v) && v == std::nearbyint(v) && std::abs(v) < 1e9; }

inline double const_part(double v) { return v; }
inline double const_part(const Jet& j) { return j.value(); }

inline bool is_constant_value(double) { return true; }
inline bool is_constant_value(const Jet& j) {
  for (std::size_t i = 1; i < j.coefficients().size(); ++i) {
    if (j.coeff_at(i) != 0.0) return false;
  }
  return true;
}

inline double make_like(double, double v) { return v; }
inline Jet make_like(const Jet& like, double v) { return Jet::constant(like.nvars(), like.order(), v); }

inline double fn_sqrt(double a) { return std::sqrt(a); }
inline double fn_exp(double a) { return std::exp(a); }
inline double fn_log(double a) { return std::log(a); }
inline double fn_sin(double a) { return std::sin(a); }
inline double fn_cos(double a) { return std::cos(a); }
inline double fn_abs(double a) { return std::abs(a); }
inline double fn_powr(double a, double r) { return std::pow(a, r); }
inline double fn_powi(double a, long n) { return std::pow(a, static_cast<double>(n)); }

inline Jet fn_sqrt(const Jet& a) { return sqrt(a); }
inline Jet fn_exp(const Jet& a) { return exp(a); }
inline Jet fn_log(const Jet& a) { return log(a); }
inline Jet fn_sin(const Jet& a) { return sin(a); }
inline Jet fn_cos(const Jet& a) { return cos(a); }
inline Jet fn_abs(const Jet& a) { return abs(a); }
inline Jet fn_powr(const Jet& a, double r) { return pow(a, r); }
inline Jet fn_powi(const Jet& a, long n) { return powi(a, n); }

template <typename T>
class Evaluator {
 public:
  Evaluator(std::span<const T> args, const std::vector<std::string>& vars) : args_(args), vars_(vars) {}

  T eval(const Node& n) const {
    switch (n.kind) {
      case Kind::Constant: return make_like(args_[0], n.value);
      case Kind::Variable: return args_[n.var];
      case Kind::Negate: return -eval(*n.args[0]);
      case Kind::Add: return eval(*n.args[0]) + eval(*n.args[1]);
      case Kind::Sub: return eval(*n.args[0]) - eval(*n.args[1]);
      case Kind::Mul: return eval(*n.args[0]) * eval(*n.args[1]);
      case Kind::Div: {
        T den = eval(*n.args[1]);
        if (const_part(den) == 0.0) domain(n, "division by zero");
        return eval(*n.args[0]) / den;
      }
      case Kind::Pow: return power(n, eval(*n.args[0]), eval(*n.args[1]));
      case Kind::Call: return call(n);
    }
    return make_like(args_[0], 0.0);
  }

 private:
  [[noreturn]] void domain(const Node& n, const std::string& what) const {
    throw Error(Errc::DomainError, what + " in '" + print(n, vars_) + "'");
  }

  T power(const Node& n, const T& base, const T& exponent) const {
    const double e0 = const_part(exponent);
    const double b0 = const_part(base);
    if (is_constant_value(exponent) && is_integer(e0)) {
      if (b0 == 0.0 && e0 < 0) domain(n, "zero raised to a negative power");
      return fn_powi(base, static_cast<long>(e0));
    }
    if (!(b0 > 0.0)) domain(n, "non-integer power of non-positive base");
    if (is_constant_value(exponent)) return fn_powr(base, e0);
    return fn_exp(exponent * fn_log(base));
  }

  T call(const Node& n) const {
    const T a = eval(*n.args[0]);
    const double a0 = const_part(a);
    switch (n.func) {
      case Func::Sqrt:
        if (a0 < 0.0) domain(n, "square root of negative value");
        if constexpr (std::is_same_v<T, Jet>) {
          if (a0 == 0.0) domain(n, "square root is not smooth at 0");
        }
        return fn_sqrt(a);
      case Func::Exp: return fn_exp(a);
      case Func::Ln:
        if (!(a0 > 0.0)) domain(n, "logarithm of non-positive value");
        return fn_log(a);
      case Func::Sin: return fn_sin(a);
      case Func::Cos: return fn_cos(a);
      case Func::Abs:
        if constexpr (std::is_same_v<T, Jet>) {
          if (a0 == 0.0) domain(n, "abs is not smooth at 0");
        }
        return fn_abs(a);
      case Func::Pow: return power(n, a, eval(*n.args[1]));
    }
    return a;
  }

  std::span<const T> args_;
  const std::vector<std::string>& vars_;
};

}  // namespace expr_detail

/// Immutable parsed expression.  Copies share the tree.
class Expression {
 public:
  static Expression parse(std::string_view source, std::vector<std::string> variables) {
    if (variables.empty()) fail(Errc::InvalidArgument, "expression needs at least one variable");
    for (std::size_t i = 0; i < variables.size(); ++i) {
      const std::string& v = variables[i];
      if (v.empty() || !(std::isalpha(static_cast<unsigned char>(v[0])) || v[0] == '_')) {
        fail(Errc::InvalidArgument, "invalid variable name '" + v + "'");
      }
      if (expr_detail::find_function(v)) fail(Errc::InvalidArgument, "variable shadows function '" + v + "'");
      for (std::size_t j = 0; j < i; ++j) {
        if (variables[j] == v) fail(Errc::InvalidArgument, "duplicate variable '" + v + "'");
      }
    }
    Expression e;
    e.vars_ = std::make_shared<const std::vector<std::string>>(std::move(variables));
    e.root_ = expr_detail::Parser(source, *e.vars_).parse();
    return e;
  }

  const std::vector<std::string>& free_vars() const { return *vars_; }
  unsigned arity() const { return static_cast<unsigned>(vars_->size()); }

  double eval(std::span<const double> point) const {
    check_arity(point.size());
    return expr_detail::Evaluator<double>(point, *vars_).eval(*root_);
  }

  /// Composition with arbitrary argument jets (all of one shape).
  Jet eval(std::span<const Jet> args) const {
    check_arity(args.size());
    for (const Jet& a : args) {
      if (!a.same_shape(args[0])) fail(Errc::ShapeMismatch, "argument jets differ in shape");
    }
    return expr_detail::Evaluator<Jet>(args, *vars_).eval(*root_);
  }

  /// Taylor expansion at `point` up to total degree `order`.
  Jet eval_jet(std::span<const double> point, unsigned order) const {
    check_arity(point.size());
    const std::vector<Jet> vars = Jet::variables(point, order);
    return eval(std::span<const Jet>(vars));
  }

  std::string to_string() const { return expr_detail::print(*root_, *vars_); }

  bool structurally_equal(const Expression& o) const {
    return *vars_ == *o.vars_ && expr_detail::same_tree(*root_, *o.root_);
  }

  bool is_constant() const { return !references_variables(*root_); }

 private:
  Expression() = default;

  void check_arity(std::size_t n) const {
    if (n != vars_->size()) {
      fail(Errc::ShapeMismatch, "expression expects " + std::to_string(vars_->size()) +
                                    " arguments, got " + std::to_string(n));
    }
  }

  static bool references_variables(const expr_detail::Node& n) {
    if (n.kind == expr_detail::Kind::Variable) return true;
    for (const auto& a : n.args) {
      if (references_variables(*a)) return true;
    }
    return false;
  }

  std::shared_ptr<const std::vector<std::string>> vars_;
  expr_detail::NodePtr root_;
};

}  // namespace singfield
