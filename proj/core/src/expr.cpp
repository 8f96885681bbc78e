#include "lpvjump/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace lpvjump {

namespace {
int precedence(int kind_add_level) { return kind_add_level; }
}  // namespace

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expr run() {
    Expr e;
    if (text_.empty()) throw ExprParseError(0, "expression", "empty expression");
    out_ = &e;
    e.root_ = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("end of input, '+', '-', '*' or '/'");
    return e;
  }

 private:
  std::string_view text_;
  std::size_t pos_{0};
  Expr* out_{nullptr};

  using Kind = Expr::Kind;

  [[noreturn]] void fail(const std::string& expected) {
    throw ExprParseError(pos_, expected,
                         "parse error at byte " + std::to_string(pos_) + ": expected " + expected);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add_node(Kind k, double num = 0.0, int a = -1, int b = -1) {
    out_->nodes_.push_back({k, num, a, b});
    return static_cast<int>(out_->nodes_.size()) - 1;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      skip_ws();
      if (eat('+')) {
        lhs = add_node(Kind::Add, 0.0, lhs, parse_term());
      } else if (eat('-')) {
        lhs = add_node(Kind::Sub, 0.0, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (eat('*')) {
        lhs = add_node(Kind::Mul, 0.0, lhs, parse_unary());
      } else if (eat('/')) {
        lhs = add_node(Kind::Div, 0.0, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    skip_ws();
    if (eat('-')) return add_node(Kind::Neg, 0.0, parse_unary());
    return parse_primary();
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("number, 'r', 't', function or '('");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      if (!eat(')')) fail("')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    fail("number, 'r', 't', function or '('");
  }

  int parse_number() {
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc()) fail("number");
    pos_ += static_cast<std::size_t>(res.ptr - begin);
    return add_node(Kind::Number, value);
  }

  int parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    if (name == "r") return add_node(Kind::VarR);
    if (name == "t") return add_node(Kind::VarT);
    Kind k;
    int arity = 1;
    if (name == "sin") {
      k = Kind::Sin;
    } else if (name == "cos") {
      k = Kind::Cos;
    } else if (name == "H") {
      k = Kind::Heaviside;
    } else if (name == "min") {
      k = Kind::Min;
      arity = 2;
    } else if (name == "max") {
      k = Kind::Max;
      arity = 2;
    } else {
      pos_ = start;
      fail("'r', 't', 'sin', 'cos', 'min', 'max' or 'H'");
    }
    if (!eat('(')) fail("'('");
    int a = parse_expr();
    int b = -1;
    if (arity == 2) {
      if (!eat(',')) fail("','");
      b = parse_expr();
    }
    if (!eat(')')) fail(arity == 2 ? "')'" : "')' or ','");
    return add_node(k, 0.0, a, b);
  }
};

Expr Expr::parse(std::string_view text) { return ExprParser(text).run(); }

double Expr::eval(const ExprEnv& env) const {
  if (root_ < 0) throw ExprEvalError("eval of empty expression");
  return eval_node(root_, env);
}

double Expr::eval_node(int idx, const ExprEnv& env) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  switch (n.kind) {
    case Kind::Number:
      return n.number;
    case Kind::VarR:
      if (!env.r) throw ExprEvalError("variable r is not assigned");
      return *env.r;
    case Kind::VarT:
      if (!env.t) throw ExprEvalError("variable t is not assigned");
      return *env.t;
    case Kind::Add:
      return eval_node(n.a, env) + eval_node(n.b, env);
    case Kind::Sub:
      return eval_node(n.a, env) - eval_node(n.b, env);
    case Kind::Mul:
      return eval_node(n.a, env) * eval_node(n.b, env);
    case Kind::Div: {
      double denom = eval_node(n.b, env);
      if (denom == 0.0) throw ExprEvalError("division by zero");
      return eval_node(n.a, env) / denom;
    }
    case Kind::Neg:
      return -eval_node(n.a, env);
    case Kind::Sin:
      return std::sin(eval_node(n.a, env));
    case Kind::Cos:
      return std::cos(eval_node(n.a, env));
    case Kind::Min:
      return std::min(eval_node(n.a, env), eval_node(n.b, env));
    case Kind::Max:
      return std::max(eval_node(n.a, env), eval_node(n.b, env));
    case Kind::Heaviside:
      return eval_node(n.a, env) >= 0.0 ? 1.0 : 0.0;
  }
  throw ExprEvalError("corrupt expression node");
}

bool Expr::uses_r() const {
  for (const auto& n : nodes_) {
    if (n.kind == Kind::VarR) return true;
  }
  return false;
}

bool Expr::uses_t() const {
  for (const auto& n : nodes_) {
    if (n.kind == Kind::VarT) return true;
  }
  return false;
}

std::string Expr::print() const {
  std::string out;
  if (root_ >= 0) print_node(root_, 0, false, out);
  return out;
}

void Expr::print_node(int idx, int parent_prec, bool right_operand, std::string& out) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  auto binary = [&](const char* op, int prec) {
    // parenthesize when binding looser than context, or equal-precedence on
    // the right of a non-associative position (a - (b + c), a / (b * c))
    bool parens = prec < parent_prec || (prec == parent_prec && right_operand);
    if (parens) out += '(';
    print_node(n.a, prec, false, out);
    out += op;
    print_node(n.b, prec, true, out);
    if (parens) out += ')';
  };
  switch (n.kind) {
    case Kind::Number: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", n.number);
      out += buf;
      return;
    }
    case Kind::VarR:
      out += 'r';
      return;
    case Kind::VarT:
      out += 't';
      return;
    case Kind::Add:
      binary("+", precedence(1));
      return;
    case Kind::Sub:
      binary("-", precedence(1));
      return;
    case Kind::Mul:
      binary("*", precedence(2));
      return;
    case Kind::Div:
      binary("/", precedence(2));
      return;
    case Kind::Neg: {
      bool parens = precedence(3) < parent_prec;
      if (parens) out += '(';
      out += '-';
      print_node(n.a, precedence(3), true, out);
      if (parens) out += ')';
      return;
    }
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Heaviside: {
      out += (n.kind == Kind::Sin ? "sin(" : n.kind == Kind::Cos ? "cos(" : "H(");
      print_node(n.a, 0, false, out);
      out += ')';
      return;
    }
    case Kind::Min:
    case Kind::Max: {
      out += (n.kind == Kind::Min ? "min(" : "max(");
      print_node(n.a, 0, false, out);
      out += ',';
      print_node(n.b, 0, false, out);
      out += ')';
      return;
    }
  }
}

bool Expr::structurally_equal(const Expr& o) const {
  if ((root_ < 0) != (o.root_ < 0)) return false;
  if (root_ < 0) return true;
  return equal_node(root_, o, o.root_);
}

bool Expr::equal_node(int idx, const Expr& o, int oidx) const {
  const Node& a = nodes_[static_cast<std::size_t>(idx)];
  const Node& b = o.nodes_[static_cast<std::size_t>(oidx)];
  if (a.kind != b.kind) return false;
  if (a.kind == Kind::Number) return a.number == b.number;
  if ((a.a >= 0) != (b.a >= 0)) return false;
  if (a.a >= 0 && !equal_node(a.a, o, b.a)) return false;
  if ((a.b >= 0) != (b.b >= 0)) return false;
  if (a.b >= 0 && !equal_node(a.b, o, b.b)) return false;
  return true;
}

}  // namespace lpvjump
