#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lpvjump {

/// Parse failure with the byte offset of the offending token and the set of
/// tokens that would have been accepted there.
struct ExprParseError : std::invalid_argument {
  std::size_t offset;
  std::string expected;
  ExprParseError(std::size_t off, std::string expected_set, const std::string& msg)
      : std::invalid_argument(msg), offset(off), expected(std::move(expected_set)) {}
};

struct ExprEvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExprEnv {
  std::optional<double> r;
  std::optional<double> t;
};

/// Scalar expression in the variables r (scheduling parameter) and t (time).
/// Grammar: number | r | t | a+b | a-b | a*b | a/b | -a | sin a | cos a |
/// min(a,b) | max(a,b) | H(a) | (a), with the usual precedence and left
/// associativity. H is the Heaviside step (H(x) = 1 for x >= 0).
class Expr {
 public:
  Expr() = default;

  static Expr parse(std::string_view text);

  double eval(const ExprEnv& env) const;
  double eval_r(double r) const { return eval({r, std::nullopt}); }
  double eval_t(double t) const { return eval({std::nullopt, t}); }

  bool uses_r() const;
  bool uses_t() const;
  bool empty() const { return nodes_.empty(); }

  std::string print() const;
  bool structurally_equal(const Expr& o) const;

 private:
  enum class Kind : int {
    Number,
    VarR,
    VarT,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Min,
    Max,
    Heaviside,
  };
  struct Node {
    Kind kind{Kind::Number};
    double number{0.0};
    int a{-1};
    int b{-1};
  };

  std::vector<Node> nodes_;
  int root_{-1};

  double eval_node(int idx, const ExprEnv& env) const;
  void print_node(int idx, int parent_prec, bool right_operand, std::string& out) const;
  bool equal_node(int idx, const Expr& o, int oidx) const;

  friend class ExprParser;
};

}  // namespace lpvjump
