#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>

namespace lpvjump {

/// Compact interval the scheduling parameter lives in.
struct ParamBox {
  double lo{0.0};
  double hi{1.0};

  ParamBox() = default;
  ParamBox(double lo_, double hi_);

  double measure() const { return hi - lo; }
};

/// The two evaluation variables a PolyMatrix may depend on: the post-jump
/// parameter theta and the current parameter rho.
enum class Var : int { Theta = 0, Rho = 1 };

struct VarSet {
  bool theta{false};
  bool rho{false};

  static VarSet none() { return {}; }
  static VarSet of_rho() { return {false, true}; }
  static VarSet of_theta() { return {true, false}; }
  static VarSet both() { return {true, true}; }

  bool contains(Var v) const { return v == Var::Theta ? theta : rho; }
  VarSet without(Var v) const;
  VarSet with(Var v) const;
  VarSet united(VarSet o) const { return {theta || o.theta, rho || o.rho}; }
  bool operator==(const VarSet&) const = default;
};

struct Monomial {
  int theta{0};
  int rho{0};

  int deg(Var v) const { return v == Var::Theta ? theta : rho; }
  auto operator<=>(const Monomial&) const = default;
  double value(double theta_val, double rho_val) const;
};

/// Point a PolyMatrix is evaluated at; a variable the matrix depends on must
/// be assigned or eval throws.
struct EvalPoint {
  std::optional<double> theta;
  std::optional<double> rho;

  static EvalPoint at_rho(double r) { return {std::nullopt, r}; }
  static EvalPoint at(double th, double r) { return {th, r}; }
  double get(Var v) const;
};

/// Matrix with multivariate-polynomial entries over {theta, rho}, stored as a
/// dense coefficient matrix per monomial. Arithmetic is exact (coefficient
/// level); only eval introduces floating-point rounding.
class PolyMatrix {
 public:
  using Index = Eigen::Index;

  PolyMatrix() = default;
  PolyMatrix(Index rows, Index cols, VarSet vars);

  static PolyMatrix constant(const Eigen::MatrixXd& m);
  static PolyMatrix scalar(double v);
  static PolyMatrix zero(Index rows, Index cols, VarSet vars = VarSet::none());
  static PolyMatrix identity(Index n);
  /// The 1x1 polynomial "theta" or "rho".
  static PolyMatrix variable(Var v);
  /// coeff * theta^dt * rho^dr
  static PolyMatrix monomial(const Eigen::MatrixXd& coeff, int deg_theta, int deg_rho);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  VarSet vars() const { return vars_; }
  bool symmetric() const { return symmetric_; }
  int degree(Var v) const;
  const std::map<Monomial, Eigen::MatrixXd>& terms() const { return terms_; }

  /// Accumulates coeff onto the monomial (theta^m.theta * rho^m.rho).
  void add_term(const Monomial& m, const Eigen::MatrixXd& coeff);
  Eigen::MatrixXd coeff(const Monomial& m) const;

  /// Marks the matrix symmetric; throws unless rows==cols and every
  /// coefficient matrix is bitwise symmetric.
  void mark_symmetric();

  Eigen::MatrixXd eval(const EvalPoint& p) const;

  /// Exact integral over theta in `box`; result no longer depends on theta.
  PolyMatrix integrate_theta(const ParamBox& box) const;

  /// Re-indexes monomial exponents of `from` onto `to` (e.g. P(rho) -> P(theta)).
  /// Throws if the matrix already depends on `to`.
  PolyMatrix substitute(Var from, Var to) const;

  PolyMatrix transpose() const;
  /// M + M^T (square only); result is exactly symmetric.
  PolyMatrix sym() const;
  PolyMatrix operator+(const PolyMatrix& o) const;
  PolyMatrix operator-(const PolyMatrix& o) const;
  PolyMatrix operator-() const;
  PolyMatrix operator*(const PolyMatrix& o) const;
  PolyMatrix scaled(double a) const;

  /// Drops coefficient matrices that are exactly zero.
  void prune();
  bool is_zero() const;
  double max_abs_coeff() const;

  std::string to_string() const;

 private:
  Index rows_{0};
  Index cols_{0};
  VarSet vars_{};
  bool symmetric_{false};
  std::map<Monomial, Eigen::MatrixXd> terms_;
};

PolyMatrix operator*(double a, const PolyMatrix& m);

/// scalar_poly (1x1) times a matrix polynomial, entrywise over monomials.
PolyMatrix poly_scale(const PolyMatrix& scalar_poly, const PolyMatrix& m);

}  // namespace lpvjump
