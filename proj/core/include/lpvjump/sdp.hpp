#pragma once

#include "lpvjump/conic.hpp"
#include "lpvjump/polymat.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lpvjump {

/// Matrix-valued decision function: one symmetric (or full) coefficient
/// matrix of unknowns per monomial up to the per-variable degree.
struct MatVar {
  std::string name;
  int rows{1};
  int cols{1};
  VarSet vars;
  int deg_theta{0};
  int deg_rho{0};
  bool symmetric{true};
};

struct ScalarVar {
  std::string name;
  std::optional<double> lower;
};

/// Reference to a matrix variable inside an expression. `rho_as` re-indexes a
/// rho-only variable onto another evaluation variable (P(theta) from P(rho)).
struct VarAt {
  int index{-1};
  Var rho_as{Var::Rho};
  bool transposed{false};
};

/// One affine term: coeff(theta,rho) * left * VAR * right.
struct AffineTerm {
  PolyMatrix coeff;  // 1x1
  PolyMatrix left;
  VarAt var;
  PolyMatrix right;
};

struct ScalarTerm {
  int scalar_index{-1};
  PolyMatrix mat;  // the matrix the scalar unknown multiplies
};

/// Exact theta-integral of coeff(theta,rho) * left * VAR(theta) * right over
/// `box`; the result is a polynomial in rho, affine in the variable.
struct IntegralTerm {
  PolyMatrix coeff;
  PolyMatrix left;
  VarAt var;
  PolyMatrix right;
  ParamBox box;
};

struct AffineEntry {
  PolyMatrix constant;
  std::vector<AffineTerm> terms;
  std::vector<ScalarTerm> scalar_terms;
  std::vector<IntegralTerm> integral_terms;

  void add_product(const PolyMatrix& left, VarAt var, const PolyMatrix& right);
  void add_product(const PolyMatrix& coeff, const PolyMatrix& left, VarAt var,
                   const PolyMatrix& right);
  void add_scalar(int scalar_index, const PolyMatrix& mat);
  void add_integral(const PolyMatrix& coeff, const PolyMatrix& left, VarAt var,
                    const PolyMatrix& right, const ParamBox& box);
};

/// Symmetric block matrix of affine entries; only the upper block triangle is
/// stored, the lower one is implied by transposition.
class AffineBlockExpr {
 public:
  AffineBlockExpr() = default;
  explicit AffineBlockExpr(std::vector<int> block_sizes);

  int block_count() const { return static_cast<int>(sizes_.size()); }
  int dim() const { return dim_; }
  int block_offset(int i) const { return offsets_[static_cast<std::size_t>(i)]; }
  int block_size(int i) const { return sizes_[static_cast<std::size_t>(i)]; }

  AffineEntry& entry(int i, int j);
  const AffineEntry& entry(int i, int j) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int dim_{0};
  std::vector<AffineEntry> entries_;  // upper triangle, row-major
};

enum class Sense {
  GreaterEqual,  // expr >= margin * I
  LessEqual,     // expr <= -margin * I
};

/// Evaluation grid as an axis product; an empty axis means the expression
/// does not depend on that variable.
struct GridSpec {
  std::vector<double> theta;
  std::vector<double> rho;

  std::vector<EvalPoint> points() const;
  GridSpec refined(int factor) const;
};

struct PsdConstraint {
  std::string label;
  AffineBlockExpr expr;
  Sense sense{Sense::LessEqual};
  GridSpec grid;
  double margin{0.0};
};

struct EqualityConstraint {
  std::string label;
  std::vector<std::pair<int, double>> lhs;  // (unknown index, coefficient)
  double rhs{0.0};
};

/// Uniform grid on [box.lo, box.hi] including both endpoints.
std::vector<double> grid_points(const ParamBox& box, int count);

class LmiProgram {
 public:
  int add_mat_var(const MatVar& v);
  int add_scalar_var(const ScalarVar& v);

  const MatVar& mat_var(int idx) const { return mat_vars_.at(static_cast<std::size_t>(idx)); }
  const ScalarVar& scalar_var(int idx) const {
    return scalar_vars_.at(static_cast<std::size_t>(idx));
  }
  int mat_var_count() const { return static_cast<int>(mat_vars_.size()); }
  int scalar_var_count() const { return static_cast<int>(scalar_vars_.size()); }
  int find_mat_var(const std::string& name) const;
  int find_scalar_var(const std::string& name) const;

  void add_psd_on_grid(AffineBlockExpr expr, Sense sense, GridSpec grid, double margin,
                       std::string label);
  /// Coefficient equalities forcing the exact theta-integral of a matrix
  /// variable to vanish for every rho.
  void add_integral_zero(int mat_var_index, const ParamBox& box);
  void add_equality(EqualityConstraint eq);
  /// Extra scalar inequality sum coeff*unknown + offset >= 0.
  void add_linear_lower_bound(std::vector<std::pair<int, double>> terms, double offset,
                              std::string label);
  void minimize_scalar(int scalar_index);

  // unknown enumeration (stable: declaration order)
  int unknown_count() const;
  std::vector<Monomial> monomials(int mat_var_index) const;
  int unknown_index(int mat_var_index, int mono_ordinal, int row, int col) const;
  int scalar_unknown_index(int scalar_index) const;

  const std::vector<PsdConstraint>& psd_constraints() const { return psd_; }
  const std::vector<EqualityConstraint>& equalities() const { return eq_; }
  const std::vector<std::pair<std::vector<std::pair<int, double>>, double>>& extra_bounds() const {
    return bounds_;
  }
  int objective_scalar() const { return objective_scalar_; }

 private:
  std::vector<MatVar> mat_vars_;
  std::vector<ScalarVar> scalar_vars_;
  std::vector<int> var_offset_;  // unknown offset per mat var
  int mat_unknowns_{0};
  std::vector<PsdConstraint> psd_;
  std::vector<EqualityConstraint> eq_;
  std::vector<std::pair<std::vector<std::pair<int, double>>, double>> bounds_;
  int objective_scalar_{-1};
};

struct SolveSettings {
  double feas_tol{1e-8};
  double gap_tol{1e-8};
  int max_iters{200};
  int verify_factor{4};
  bool verbose{false};
  std::string dump_path;  // when set, the lowered cone problem is written here
};

struct VariableValues {
  std::map<std::string, PolyMatrix> mats;
  std::map<std::string, double> scalars;
};

struct SolveReport {
  enum class Status { Optimal, Infeasible, NumericalFailure };
  Status status{Status::NumericalFailure};
  double objective{0.0};
  VariableValues values;
  double train_residual{0.0};   // worst residual on the training grids (<= 0 means satisfied)
  double verify_residual{0.0};  // worst residual on the refined verification grids
  std::vector<std::string> warnings;
  int iterations{0};
  std::string message;
};

/// Vectorizes the program into cone blocks (sqrt(2)-scaled svec), solves it
/// with the interior-point method, maps the solution back to PolyMatrix
/// values and re-verifies every constraint on a refined grid.
SolveReport lower_and_solve(const LmiProgram& prog, const SolveSettings& settings = {});

/// Evaluates a block expression at a point using concrete variable values.
Eigen::MatrixXd eval_block_expr(const LmiProgram& prog, const AffineBlockExpr& expr,
                                const EvalPoint& point, const VariableValues& values);

/// Residual of one PSD constraint at one point for given values
/// (<= 0 iff satisfied including the margin).
double constraint_residual(const LmiProgram& prog, const PsdConstraint& c, const EvalPoint& point,
                           const VariableValues& values);

/// Worst residual of every constraint of `prog` over its grid (or a refined
/// grid when factor > 1).
double worst_residual(const LmiProgram& prog, const VariableValues& values, int refine_factor = 1);

ConicProblem lower(const LmiProgram& prog);
void dump_conic(const ConicProblem& prob, const std::string& path);

}  // namespace lpvjump
