#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace lpvjump {

/// Cone program in the form
///   minimize    c'x
///   subject to  G_b x + s_b = h_b,  s_b in K_b   (per block)
///               A x = b
/// where each K_b is either the nonnegative ray (dim 1) or the cone of
/// positive semidefinite matrices in sqrt(2)-scaled svec coordinates.
enum class ConeKind { NonNeg, Psd };

struct ConeBlock {
  ConeKind kind{ConeKind::NonNeg};
  int dim{1};                 // matrix dimension (1 for NonNeg)
  std::vector<int> cols;      // active variable indices
  Eigen::MatrixXd G;          // vdim() x cols.size()
  Eigen::VectorXd h;          // vdim()

  int vdim() const { return kind == ConeKind::Psd ? dim * (dim + 1) / 2 : 1; }
};

struct ConicProblem {
  int num_vars{0};
  Eigen::VectorXd c;
  std::vector<ConeBlock> blocks;
  Eigen::MatrixXd A;  // may be 0 x num_vars
  Eigen::VectorXd b;

  int cone_dim() const;
  int cone_degree() const;  // sum of block dims (barrier degree)
};

enum class ConicStatus { Optimal, PrimalInfeasible, DualInfeasible, NumericalFailure };

struct ConicSettings {
  double feas_tol{1e-8};
  double gap_tol{1e-8};
  int max_iters{200};
  double step_frac{0.99};
  double static_reg{1e-12};
  bool verbose{false};
};

struct ConicResult {
  ConicStatus status{ConicStatus::NumericalFailure};
  Eigen::VectorXd x;  // decision variables
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd z;  // cone duals (stacked)
  Eigen::VectorXd s;  // cone slacks (stacked)
  double pobj{0.0};
  double dobj{0.0};
  double gap{0.0};
  double pres{0.0};
  double dres{0.0};
  int iters{0};
  std::string message;
};

ConicResult solve_conic(const ConicProblem& prob, const ConicSettings& settings = {});

/// svec with sqrt(2)-scaled off-diagonals (lower triangle, column-major), so
/// that <svec(X), svec(Y)> = tr(XY).
Eigen::VectorXd svec(const Eigen::MatrixXd& S);
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int dim);

}  // namespace lpvjump
