#pragma once

#include "lpvjump/expr.hpp"
#include "lpvjump/polymat.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lpvjump {

/// The plant
///   dx/dt = A(rho) x + A_d(rho) x(t - tau(rho)) + B(rho) u + E(rho) w
///   z     = C(rho) x + C_d(rho) x(t - tau(rho)) + D(rho) u + F(rho) w
/// with rho piecewise constant in `box` and delay bounded by h.
struct LpvDelaySystem {
  int n{0};
  int nw{0};
  int nu{0};
  int nz{0};
  PolyMatrix A, Ad, B, E, C, Cd, D, F;  // polynomials in rho
  ParamBox box;
  double h{0.0};
};

/// Transition-rate density lambda(theta, rho) plus derived quantities.
struct JumpKernel {
  PolyMatrix lambda;      // 1x1, vars subset of {theta, rho}
  PolyMatrix lambda_bar;  // 1x1 in rho: integral of lambda over theta
  double mu_box{0.0};     // Lebesgue measure of the box
  double lambda_max{0.0}; // grid sup of lambda times a 1.05 safety factor
};

/// Builds the derived fields of a JumpKernel; nonnegativity is checked later
/// by validate().
JumpKernel make_jump_kernel(const PolyMatrix& lambda, const ParamBox& box);

/// A constant-intensity kernel lambda(theta,rho) = lambda0.
JumpKernel constant_kernel(double lambda0, const ParamBox& box);

/// Delay as a function of the scheduling parameter, tau : box -> [0, h].
struct DelayLaw {
  Expr expr;  // in r only
  double h{0.0};

  double eval(double rho) const { return expr.eval_r(rho); }
};

DelayLaw make_delay_law(const Expr& expr, double h);
DelayLaw constant_delay(double tau, double h);

/// Initial state history phi on [-h, 0].
struct InitialHistory {
  std::function<Eigen::VectorXd(double)> phi;

  static InitialHistory constant(const Eigen::VectorXd& x0);
  /// One expression in t per state component.
  static InitialHistory from_exprs(const std::vector<Expr>& components);
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

struct ValidationReport {
  bool ok{true};
  std::vector<ValidationIssue> issues;
  PolyMatrix delta;        // delta(rho) = 1 + 2*lambda_bar(rho)*h
  double lambda_bar_sup{0.0};

  void add(const std::string& field, const std::string& message);
  std::string to_string() const;
};

struct ValidationOptions {
  int grid_points{1001};  // per axis
};

/// Checks dimension consistency, kernel nonnegativity on a grid, the derived
/// lambda_bar/lambda_max invariants, delay range and history continuity, and
/// returns delta(rho) and sup lambda_bar.
ValidationReport validate(const LpvDelaySystem& sys, const JumpKernel& kernel,
                          const DelayLaw& delay, const ValidationOptions& opts = {});

ValidationReport validate(const LpvDelaySystem& sys, const JumpKernel& kernel,
                          const DelayLaw& delay, const InitialHistory& history,
                          const ValidationOptions& opts = {});

}  // namespace lpvjump
