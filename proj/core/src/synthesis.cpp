#include "lpvjump/synthesis.hpp"

#include "lpvjump/io.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace lpvjump {

namespace {

int system_degree(const LpvDelaySystem& sys) {
  int d = 0;
  for (const PolyMatrix* m : {&sys.A, &sys.Ad, &sys.B, &sys.E, &sys.C, &sys.Cd, &sys.D, &sys.F}) {
    d = std::max(d, m->degree(Var::Rho));
  }
  return d;
}

void check_degree_budget(int deg_theta, int deg_rho, int budget, const char* what) {
  if (deg_theta > budget || deg_rho > budget) {
    throw std::invalid_argument(std::string(what) +
                                ": polynomial degree exceeds the configured maximum (" +
                                std::to_string(std::max(deg_theta, deg_rho)) + " > " +
                                std::to_string(budget) + ")");
  }
}

GridSpec pd_grid(const ParamBox& box, int count) { return GridSpec{{}, grid_points(box, count)}; }

void add_pd_constraint(LmiProgram& prog, int var, int n, const GridSpec& grid, double margin,
                       const std::string& label) {
  AffineBlockExpr e({n});
  e.entry(0, 0).add_product(PolyMatrix::identity(n), VarAt{var, Var::Rho, false},
                            PolyMatrix::identity(n));
  prog.add_psd_on_grid(std::move(e), Sense::GreaterEqual, grid, margin, label);
}

}  // namespace

SynthesisProgram build_prop1(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                             const SynthesisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_prop1: h must be nonnegative");
  const int n = sys.n, nw = sys.nw, nz = sys.nz;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  check_degree_budget(std::max({lam_dt + opts.deg_P, opts.deg_Z_theta}),
                      std::max({opts.deg_P, lam_dr + opts.deg_P, sysdeg, opts.deg_Z_rho}),
                      opts.max_poly_degree, "build_prop1");

  SynthesisProgram sp;
  sp.theorem = 1;
  sp.h = h;
  sp.opts = opts;
  sp.box = sys.box;
  LmiProgram& prog = sp.prog;

  const int vP = prog.add_mat_var({"P", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Z", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Q", n, n, VarSet::none(), 0, 0, true});
  const int vR = prog.add_mat_var({"R", n, n, VarSet::none(), 0, 0, true});
  const int vX = prog.add_mat_var({"X", n, n, VarSet::none(), 0, 0, false});
  const int sg = prog.add_scalar_var({"g", 0.0});

  const PolyMatrix In = PolyMatrix::identity(n);
  const PolyMatrix neg1 = PolyMatrix::scalar(-1.0);
  const PolyMatrix delta = PolyMatrix::scalar(1.0) + kernel.lambda_bar.scaled(2.0 * h);
  const PolyMatrix mulam = kernel.lambda.scaled(kernel.mu_box);
  const VarAt Prho{vP, Var::Rho, false};
  const VarAt Ptheta{vP, Var::Theta, false};
  const VarAt Z{vZ, Var::Rho, false};
  const VarAt Q{vQ, Var::Rho, false};
  const VarAt R{vR, Var::Rho, false};
  const VarAt X{vX, Var::Rho, false};
  const VarAt Xt{vX, Var::Rho, true};

  // blocks: x-slack, x, x(t-tau), w, z, P-coupling, R-coupling
  AffineBlockExpr lmi({n, n, n, nw, nz, n, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(neg1, In, X, In);   // -X
  e00.add_product(neg1, In, Xt, In);  // -X'
  auto& e01 = lmi.entry(0, 1);
  e01.add_product(In, Prho, In);
  e01.add_product(In, Xt, sys.A);     // X' A
  lmi.entry(0, 2).add_product(In, Xt, sys.Ad);
  lmi.entry(0, 3).add_product(In, Xt, sys.E);
  lmi.entry(0, 5).add_product(In, Xt, In);
  lmi.entry(0, 6).add_product(PolyMatrix::scalar(h), In, R, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(mulam, In, Ptheta, In);
  e11.add_product(mulam.scaled(-1.0), In, Prho, In);
  e11.add_product(neg1, In, Prho, In);
  e11.add_product(In, Z, In);
  e11.add_product(delta, In, Q, In);
  e11.add_product(neg1, In, R, In);
  lmi.entry(1, 2).add_product(In, R, In);
  lmi.entry(1, 4).constant = sys.C.transpose();
  auto& e22 = lmi.entry(2, 2);
  e22.add_product(neg1, In, Q, In);
  e22.add_product(neg1, In, R, In);
  lmi.entry(2, 4).constant = sys.Cd.transpose();
  lmi.entry(3, 3).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(3, 4).constant = sys.F.transpose();
  lmi.entry(4, 4).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(5, 5).add_product(neg1, In, Prho, In);
  lmi.entry(5, 6).add_product(PolyMatrix::scalar(-h), In, R, In);
  lmi.entry(6, 6).add_product(neg1, In, R, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  add_pd_constraint(prog, vP, n, pd_grid(sys.box, opts.grid_rho), opts.margin_pd, "P-pd");
  add_pd_constraint(prog, vQ, n, GridSpec{}, opts.margin_pd, "Q-pd");
  add_pd_constraint(prog, vR, n, GridSpec{}, opts.margin_pd, "R-pd");
  prog.add_integral_zero(vZ, sys.box);
  prog.minimize_scalar(sg);
  return sp;
}

SynthesisProgram build_prop2(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                             double lambda_hat, const SynthesisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_prop2: h must be nonnegative");
  if (!(lambda_hat > 0.0)) throw std::invalid_argument("build_prop2: lambda_hat must be positive");
  const int n = sys.n, nw = sys.nw, nz = sys.nz;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  check_degree_budget(
      std::max({lam_dt + opts.deg_P, lam_dt + opts.deg_Q, lam_dt + opts.deg_R, opts.deg_Z_theta}),
      std::max({opts.deg_P, opts.deg_R, lam_dr + opts.deg_P, sysdeg, opts.deg_Qcal,
                opts.deg_Z_rho}),
      opts.max_poly_degree, "build_prop2");

  const double eps = h * h + lambda_hat * h * h * h / 2.0;
  const double sqeps = std::sqrt(eps);

  SynthesisProgram sp;
  sp.theorem = 2;
  sp.h = h;
  sp.lambda_hat = lambda_hat;
  sp.opts = opts;
  sp.box = sys.box;
  LmiProgram& prog = sp.prog;

  const int vP = prog.add_mat_var({"P", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Z", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Q", n, n, VarSet::of_rho(), 0, opts.deg_Q, true});
  const int vR = prog.add_mat_var({"R", n, n, VarSet::of_rho(), 0, opts.deg_R, true});
  const int vQc = prog.add_mat_var({"Qcal", n, n, VarSet::of_rho(), 0, opts.deg_Qcal, true});
  const int vX = prog.add_mat_var({"X", n, n, VarSet::none(), 0, 0, false});
  const int sg = prog.add_scalar_var({"g", 0.0});

  const PolyMatrix In = PolyMatrix::identity(n);
  const PolyMatrix neg1 = PolyMatrix::scalar(-1.0);
  const PolyMatrix mulam = kernel.lambda.scaled(kernel.mu_box);
  const VarAt Prho{vP, Var::Rho, false};
  const VarAt Ptheta{vP, Var::Theta, false};
  const VarAt Z{vZ, Var::Rho, false};
  const VarAt Q{vQ, Var::Rho, false};
  const VarAt Qtheta{vQ, Var::Theta, false};
  const VarAt R{vR, Var::Rho, false};
  const VarAt Rtheta{vR, Var::Theta, false};
  const VarAt Qc{vQc, Var::Rho, false};
  const VarAt X{vX, Var::Rho, false};
  const VarAt Xt{vX, Var::Rho, true};

  AffineBlockExpr lmi({n, n, n, nw, nz, n, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(neg1, In, X, In);
  e00.add_product(neg1, In, Xt, In);
  auto& e01 = lmi.entry(0, 1);
  e01.add_product(In, Prho, In);
  e01.add_product(In, Xt, sys.A);
  lmi.entry(0, 2).add_product(In, Xt, sys.Ad);
  lmi.entry(0, 3).add_product(In, Xt, sys.E);
  lmi.entry(0, 5).add_product(In, Xt, In);
  lmi.entry(0, 6).add_product(PolyMatrix::scalar(sqeps), In, R, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(mulam, In, Ptheta, In);
  e11.add_product(mulam.scaled(-1.0), In, Prho, In);
  e11.add_product(neg1, In, Prho, In);
  e11.add_product(In, Z, In);
  e11.add_product(In, Q, In);
  e11.add_product(PolyMatrix::scalar(h), In, Qc, In);
  e11.add_product(neg1, In, R, In);
  lmi.entry(1, 2).add_product(In, R, In);
  lmi.entry(1, 4).constant = sys.C.transpose();
  auto& e22 = lmi.entry(2, 2);
  e22.add_product(neg1, In, Q, In);
  e22.add_product(neg1, In, R, In);
  lmi.entry(2, 4).constant = sys.Cd.transpose();
  lmi.entry(3, 3).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(3, 4).constant = sys.F.transpose();
  lmi.entry(4, 4).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(5, 5).add_product(neg1, In, Prho, In);
  lmi.entry(5, 6).add_product(PolyMatrix::scalar(-sqeps), In, R, In);
  lmi.entry(6, 6).add_product(neg1, In, R, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  GridSpec rho_grid = pd_grid(sys.box, opts.grid_rho);
  AffineBlockExpr qb({n});
  qb.entry(0, 0).add_product(In, Qc, In);
  qb.entry(0, 0).add_integral(kernel.lambda.scaled(-1.0), In, Qtheta, In, sys.box);
  prog.add_psd_on_grid(std::move(qb), Sense::GreaterEqual, rho_grid, 0.0, "Q-integral");
  AffineBlockExpr rb({n});
  rb.entry(0, 0).add_product(PolyMatrix::scalar(lambda_hat), In, R, In);
  rb.entry(0, 0).add_integral(kernel.lambda.scaled(-1.0), In, Rtheta, In, sys.box);
  prog.add_psd_on_grid(std::move(rb), Sense::GreaterEqual, rho_grid, 0.0, "R-integral");

  add_pd_constraint(prog, vP, n, rho_grid, opts.margin_pd, "P-pd");
  add_pd_constraint(prog, vQ, n, rho_grid, opts.margin_pd, "Q-pd");
  add_pd_constraint(prog, vR, n, rho_grid, opts.margin_pd, "R-pd");
  add_pd_constraint(prog, vQc, n, rho_grid, opts.margin_pd, "Qcal-pd");
  prog.add_integral_zero(vZ, sys.box);
  prog.minimize_scalar(sg);
  return sp;
}

SynthesisProgram build_thm3(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                            const SynthesisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_thm3: h must be nonnegative");
  if (sys.nu < 1) throw std::invalid_argument("build_thm3: synthesis needs a control input");
  const int n = sys.n, nw = sys.nw, nz = sys.nz, nu = sys.nu;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  check_degree_budget(std::max({lam_dt + opts.deg_P, opts.deg_Z_theta}),
                      std::max({opts.deg_P, lam_dr + opts.deg_P, sysdeg + opts.deg_Y,
                                opts.deg_Z_rho}),
                      opts.max_poly_degree, "build_thm3");

  SynthesisProgram sp;
  sp.theorem = 3;
  sp.h = h;
  sp.opts = opts;
  sp.box = sys.box;
  LmiProgram& prog = sp.prog;

  const int vP = prog.add_mat_var({"Pt", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Zt", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Qt", n, n, VarSet::none(), 0, 0, true});
  const int vR = prog.add_mat_var({"Rt", n, n, VarSet::none(), 0, 0, true});
  const int vX = prog.add_mat_var({"Xt", n, n, VarSet::none(), 0, 0, false});
  const int vY = prog.add_mat_var({"Y", nu, n, VarSet::of_rho(), 0, opts.deg_Y, false});
  const int vYd = prog.add_mat_var({"Yd", nu, n, VarSet::of_rho(), 0, opts.deg_Y, false});
  const int sg = prog.add_scalar_var({"g", 0.0});

  const PolyMatrix In = PolyMatrix::identity(n);
  const PolyMatrix neg1 = PolyMatrix::scalar(-1.0);
  const PolyMatrix delta = PolyMatrix::scalar(1.0) + kernel.lambda_bar.scaled(2.0 * h);
  const PolyMatrix mulam = kernel.lambda.scaled(kernel.mu_box);
  const VarAt Pt{vP, Var::Rho, false};
  const VarAt Pt_theta{vP, Var::Theta, false};
  const VarAt Zt{vZ, Var::Rho, false};
  const VarAt Qt{vQ, Var::Rho, false};
  const VarAt Rt{vR, Var::Rho, false};
  const VarAt X{vX, Var::Rho, false};
  const VarAt Xtr{vX, Var::Rho, true};
  const VarAt Y{vY, Var::Rho, false};
  const VarAt Ytr{vY, Var::Rho, true};
  const VarAt Yd{vYd, Var::Rho, false};
  const VarAt Ydtr{vYd, Var::Rho, true};

  AffineBlockExpr lmi({n, n, n, nw, nz, n, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(neg1, In, X, In);
  e00.add_product(neg1, In, Xtr, In);
  auto& e01 = lmi.entry(0, 1);  // Pt + A Xt + B Y
  e01.add_product(In, Pt, In);
  e01.add_product(sys.A, X, In);
  e01.add_product(sys.B, Y, In);
  auto& e02 = lmi.entry(0, 2);  // Ad Xt + B Yd
  e02.add_product(sys.Ad, X, In);
  e02.add_product(sys.B, Yd, In);
  lmi.entry(0, 3).constant = sys.E;
  lmi.entry(0, 5).add_product(In, X, In);
  lmi.entry(0, 6).add_product(PolyMatrix::scalar(h), In, Rt, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(mulam, In, Pt_theta, In);
  e11.add_product(mulam.scaled(-1.0), In, Pt, In);
  e11.add_product(neg1, In, Pt, In);
  e11.add_product(In, Zt, In);
  e11.add_product(delta, In, Qt, In);
  e11.add_product(neg1, In, Rt, In);
  lmi.entry(1, 2).add_product(In, Rt, In);
  auto& e14 = lmi.entry(1, 4);  // [C Xt + D Y]'
  e14.add_product(In, Xtr, sys.C.transpose());
  e14.add_product(In, Ytr, sys.D.transpose());
  auto& e22 = lmi.entry(2, 2);
  e22.add_product(neg1, In, Qt, In);
  e22.add_product(neg1, In, Rt, In);
  auto& e24 = lmi.entry(2, 4);  // [Cd Xt + D Yd]'
  e24.add_product(In, Xtr, sys.Cd.transpose());
  e24.add_product(In, Ydtr, sys.D.transpose());
  lmi.entry(3, 3).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(3, 4).constant = sys.F.transpose();
  lmi.entry(4, 4).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(5, 5).add_product(neg1, In, Pt, In);
  lmi.entry(5, 6).add_product(PolyMatrix::scalar(-h), In, Rt, In);
  lmi.entry(6, 6).add_product(neg1, In, Rt, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  add_pd_constraint(prog, vP, n, pd_grid(sys.box, opts.grid_rho), opts.margin_pd, "Pt-pd");
  add_pd_constraint(prog, vQ, n, GridSpec{}, opts.margin_pd, "Qt-pd");
  add_pd_constraint(prog, vR, n, GridSpec{}, opts.margin_pd, "Rt-pd");
  prog.add_integral_zero(vZ, sys.box);
  prog.minimize_scalar(sg);
  return sp;
}

SynthesisProgram build_thm4(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                            double lambda_hat, const SynthesisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_thm4: h must be nonnegative");
  if (!(lambda_hat > 0.0)) throw std::invalid_argument("build_thm4: lambda_hat must be positive");
  if (sys.nu < 1) throw std::invalid_argument("build_thm4: synthesis needs a control input");
  const int n = sys.n, nw = sys.nw, nz = sys.nz, nu = sys.nu;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  check_degree_budget(
      std::max({lam_dt + opts.deg_P, lam_dt + opts.deg_Q, lam_dt + opts.deg_R, opts.deg_Z_theta}),
      std::max({opts.deg_P, opts.deg_R, lam_dr + opts.deg_P, sysdeg + opts.deg_Y, opts.deg_Qcal,
                opts.deg_Z_rho}),
      opts.max_poly_degree, "build_thm4");

  const double eps = h * h + lambda_hat * h * h * h / 2.0;
  const double sqeps = std::sqrt(eps);

  SynthesisProgram sp;
  sp.theorem = 4;
  sp.h = h;
  sp.lambda_hat = lambda_hat;
  sp.opts = opts;
  sp.box = sys.box;
  LmiProgram& prog = sp.prog;

  const int vP = prog.add_mat_var({"Pt", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Zt", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Qt", n, n, VarSet::of_rho(), 0, opts.deg_Q, true});
  const int vR = prog.add_mat_var({"Rt", n, n, VarSet::of_rho(), 0, opts.deg_R, true});
  const int vQc = prog.add_mat_var({"Qcalt", n, n, VarSet::of_rho(), 0, opts.deg_Qcal, true});
  const int vX = prog.add_mat_var({"Xt", n, n, VarSet::none(), 0, 0, false});
  const int vY = prog.add_mat_var({"Y", nu, n, VarSet::of_rho(), 0, opts.deg_Y, false});
  const int vYd = prog.add_mat_var({"Yd", nu, n, VarSet::of_rho(), 0, opts.deg_Y, false});
  const int sg = prog.add_scalar_var({"g", 0.0});

  const PolyMatrix In = PolyMatrix::identity(n);
  const PolyMatrix neg1 = PolyMatrix::scalar(-1.0);
  const PolyMatrix mulam = kernel.lambda.scaled(kernel.mu_box);
  const VarAt Pt{vP, Var::Rho, false};
  const VarAt Pt_theta{vP, Var::Theta, false};
  const VarAt Zt{vZ, Var::Rho, false};
  const VarAt Qt{vQ, Var::Rho, false};
  const VarAt Qt_theta{vQ, Var::Theta, false};
  const VarAt Rt{vR, Var::Rho, false};
  const VarAt Rt_theta{vR, Var::Theta, false};
  const VarAt Qct{vQc, Var::Rho, false};
  const VarAt X{vX, Var::Rho, false};
  const VarAt Xtr{vX, Var::Rho, true};
  const VarAt Y{vY, Var::Rho, false};
  const VarAt Ytr{vY, Var::Rho, true};
  const VarAt Yd{vYd, Var::Rho, false};
  const VarAt Ydtr{vYd, Var::Rho, true};

  AffineBlockExpr lmi({n, n, n, nw, nz, n, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(neg1, In, X, In);
  e00.add_product(neg1, In, Xtr, In);
  auto& e01 = lmi.entry(0, 1);
  e01.add_product(In, Pt, In);
  e01.add_product(sys.A, X, In);
  e01.add_product(sys.B, Y, In);
  auto& e02 = lmi.entry(0, 2);
  e02.add_product(sys.Ad, X, In);
  e02.add_product(sys.B, Yd, In);
  lmi.entry(0, 3).constant = sys.E;
  lmi.entry(0, 5).add_product(In, X, In);
  lmi.entry(0, 6).add_product(PolyMatrix::scalar(sqeps), In, Rt, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(mulam, In, Pt_theta, In);
  e11.add_product(mulam.scaled(-1.0), In, Pt, In);
  e11.add_product(neg1, In, Pt, In);
  e11.add_product(In, Zt, In);
  e11.add_product(In, Qt, In);
  e11.add_product(PolyMatrix::scalar(h), In, Qct, In);
  e11.add_product(neg1, In, Rt, In);
  lmi.entry(1, 2).add_product(In, Rt, In);
  auto& e14 = lmi.entry(1, 4);
  e14.add_product(In, Xtr, sys.C.transpose());
  e14.add_product(In, Ytr, sys.D.transpose());
  auto& e22 = lmi.entry(2, 2);
  e22.add_product(neg1, In, Qt, In);
  e22.add_product(neg1, In, Rt, In);
  auto& e24 = lmi.entry(2, 4);
  e24.add_product(In, Xtr, sys.Cd.transpose());
  e24.add_product(In, Ydtr, sys.D.transpose());
  lmi.entry(3, 3).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(3, 4).constant = sys.F.transpose();
  lmi.entry(4, 4).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(5, 5).add_product(neg1, In, Pt, In);
  lmi.entry(5, 6).add_product(PolyMatrix::scalar(-sqeps), In, Rt, In);
  lmi.entry(6, 6).add_product(neg1, In, Rt, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  GridSpec rho_grid = pd_grid(sys.box, opts.grid_rho);
  AffineBlockExpr qb({n});
  qb.entry(0, 0).add_product(In, Qct, In);
  qb.entry(0, 0).add_integral(kernel.lambda.scaled(-1.0), In, Qt_theta, In, sys.box);
  prog.add_psd_on_grid(std::move(qb), Sense::GreaterEqual, rho_grid, 0.0, "Qt-integral");
  AffineBlockExpr rb({n});
  rb.entry(0, 0).add_product(PolyMatrix::scalar(lambda_hat), In, Rt, In);
  rb.entry(0, 0).add_integral(kernel.lambda.scaled(-1.0), In, Rt_theta, In, sys.box);
  prog.add_psd_on_grid(std::move(rb), Sense::GreaterEqual, rho_grid, 0.0, "Rt-integral");

  add_pd_constraint(prog, vP, n, rho_grid, opts.margin_pd, "Pt-pd");
  add_pd_constraint(prog, vQ, n, rho_grid, opts.margin_pd, "Qt-pd");
  add_pd_constraint(prog, vR, n, rho_grid, opts.margin_pd, "Rt-pd");
  add_pd_constraint(prog, vQc, n, rho_grid, opts.margin_pd, "Qcalt-pd");
  prog.add_integral_zero(vZ, sys.box);
  prog.minimize_scalar(sg);
  return sp;
}

SynthesisResult solve_synthesis(const SynthesisProgram& sp, const SolveSettings& settings) {
  SynthesisResult out;
  out.report = lower_and_solve(sp.prog, settings);
  if (out.report.status != SolveReport::Status::Optimal) return out;

  SynthesisCertificate cert;
  cert.theorem = sp.theorem;
  cert.gamma = std::sqrt(std::max(0.0, out.report.values.scalars.at("g")));
  cert.h = sp.h;
  cert.lambda_hat = sp.lambda_hat;
  cert.values = out.report.values;
  cert.grid_rho = sp.opts.grid_rho;
  cert.grid_theta = sp.opts.grid_theta;
  cert.margin_strict = sp.opts.margin_strict;
  cert.margin_pd = sp.opts.margin_pd;
  cert.train_residual = out.report.train_residual;
  cert.verify_residual = out.report.verify_residual;

  const char* xname = (sp.theorem >= 3) ? "Xt" : "X";
  Eigen::MatrixXd Xval = cert.values.mats.at(xname).eval(EvalPoint{});
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xval);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  cert.cond_X = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(smin >= 1e-8 * smax)) {
    out.report.warnings.push_back("slack matrix nearly singular (cond " +
                                  std::to_string(cert.cond_X) + ")");
  }
  out.certificate = std::move(cert);
  return out;
}

Controller recover_controller(const SynthesisCertificate& cert, double cond_cap) {
  if (cert.theorem < 3) {
    throw std::invalid_argument("recover_controller: only the synthesis programs carry gains");
  }
  if (!(cert.cond_X <= cond_cap)) {
    throw std::runtime_error("recover_controller: slack matrix condition number " +
                             std::to_string(cert.cond_X) + " exceeds the cap " +
                             std::to_string(cond_cap));
  }
  Eigen::MatrixXd Xval = cert.values.mats.at("Xt").eval(EvalPoint{});
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xval);
  Eigen::MatrixXd Xinv = lu.inverse();

  auto times_xinv = [&](const PolyMatrix& Ypoly) {
    PolyMatrix out(Ypoly.rows(), Ypoly.cols(), Ypoly.vars());
    for (const auto& [m, c] : Ypoly.terms()) out.add_term(m, c * Xinv);
    return out;
  };
  Controller ctrl;
  ctrl.K = times_xinv(cert.values.mats.at("Y"));
  ctrl.Kd = times_xinv(cert.values.mats.at("Yd"));
  ctrl.gamma = cert.gamma;
  ctrl.cond_X = cert.cond_X;
  ctrl.theorem = cert.theorem;
  ctrl.grid_rho = cert.grid_rho;
  ctrl.grid_theta = cert.grid_theta;
  ctrl.margin_strict = cert.margin_strict;
  return ctrl;
}

LpvDelaySystem close_loop(const LpvDelaySystem& sys, const Controller& ctrl) {
  if (ctrl.K.rows() != sys.nu || ctrl.K.cols() != sys.n || ctrl.Kd.rows() != sys.nu ||
      ctrl.Kd.cols() != sys.n) {
    throw std::invalid_argument("close_loop: controller dimensions do not match the plant");
  }
  LpvDelaySystem cl = sys;
  cl.A = sys.A + sys.B * ctrl.K;
  cl.Ad = sys.Ad + sys.B * ctrl.Kd;
  cl.C = sys.C + sys.D * ctrl.K;
  cl.Cd = sys.Cd + sys.D * ctrl.Kd;
  cl.nu = 0;
  cl.B = PolyMatrix::zero(sys.n, 0);
  cl.D = PolyMatrix::zero(sys.nz, 0);
  return cl;
}

void save_controller(const Controller& ctrl, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_controller: cannot open " + path);
  os << "lpvjump-controller 1\n";
  os << "theorem " << ctrl.theorem << "\n";
  os << "gamma " << format_double(ctrl.gamma) << "\n";
  os << "cond_X " << format_double(ctrl.cond_X) << "\n";
  os << "grid_rho " << ctrl.grid_rho << "\n";
  os << "grid_theta " << ctrl.grid_theta << "\n";
  os << "margin_strict " << format_double(ctrl.margin_strict) << "\n";
  write_polymatrix(os, "K", ctrl.K);
  write_polymatrix(os, "Kd", ctrl.Kd);
  os << "end\n";
}

Controller load_controller(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_controller: cannot open " + path);
  std::string tok;
  is >> tok;
  if (tok != "lpvjump-controller") throw std::runtime_error("load_controller: bad magic");
  int version = 0;
  is >> version;
  Controller ctrl;
  bool have_k = false, have_kd = false;
  while (is >> tok) {
    if (tok == "end") break;
    if (tok == "theorem") {
      is >> ctrl.theorem;
    } else if (tok == "gamma") {
      is >> ctrl.gamma;
    } else if (tok == "cond_X") {
      is >> ctrl.cond_X;
    } else if (tok == "grid_rho") {
      is >> ctrl.grid_rho;
    } else if (tok == "grid_theta") {
      is >> ctrl.grid_theta;
    } else if (tok == "margin_strict") {
      is >> ctrl.margin_strict;
    } else if (tok == "mat") {
      std::string name;
      PolyMatrix pm = read_polymatrix(is, name);
      if (name == "K") {
        ctrl.K = std::move(pm);
        have_k = true;
      } else if (name == "Kd") {
        ctrl.Kd = std::move(pm);
        have_kd = true;
      } else {
        throw std::runtime_error("load_controller: unexpected matrix '" + name + "'");
      }
    } else {
      throw std::runtime_error("load_controller: unexpected token '" + tok + "'");
    }
  }
  if (!have_k || !have_kd) throw std::runtime_error("load_controller: missing K or Kd");
  return ctrl;
}

}  // namespace lpvjump
