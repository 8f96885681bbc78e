#include "lpvjump/analysis.hpp"

#include "lpvjump/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
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

AnalysisProgram build_thm1(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                           const AnalysisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_thm1: h must be nonnegative");
  const int n = sys.n, nw = sys.nw, nz = sys.nz;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  const int bar_dr = kernel.lambda_bar.degree(Var::Rho);
  check_degree_budget(std::max({lam_dt + opts.deg_P, opts.deg_Z_theta}),
                      std::max({opts.deg_P + sysdeg, lam_dr + opts.deg_P, bar_dr, opts.deg_Z_rho}),
                      opts.max_poly_degree, "build_thm1");

  AnalysisProgram ap;
  ap.theorem = 1;
  ap.h = h;
  ap.opts = opts;
  ap.box = sys.box;
  LmiProgram& prog = ap.prog;

  const int vP = prog.add_mat_var({"P", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Z", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Q", n, n, VarSet::none(), 0, 0, true});
  const int vR = prog.add_mat_var({"R", n, n, VarSet::none(), 0, 0, true});
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

  AffineBlockExpr lmi({n, n, nw, nz, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(In, Prho, sys.A);                   // P A
  e00.add_product(sys.A.transpose(), Prho, In);       // A' P
  e00.add_product(mulam, In, Ptheta, In);             // mu(B) lambda P(theta)
  e00.add_product(mulam.scaled(-1.0), In, Prho, In);  // -mu(B) lambda P(rho)
  e00.add_product(In, Z, In);
  e00.add_product(delta, In, Q, In);                  // delta(rho) Q
  e00.add_product(neg1, In, R, In);
  auto& e01 = lmi.entry(0, 1);
  e01.add_product(In, Prho, sys.Ad);
  e01.add_product(In, R, In);
  lmi.entry(0, 2).add_product(In, Prho, sys.E);
  lmi.entry(0, 3).constant = sys.C.transpose();
  lmi.entry(0, 4).add_product(PolyMatrix::scalar(h), sys.A.transpose(), R, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(neg1, In, Q, In);
  e11.add_product(neg1, In, R, In);
  lmi.entry(1, 3).constant = sys.Cd.transpose();
  lmi.entry(1, 4).add_product(PolyMatrix::scalar(h), sys.Ad.transpose(), R, In);
  lmi.entry(2, 2).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(2, 3).constant = sys.F.transpose();
  lmi.entry(2, 4).add_product(PolyMatrix::scalar(h), sys.E.transpose(), R, In);
  lmi.entry(3, 3).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(4, 4).add_product(neg1, In, R, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  add_pd_constraint(prog, vP, n, pd_grid(sys.box, opts.grid_rho), opts.margin_pd, "P-pd");
  add_pd_constraint(prog, vQ, n, GridSpec{}, opts.margin_pd, "Q-pd");
  add_pd_constraint(prog, vR, n, GridSpec{}, opts.margin_pd, "R-pd");
  prog.add_integral_zero(vZ, sys.box);
  prog.minimize_scalar(sg);
  return ap;
}

AnalysisProgram build_thm2(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                           double lambda_hat, const AnalysisOptions& opts) {
  if (h < 0.0) throw std::invalid_argument("build_thm2: h must be nonnegative");
  if (!(lambda_hat > 0.0)) throw std::invalid_argument("build_thm2: lambda_hat must be positive");
  const int n = sys.n, nw = sys.nw, nz = sys.nz;
  const int sysdeg = system_degree(sys);
  const int lam_dt = kernel.lambda.degree(Var::Theta);
  const int lam_dr = kernel.lambda.degree(Var::Rho);
  check_degree_budget(
      std::max({lam_dt + opts.deg_P, lam_dt + opts.deg_Q, lam_dt + opts.deg_R, opts.deg_Z_theta}),
      std::max({opts.deg_P + sysdeg, opts.deg_R + sysdeg, lam_dr + opts.deg_P, opts.deg_Qcal,
                opts.deg_Z_rho}),
      opts.max_poly_degree, "build_thm2");

  const double sqeps = std::sqrt(thm2_epsilon(h, lambda_hat));

  AnalysisProgram ap;
  ap.theorem = 2;
  ap.h = h;
  ap.lambda_hat = lambda_hat;
  ap.opts = opts;
  ap.box = sys.box;
  LmiProgram& prog = ap.prog;

  const int vP = prog.add_mat_var({"P", n, n, VarSet::of_rho(), 0, opts.deg_P, true});
  const int vZ =
      prog.add_mat_var({"Z", n, n, VarSet::both(), opts.deg_Z_theta, opts.deg_Z_rho, true});
  const int vQ = prog.add_mat_var({"Q", n, n, VarSet::of_rho(), 0, opts.deg_Q, true});
  const int vR = prog.add_mat_var({"R", n, n, VarSet::of_rho(), 0, opts.deg_R, true});
  const int vQc = prog.add_mat_var({"Qcal", n, n, VarSet::of_rho(), 0, opts.deg_Qcal, true});
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

  AffineBlockExpr lmi({n, n, nw, nz, n});
  auto& e00 = lmi.entry(0, 0);
  e00.add_product(In, Prho, sys.A);
  e00.add_product(sys.A.transpose(), Prho, In);
  e00.add_product(mulam, In, Ptheta, In);
  e00.add_product(mulam.scaled(-1.0), In, Prho, In);
  e00.add_product(In, Z, In);
  e00.add_product(In, Q, In);
  e00.add_product(PolyMatrix::scalar(h), In, Qc, In);  // h Qcal(rho)
  e00.add_product(neg1, In, R, In);
  auto& e01 = lmi.entry(0, 1);
  e01.add_product(In, Prho, sys.Ad);
  e01.add_product(In, R, In);
  lmi.entry(0, 2).add_product(In, Prho, sys.E);
  lmi.entry(0, 3).constant = sys.C.transpose();
  lmi.entry(0, 4).add_product(PolyMatrix::scalar(sqeps), sys.A.transpose(), R, In);
  auto& e11 = lmi.entry(1, 1);
  e11.add_product(neg1, In, Q, In);
  e11.add_product(neg1, In, R, In);
  lmi.entry(1, 3).constant = sys.Cd.transpose();
  lmi.entry(1, 4).add_product(PolyMatrix::scalar(sqeps), sys.Ad.transpose(), R, In);
  lmi.entry(2, 2).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(nw, nw)));
  lmi.entry(2, 3).constant = sys.F.transpose();
  lmi.entry(2, 4).add_product(PolyMatrix::scalar(sqeps), sys.E.transpose(), R, In);
  lmi.entry(3, 3).constant = PolyMatrix::constant(-Eigen::MatrixXd::Identity(nz, nz));
  lmi.entry(4, 4).add_product(neg1, In, R, In);

  GridSpec main_grid{grid_points(sys.box, opts.grid_theta), grid_points(sys.box, opts.grid_rho)};
  prog.add_psd_on_grid(std::move(lmi), Sense::LessEqual, main_grid, opts.margin_strict, "lmi");

  GridSpec rho_grid = pd_grid(sys.box, opts.grid_rho);

  // Qcal(rho) - int_B lambda(theta,rho) Q(theta) dtheta >= 0
  AffineBlockExpr qb({n});
  qb.entry(0, 0).add_product(In, Qc, In);
  qb.entry(0, 0).add_integral(kernel.lambda.scaled(-1.0), In, Qtheta, In, sys.box);
  prog.add_psd_on_grid(std::move(qb), Sense::GreaterEqual, rho_grid, 0.0, "Q-integral");

  // lambda_hat R(rho) - int_B lambda(theta,rho) R(theta) dtheta >= 0
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
  return ap;
}

AnalysisResult min_gamma(const AnalysisProgram& ap, const SolveSettings& settings) {
  AnalysisResult out;
  out.report = lower_and_solve(ap.prog, settings);
  if (out.report.status != SolveReport::Status::Optimal) return out;
  AnalysisCertificate cert;
  cert.theorem = ap.theorem;
  cert.gamma = std::sqrt(std::max(0.0, out.report.values.scalars.at("g")));
  cert.h = ap.h;
  cert.lambda_hat = ap.lambda_hat;
  cert.values = out.report.values;
  cert.grid_rho = ap.opts.grid_rho;
  cert.grid_theta = ap.opts.grid_theta;
  cert.margin_strict = ap.opts.margin_strict;
  cert.margin_pd = ap.opts.margin_pd;
  cert.train_residual = out.report.train_residual;
  cert.verify_residual = out.report.verify_residual;
  out.certificate = std::move(cert);
  return out;
}

AnalysisResult min_gamma_over_lambda_hat(const LpvDelaySystem& sys, const JumpKernel& kernel,
                                         double h, double lo, double hi,
                                         const AnalysisOptions& opts,
                                         const SolveSettings& settings, int iters) {
  if (!(lo > 0.0) || !(hi > lo)) {
    throw std::invalid_argument("min_gamma_over_lambda_hat: need 0 < lo < hi");
  }
  auto eval = [&](double lh) -> AnalysisResult {
    return min_gamma(build_thm2(sys, kernel, h, lh, opts), settings);
  };
  auto score = [](const AnalysisResult& r) {
    return r.certificate ? r.certificate->gamma : std::numeric_limits<double>::infinity();
  };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  AnalysisResult r1 = eval(x1), r2 = eval(x2);
  for (int it = 0; it < iters; ++it) {
    if (score(r1) <= score(r2)) {
      b = x2;
      x2 = x1;
      r2 = std::move(r1);
      x1 = b - phi * (b - a);
      r1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      r1 = std::move(r2);
      x2 = a + phi * (b - a);
      r2 = eval(x2);
    }
  }
  return score(r1) <= score(r2) ? std::move(r1) : std::move(r2);
}

void save_certificate(const AnalysisCertificate& cert, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_certificate: cannot open " + path);
  os << "lpvjump-certificate 1\n";
  os << "theorem " << cert.theorem << "\n";
  os << "gamma " << format_double(cert.gamma) << "\n";
  os << "h " << format_double(cert.h) << "\n";
  os << "lambda_hat " << format_double(cert.lambda_hat) << "\n";
  os << "grid_rho " << cert.grid_rho << "\n";
  os << "grid_theta " << cert.grid_theta << "\n";
  os << "margin_strict " << format_double(cert.margin_strict) << "\n";
  os << "margin_pd " << format_double(cert.margin_pd) << "\n";
  os << "train_residual " << format_double(cert.train_residual) << "\n";
  os << "verify_residual " << format_double(cert.verify_residual) << "\n";
  for (const auto& [name, value] : cert.values.scalars) {
    os << "scalar " << name << " " << format_double(value) << "\n";
  }
  for (const auto& [name, pm] : cert.values.mats) write_polymatrix(os, name, pm);
  os << "end\n";
}

AnalysisCertificate load_certificate(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_certificate: cannot open " + path);
  std::string tok;
  is >> tok;
  if (tok != "lpvjump-certificate") throw std::runtime_error("load_certificate: bad magic");
  int version = 0;
  is >> version;
  AnalysisCertificate cert;
  while (is >> tok) {
    if (tok == "end") break;
    if (tok == "theorem") {
      is >> cert.theorem;
    } else if (tok == "gamma") {
      is >> cert.gamma;
    } else if (tok == "h") {
      is >> cert.h;
    } else if (tok == "lambda_hat") {
      is >> cert.lambda_hat;
    } else if (tok == "grid_rho") {
      is >> cert.grid_rho;
    } else if (tok == "grid_theta") {
      is >> cert.grid_theta;
    } else if (tok == "margin_strict") {
      is >> cert.margin_strict;
    } else if (tok == "margin_pd") {
      is >> cert.margin_pd;
    } else if (tok == "train_residual") {
      is >> cert.train_residual;
    } else if (tok == "verify_residual") {
      is >> cert.verify_residual;
    } else if (tok == "scalar") {
      std::string name;
      double v = 0.0;
      is >> name >> v;
      cert.values.scalars[name] = v;
    } else if (tok == "mat") {
      std::string name;
      PolyMatrix pm = read_polymatrix(is, name);
      cert.values.mats.emplace(std::move(name), std::move(pm));
    } else {
      throw std::runtime_error("load_certificate: unexpected token '" + tok + "'");
    }
  }
  return cert;
}

}  // namespace lpvjump
