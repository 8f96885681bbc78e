#include "doctest.h"

#include "lpvjump/sdp.hpp"

#include <cstdio>
#include <fstream>
#include <random>

using namespace lpvjump;

TEST_CASE("grid covers [0,1] with fifty points including endpoints") {
  auto pts = grid_points(ParamBox(0.0, 1.0), 50);
  REQUIRE(pts.size() == 50);
  CHECK(pts.front() == 0.0);
  CHECK(pts.back() == 1.0);
  CHECK(pts[1] == doctest::Approx(1.0 / 49.0).epsilon(1e-15));
}

TEST_CASE("grid endpoint and progression cases") {
  auto two = grid_points(ParamBox(0.0, 1.0), 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == 0.0);
  CHECK(two[1] == 1.0);

  auto four = grid_points(ParamBox(0.2, 0.8), 4);
  REQUIRE(four.size() == 4);
  CHECK(four[0] == doctest::Approx(0.2));
  CHECK(four[1] == doctest::Approx(0.4));
  CHECK(four[2] == doctest::Approx(0.6));
  CHECK(four[3] == doctest::Approx(0.8));

  CHECK_THROWS_AS(grid_points(ParamBox(0.0, 1.0), 1), std::invalid_argument);
}

TEST_CASE("integral-zero equalities match hand monomial integration") {
  // scalar Z of degree 1 in each variable over [0,1]:
  //   z00 + z10/2 = 0 and z01 + z11/2 = 0 (coefficients indexed (dt, dr))
  LmiProgram prog;
  int vZ = prog.add_mat_var({"Z", 1, 1, VarSet::both(), 1, 1, true});
  prog.add_integral_zero(vZ, ParamBox(0.0, 1.0));
  const auto& eqs = prog.equalities();
  REQUIRE(eqs.size() == 2);  // (#rho monomials) * dim*(dim+1)/2 = 2 * 1
  for (const auto& eq : eqs) {
    REQUIRE(eq.lhs.size() == 2);
    CHECK(eq.lhs[0].second == doctest::Approx(1.0));   // theta^0 weight
    CHECK(eq.lhs[1].second == doctest::Approx(0.5));   // theta^1 weight
    CHECK(eq.rhs == 0.0);
  }
  // unknown indices must point at (dt=0, dr) and (dt=1, dr) of the same dr
  CHECK(eqs[0].lhs[0].first == prog.unknown_index(vZ, 0, 0, 0));  // (0,0)
  CHECK(eqs[0].lhs[1].first == prog.unknown_index(vZ, 2, 0, 0));  // (1,0)
  CHECK(eqs[1].lhs[0].first == prog.unknown_index(vZ, 1, 0, 0));  // (0,1)
  CHECK(eqs[1].lhs[1].first == prog.unknown_index(vZ, 3, 0, 0));  // (1,1)
}

TEST_CASE("odd-about-midpoint Z satisfies its integral-zero rows") {
  // Z(theta, rho) = (2 theta - 1) * M integrates to zero over [0,1]
  LmiProgram prog;
  int vZ = prog.add_mat_var({"Z", 2, 2, VarSet::both(), 1, 0, true});
  prog.add_integral_zero(vZ, ParamBox(0.0, 1.0));
  Eigen::MatrixXd M(2, 2);
  M << 1.0, 0.25, 0.25, -2.0;
  // unknowns: mono 0 = theta^0 -> -M, mono 1 = theta^1 -> 2M
  Eigen::VectorXd u = Eigen::VectorXd::Zero(prog.unknown_count());
  for (int col = 0; col < 2; ++col) {
    for (int row = col; row < 2; ++row) {
      u(prog.unknown_index(vZ, 0, row, col)) = -M(row, col);
      u(prog.unknown_index(vZ, 1, row, col)) = 2.0 * M(row, col);
    }
  }
  for (const auto& eq : prog.equalities()) {
    double acc = -eq.rhs;
    for (const auto& [idx, coeff] : eq.lhs) acc += coeff * u(idx);
    CHECK(acc == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("integral-zero requires theta") {
  LmiProgram prog;
  int vP = prog.add_mat_var({"P", 2, 2, VarSet::of_rho(), 0, 1, true});
  CHECK_THROWS_AS(prog.add_integral_zero(vP, ParamBox(0.0, 1.0)), std::invalid_argument);
}

TEST_CASE("pointwise max via psd-on-grid: min g subject to rho - g <= 0 on {0,1}") {
  LmiProgram prog;
  int sg = prog.add_scalar_var({"g", 0.0});
  AffineBlockExpr e({1});
  e.entry(0, 0).constant = PolyMatrix::variable(Var::Rho);
  e.entry(0, 0).add_scalar(sg, PolyMatrix::constant(-Eigen::MatrixXd::Identity(1, 1)));
  prog.add_psd_on_grid(std::move(e), Sense::LessEqual, GridSpec{{}, {0.0, 1.0}}, 0.0, "max");
  prog.minimize_scalar(sg);
  SolveReport rep = lower_and_solve(prog);
  REQUIRE(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.values.scalars.at("g") == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bound-active scalar: minimize g subject to g >= 1") {
  LmiProgram prog;
  int sg = prog.add_scalar_var({"g", 1.0});
  // a vacuous PSD constraint keeps the cone nonempty
  AffineBlockExpr e({1});
  e.entry(0, 0).add_scalar(sg, PolyMatrix::constant(Eigen::MatrixXd::Identity(1, 1)));
  prog.add_psd_on_grid(std::move(e), Sense::GreaterEqual, GridSpec{}, 0.0, "g-psd");
  prog.minimize_scalar(sg);
  SolveReport rep = lower_and_solve(prog);
  REQUIRE(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("PD-on-grid constraint is satisfied at every grid point") {
  LmiProgram prog;
  int vP = prog.add_mat_var({"P", 2, 2, VarSet::of_rho(), 0, 1, true});
  AffineBlockExpr e({2});
  e.entry(0, 0).add_product(PolyMatrix::identity(2), VarAt{vP, Var::Rho, false},
                            PolyMatrix::identity(2));
  GridSpec grid{{}, grid_points(ParamBox(0.0, 1.0), 50)};
  prog.add_psd_on_grid(std::move(e), Sense::GreaterEqual, grid, 1e-6, "P-pd");
  SolveReport rep = lower_and_solve(prog);
  REQUIRE(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.train_residual <= 1e-7);
  const PolyMatrix& P = rep.values.mats.at("P");
  for (double rho : grid.rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P.eval(EvalPoint::at_rho(rho)));
    CHECK(eig.eigenvalues().minCoeff() >= 1e-6 - 1e-9);
  }
}

TEST_CASE("lowered data agrees with value-level evaluation") {
  // random affine block expression, compared along two independent paths:
  // h - G u from the lowering vs eval_block_expr at the same values
  std::mt19937 rng(321);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  LmiProgram prog;
  int vP = prog.add_mat_var({"P", 2, 2, VarSet::of_rho(), 0, 1, true});
  int vY = prog.add_mat_var({"Y", 1, 2, VarSet::of_rho(), 0, 1, false});
  int sg = prog.add_scalar_var({"g", std::nullopt});

  Eigen::MatrixXd Arand(2, 2);
  Arand << un(rng), un(rng), un(rng), un(rng);
  PolyMatrix A = PolyMatrix::constant(Arand) +
                 PolyMatrix::monomial(Eigen::MatrixXd::Identity(2, 2), 0, 1);
  PolyMatrix Brow = PolyMatrix::constant((Eigen::MatrixXd(2, 1) << 1.0, -0.5).finished());

  AffineBlockExpr e({2, 1});
  e.entry(0, 0).add_product(PolyMatrix::identity(2), VarAt{vP, Var::Rho, false}, A);
  e.entry(0, 0).add_product(A.transpose(), VarAt{vP, Var::Rho, false}, PolyMatrix::identity(2));
  e.entry(0, 0).add_product(PolyMatrix::variable(Var::Theta), PolyMatrix::identity(2),
                            VarAt{vP, Var::Theta, false}, PolyMatrix::identity(2));
  e.entry(0, 1).add_product(PolyMatrix::identity(2), VarAt{vY, Var::Rho, true}, PolyMatrix::identity(1));
  e.entry(0, 1).add_product(Brow, VarAt{vY, Var::Rho, false}, Brow);
  e.entry(1, 1).add_scalar(sg, PolyMatrix::scalar(-1.0));
  GridSpec grid{{0.3, 0.9}, {0.1, 0.7}};
  prog.add_psd_on_grid(e, Sense::LessEqual, grid, 1e-5, "rand");

  ConicProblem cp = lower(prog);
  Eigen::VectorXd u(prog.unknown_count());
  for (int i = 0; i < u.size(); ++i) u(i) = un(rng);

  VariableValues values;
  {
    PolyMatrix P(2, 2, VarSet::of_rho());
    for (int mo = 0; mo < 2; ++mo) {
      Eigen::MatrixXd cmat(2, 2);
      for (int col = 0; col < 2; ++col) {
        for (int row = col; row < 2; ++row) {
          cmat(row, col) = cmat(col, row) = u(prog.unknown_index(vP, mo, row, col));
        }
      }
      P.add_term(Monomial{0, mo}, cmat);
    }
    PolyMatrix Y(1, 2, VarSet::of_rho());
    for (int mo = 0; mo < 2; ++mo) {
      Eigen::MatrixXd cmat(1, 2);
      for (int col = 0; col < 2; ++col) cmat(0, col) = u(prog.unknown_index(vY, mo, 0, col));
      Y.add_term(Monomial{0, mo}, cmat);
    }
    values.mats.emplace("P", P);
    values.mats.emplace("Y", Y);
    values.scalars.emplace("g", u(prog.scalar_unknown_index(sg)));
  }

  auto points = grid.points();
  REQUIRE(cp.blocks.size() == points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ConeBlock& blk = cp.blocks[i];
    Eigen::VectorXd ua(blk.cols.size());
    for (std::size_t k = 0; k < blk.cols.size(); ++k) {
      ua(static_cast<Eigen::Index>(k)) = u(blk.cols[k]);
    }
    // sense LessEqual: s = -K - margin I, so K = -(smat(h - G u)) - margin I
    Eigen::MatrixXd K_low = -smat(Eigen::VectorXd(blk.h - blk.G * ua), blk.dim) -
                            1e-5 * Eigen::MatrixXd::Identity(blk.dim, blk.dim);
    Eigen::MatrixXd K_val = eval_block_expr(prog, prog.psd_constraints()[0].expr, points[i], values);
    CHECK((K_low - K_val).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conic dump writes the documented sparse format") {
  LmiProgram prog;
  int sg = prog.add_scalar_var({"g", 0.0});
  AffineBlockExpr e({1});
  e.entry(0, 0).add_scalar(sg, PolyMatrix::constant(Eigen::MatrixXd::Identity(1, 1)));
  e.entry(0, 0).constant = PolyMatrix::scalar(-1.0);
  prog.add_psd_on_grid(std::move(e), Sense::GreaterEqual, GridSpec{}, 0.0, "x");
  prog.minimize_scalar(sg);
  std::string path = "dump_test.conic";
  SolveSettings st;
  st.dump_path = path;
  SolveReport rep = lower_and_solve(prog, st);
  CHECK(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.objective == doctest::Approx(1.0).epsilon(1e-6));
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string magic;
  is >> magic;
  CHECK(magic == "lpvjump-conic");
  std::remove(path.c_str());
}

TEST_CASE("verification grid refinement keeps axis endpoints") {
  GridSpec g{{}, grid_points(ParamBox(0.0, 1.0), 3)};
  GridSpec fine = g.refined(4);
  REQUIRE(fine.rho.size() == 9);
  CHECK(fine.rho.front() == 0.0);
  CHECK(fine.rho.back() == 1.0);
  // original points are a subset
  CHECK(fine.rho[4] == doctest::Approx(0.5));
}
