#include "doctest.h"

#include "lpvjump/analysis.hpp"
#include "test_systems.hpp"

#include <cstdio>
#include <random>

using namespace lpvjump;

namespace {
AnalysisOptions fast_opts(int grid = 9) {
  AnalysisOptions o;
  o.grid_rho = grid;
  o.grid_theta = grid;
  return o;
}
}  // namespace

TEST_CASE("scalar H-infinity oracle: certified gamma within [1.00, 1.05]") {
  LpvDelaySystem s = scalar_hinf_plant();
  JumpKernel k = constant_kernel(0.0, s.box);
  auto ap = build_thm1(s, k, 1e-3, fast_opts(5));
  auto res = min_gamma(ap);
  REQUIRE(res.feasible());
  CHECK(res.certificate->gamma >= 1.0 - 1e-6);
  CHECK(res.certificate->gamma <= 1.05);
  CHECK(res.report.train_residual <= 1e-7);
}

TEST_CASE("zero kernel with theta-degree-zero Z forces Z to vanish") {
  LpvDelaySystem s = scalar_hinf_plant();
  JumpKernel k = constant_kernel(0.0, s.box);
  AnalysisOptions opts = fast_opts(5);
  opts.deg_Z_theta = 0;
  auto ap = build_thm1(s, k, 1e-3, opts);
  auto res = min_gamma(ap);
  REQUIRE(res.feasible());
  CHECK(res.certificate->values.mats.at("Z").max_abs_coeff() <= 1e-7);
  CHECK(res.certificate->gamma <= 1.05);
}

TEST_CASE("integral-zero exactness of the returned Z at 100 random points") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  auto res = min_gamma(build_thm1(s, k, 0.05, fast_opts(9)));
  REQUIRE(res.feasible());
  PolyMatrix zi = res.certificate->values.mats.at("Z").integrate_theta(s.box);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    CHECK(zi.eval(EvalPoint::at_rho(u(rng))).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("gamma is nondecreasing in the delay bound") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  auto r1 = min_gamma(build_thm1(s, k, 0.01, fast_opts(9)));
  auto r2 = min_gamma(build_thm1(s, k, 0.05, fast_opts(9)));
  REQUIRE(r1.feasible());
  REQUIRE(r2.feasible());
  CHECK(r2.certificate->gamma >= r1.certificate->gamma - 1e-6);
}

TEST_CASE("first-family gamma does not exceed the second-family gamma") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  auto r1 = min_gamma(build_thm1(s, k, 0.05, fast_opts(9)));
  auto r2 = min_gamma(build_thm2(s, k, 0.05, 10.005, fast_opts(9)));
  REQUIRE(r1.feasible());
  REQUIRE(r2.feasible());
  CHECK(r1.certificate->gamma <= r2.certificate->gamma + 1e-6);
}

TEST_CASE("epsilon formula: h = 0.15, lambda_hat = 10") {
  CHECK(thm2_epsilon(0.15, 10.0) == doctest::Approx(0.039375).epsilon(1e-15));
  // hand arithmetic: 0.0225 + 10 * 0.0016875
  CHECK(thm2_epsilon(0.15, 10.0) == doctest::Approx(0.0225 + 10.0 * 0.0016875).epsilon(1e-15));
}

TEST_CASE("epsilon tends to h^2 as lambda_hat vanishes") {
  CHECK(thm2_epsilon(0.1, 1e-9) == doctest::Approx(0.01).epsilon(1e-8));
}

TEST_CASE("lambda_hat must be positive for the second family") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  CHECK_THROWS_AS(build_thm2(s, k, 0.1, 0.0, fast_opts(5)), std::invalid_argument);
  CHECK_THROWS_AS(build_thm2(s, k, 0.1, -1.0, fast_opts(5)), std::invalid_argument);
}

TEST_CASE("degree budget guard rejects oversized products") {
  LpvDelaySystem s = stability_benchmark();
  PolyMatrix lam(1, 1, VarSet::both());
  lam.add_term({4, 0}, Eigen::MatrixXd::Constant(1, 1, 1.0));  // theta^4 kernel
  JumpKernel k = make_jump_kernel(lam, s.box);
  AnalysisOptions opts = fast_opts(5);
  opts.max_poly_degree = 4;
  CHECK_THROWS_AS(build_thm1(s, k, 0.05, opts), std::invalid_argument);
}

TEST_CASE("analysis of an unstable plant reports infeasibility") {
  LpvDelaySystem s = synthesis_benchmark();  // open loop is unstable
  JumpKernel k = constant_kernel(10.0, s.box);
  auto res = min_gamma(build_thm1(s, k, 0.5, fast_opts(7)));
  CHECK_FALSE(res.feasible());
  CHECK(res.report.status == SolveReport::Status::Infeasible);
}

TEST_CASE("enlarging the grid never decreases the optimum") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  auto coarse = min_gamma(build_thm1(s, k, 0.05, fast_opts(3)));
  auto fine = min_gamma(build_thm1(s, k, 0.05, fast_opts(5)));  // superset of the 3-point grid
  REQUIRE(coarse.feasible());
  REQUIRE(fine.feasible());
  CHECK(fine.certificate->gamma >= coarse.certificate->gamma - 1e-6);
}

TEST_CASE("certificates round-trip through their text format") {
  LpvDelaySystem s = scalar_hinf_plant();
  JumpKernel k = constant_kernel(0.0, s.box);
  auto res = min_gamma(build_thm1(s, k, 1e-3, fast_opts(5)));
  REQUIRE(res.feasible());
  const std::string path = "cert_roundtrip.txt";
  save_certificate(*res.certificate, path);
  AnalysisCertificate back = load_certificate(path);
  CHECK(back.theorem == res.certificate->theorem);
  CHECK(back.gamma == res.certificate->gamma);
  CHECK(back.h == res.certificate->h);
  CHECK(back.grid_rho == res.certificate->grid_rho);
  const PolyMatrix& P0 = res.certificate->values.mats.at("P");
  const PolyMatrix& P1 = back.values.mats.at("P");
  CHECK((P0 - P1).is_zero());
  CHECK(back.values.scalars.at("g") == res.certificate->values.scalars.at("g"));
  std::remove(path.c_str());
}

TEST_CASE("golden-section search over lambda_hat does not worsen the default") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  SolveSettings st;
  auto fixed = min_gamma(build_thm2(s, k, 0.05, 10.005, fast_opts(5)), st);
  auto searched = min_gamma_over_lambda_hat(s, k, 0.05, 9.0, 14.0, fast_opts(5), st, 6);
  REQUIRE(fixed.feasible());
  REQUIRE(searched.feasible());
  CHECK(searched.certificate->gamma <= fixed.certificate->gamma + 1e-4);
}
