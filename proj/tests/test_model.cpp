#include "doctest.h"

#include "lpvjump/model.hpp"
#include "test_systems.hpp"

#include <cmath>

using namespace lpvjump;

TEST_CASE("benchmark system validates and yields delta = 1 + 20h") {
  LpvDelaySystem s = stability_benchmark();
  s.h = 0.05;
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = constant_delay(0.02, s.h);
  ValidationReport rep = validate(s, k, d);
  CHECK(rep.ok);
  double delta = rep.delta.eval(EvalPoint::at_rho(0.5))(0, 0);
  CHECK(delta == doctest::Approx(1.0 + 20.0 * s.h).epsilon(1e-14));
  CHECK(rep.lambda_bar_sup == doctest::Approx(10.0));
}

TEST_CASE("negative kernel is rejected with the offending field named") {
  LpvDelaySystem s = stability_benchmark();
  // lambda(theta, rho) = theta - 2 < 0 on [0,1]^2
  PolyMatrix lam(1, 1, VarSet::both());
  lam.add_term({1, 0}, Eigen::MatrixXd::Constant(1, 1, 1.0));
  lam.add_term({0, 0}, Eigen::MatrixXd::Constant(1, 1, -2.0));
  JumpKernel k = make_jump_kernel(lam, s.box);
  ValidationReport rep = validate(s, k, constant_delay(0.02, s.h));
  CHECK_FALSE(rep.ok);
  bool kernel_flagged = false;
  for (const auto& issue : rep.issues) kernel_flagged = kernel_flagged || issue.field == "kernel";
  CHECK(kernel_flagged);
}

TEST_CASE("sinusoidal delay law stays inside [0, h]") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = make_delay_law(Expr::parse("0.5*sin(r)"), 0.5);
  // grid-maximum oracle before trusting validate
  double tau_max = 0.0;
  for (int i = 0; i <= 10000; ++i) tau_max = std::max(tau_max, 0.5 * std::sin(i / 10000.0));
  CHECK(tau_max == doctest::Approx(0.5 * std::sin(1.0)).epsilon(1e-6));
  CHECK(tau_max < 0.5);
  CHECK(validate(s, k, d).ok);

  LpvDelaySystem tight = s;
  tight.h = 0.3;
  CHECK_FALSE(validate(tight, k, make_delay_law(Expr::parse("0.5*sin(r)"), 0.3)).ok);
}

TEST_CASE("delta >= 1 whenever the kernel is nonnegative") {
  LpvDelaySystem s = stability_benchmark();
  s.h = 0.4;
  PolyMatrix lam(1, 1, VarSet::both());
  lam.add_term({1, 1}, Eigen::MatrixXd::Constant(1, 1, 6.0));  // 6 theta rho >= 0
  JumpKernel k = make_jump_kernel(lam, s.box);
  ValidationReport rep = validate(s, k, constant_delay(0.1, s.h));
  CHECK(rep.ok);
  for (int i = 0; i <= 100; ++i) {
    CHECK(rep.delta.eval(EvalPoint::at_rho(i / 100.0))(0, 0) >= 1.0 - 1e-12);
  }
}

TEST_CASE("validate is pure") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = constant_delay(0.02, s.h);
  ValidationReport r1 = validate(s, k, d);
  ValidationReport r2 = validate(s, k, d);
  CHECK(r1.ok == r2.ok);
  CHECK(r1.lambda_bar_sup == r2.lambda_bar_sup);
  CHECK((r1.delta - r2.delta).is_zero());
}

TEST_CASE("dimension mismatches are reported by field") {
  LpvDelaySystem s = stability_benchmark();
  s.E = PolyMatrix::constant(Eigen::MatrixXd::Zero(1, 1));  // should be 2x1
  JumpKernel k = constant_kernel(10.0, s.box);
  ValidationReport rep = validate(s, k, constant_delay(0.02, s.h));
  CHECK_FALSE(rep.ok);
  bool e_flagged = false;
  for (const auto& issue : rep.issues) e_flagged = e_flagged || issue.field == "E";
  CHECK(e_flagged);
}

TEST_CASE("history continuity check flags a step discontinuity") {
  LpvDelaySystem s = stability_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = constant_delay(0.02, s.h);
  InitialHistory jumpy{[](double t) {
    Eigen::VectorXd v(2);
    v << (t < -0.2 ? 0.0 : 5.0), 1.0;
    return v;
  }};
  CHECK_FALSE(validate(s, k, d, jumpy).ok);
  CHECK(validate(s, k, d, InitialHistory::constant(Eigen::VectorXd::Ones(2))).ok);
}

TEST_CASE("lambda_max envelope carries the 1.05 safety factor") {
  ParamBox box(0.0, 1.0);
  PolyMatrix lam(1, 1, VarSet::both());
  lam.add_term({1, 1}, Eigen::MatrixXd::Constant(1, 1, 6.0));
  JumpKernel k = make_jump_kernel(lam, box);
  CHECK(k.lambda_max >= 6.0);
  CHECK(k.lambda_max == doctest::Approx(6.3).epsilon(1e-9));
  CHECK(k.mu_box == doctest::Approx(1.0));
}

TEST_CASE("delay law may not depend on time") {
  CHECK_THROWS_AS(make_delay_law(Expr::parse("0.1*t"), 1.0), std::invalid_argument);
}
