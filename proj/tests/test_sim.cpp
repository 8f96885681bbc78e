#include "doctest.h"

#include "lpvjump/sim.hpp"
#include "test_systems.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace lpvjump;

namespace {

LpvDelaySystem pure_delay_plant(double a, double ad, double h) {
  LpvDelaySystem s;
  s.n = 1;
  s.nw = 0;
  s.nu = 0;
  s.nz = 1;
  s.A = PolyMatrix::constant(Eigen::MatrixXd::Constant(1, 1, a));
  s.Ad = PolyMatrix::constant(Eigen::MatrixXd::Constant(1, 1, ad));
  s.B = PolyMatrix::zero(1, 0);
  s.E = PolyMatrix::zero(1, 0);
  s.C = PolyMatrix::constant(Eigen::MatrixXd::Identity(1, 1));
  s.Cd = PolyMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
  s.D = PolyMatrix::zero(1, 0);
  s.F = PolyMatrix::zero(1, 0);
  s.box = ParamBox(0.0, 1.0);
  s.h = h;
  return s;
}

}  // namespace

TEST_CASE("method-of-steps closed form on [0,2] for xdot = -x(t-1)") {
  LpvDelaySystem s = pure_delay_plant(0.0, -1.0, 1.0);
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(1.0, 1.0);
  InitialHistory phi = InitialHistory::constant(Eigen::VectorXd::Ones(1));
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 2.0;
  Trajectory tr = integrate(s, nullptr, d, phi, k, cfg);
  auto exact = [](double t) { return t <= 1.0 ? 1.0 - t : 1.0 - t + 0.5 * (t - 1.0) * (t - 1.0); };
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    worst = std::max(worst, std::abs(tr.states(static_cast<Eigen::Index>(i), 0) - exact(tr.times[i])));
  }
  CHECK(worst <= 1e-5);
  CHECK(tr.jump_times.empty());
}

TEST_CASE("decoupled linear flow matches the exponential") {
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.5);
  s.n = 2;
  s.A = PolyMatrix::constant(-Eigen::MatrixXd::Identity(2, 2));
  s.Ad = PolyMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
  s.C = PolyMatrix::constant(Eigen::MatrixXd::Identity(2, 2));
  s.Cd = PolyMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
  s.nz = 2;
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.2, 0.5);
  Eigen::VectorXd x0(2);
  x0 << 1.0, -2.0;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  Trajectory tr = integrate(s, nullptr, d, InitialHistory::constant(x0), k, cfg);
  Eigen::VectorXd xf = tr.states.row(tr.states.rows() - 1);
  CHECK((xf - std::exp(-1.0) * x0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("halving dt improves the endpoint at second order or better") {
  LpvDelaySystem s = pure_delay_plant(-0.4, -0.8, 0.5);
  JumpKernel k = constant_kernel(0.0, s.box);
  // delay incommensurate with the steps so interpolation error is exercised
  DelayLaw d = constant_delay(0.31830988618, 0.5);
  InitialHistory phi = InitialHistory::constant(Eigen::VectorXd::Ones(1));
  auto endpoint = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.horizon = 2.0;
    Trajectory tr = integrate(s, nullptr, d, phi, k, cfg);
    return tr.states(tr.states.rows() - 1, 0);
  };
  double ref = endpoint(0.0005);
  double e1 = std::abs(endpoint(0.02) - ref);
  double e2 = std::abs(endpoint(0.01) - ref);
  CHECK(e2 <= e1 / 3.2);  // order two or better
}

TEST_CASE("jump gaps are exponential with the right mean, zero rate never jumps") {
  ParamBox box(0.0, 1.0);
  JumpKernel k = constant_kernel(10.0, box);
  SplitMix64 rng = SplitMix64::stream(42, 0);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_jump_time(0.5, k, rng);
  double mean = sum / n;
  double se = 0.1 / std::sqrt(double(n));
  CHECK(std::abs(mean - 0.1) <= 3.0 * se);

  JumpKernel none = constant_kernel(0.0, box);
  CHECK(std::isinf(sample_jump_time(0.3, none, rng)));
}

TEST_CASE("negative intensity is a model violation") {
  ParamBox box(0.0, 1.0);
  JumpKernel k;
  k.lambda = PolyMatrix::scalar(-1.0);
  k.lambda_bar = PolyMatrix::scalar(-1.0);
  k.mu_box = 1.0;
  k.lambda_max = 1.0;
  SplitMix64 rng = SplitMix64::stream(1, 0);
  CHECK_THROWS_AS(sample_jump_time(0.5, k, rng), std::runtime_error);
  CHECK_THROWS_AS(sample_post_jump_param(0.5, k, box, rng), std::invalid_argument);
}

TEST_CASE("constant kernel draws uniform post-jump parameters (KS at 1%)") {
  ParamBox box(0.0, 1.0);
  JumpKernel k = constant_kernel(10.0, box);
  SplitMix64 rng = SplitMix64::stream(7, 3);
  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = sample_post_jump_param(0.3, k, box, rng);
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    double f = draws[static_cast<std::size_t>(i)];
    ks = std::max(ks, std::max((i + 1.0) / n - f, f - double(i) / n));
  }
  CHECK(ks < 1.628 / std::sqrt(double(n)));
}

TEST_CASE("linear kernel draws theta with CDF theta^2 (KS at 1%)") {
  // lambda(theta, rho) = 2 theta: density 2 theta, CDF theta^2; the
  // inverse-CDF oracle sqrt(U) validates the analytic target first
  ParamBox box(0.0, 1.0);
  PolyMatrix lam(1, 1, VarSet::both());
  lam.add_term({1, 0}, Eigen::MatrixXd::Constant(1, 1, 2.0));
  JumpKernel k = make_jump_kernel(lam, box);
  const int n = 100000;
  const double crit = 1.628 / std::sqrt(double(n));

  SplitMix64 oracle_rng = SplitMix64::stream(11, 0);
  std::vector<double> oracle(n);
  for (int i = 0; i < n; ++i) oracle[static_cast<std::size_t>(i)] = std::sqrt(oracle_rng.uniform01());
  std::sort(oracle.begin(), oracle.end());
  double ks_oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    double f = oracle[static_cast<std::size_t>(i)] * oracle[static_cast<std::size_t>(i)];
    ks_oracle = std::max(ks_oracle, std::max((i + 1.0) / n - f, f - double(i) / n));
  }
  CHECK(ks_oracle < crit);

  SplitMix64 rng = SplitMix64::stream(11, 1);
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = sample_post_jump_param(0.5, k, box, rng);
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    double f = draws[static_cast<std::size_t>(i)] * draws[static_cast<std::size_t>(i)];
    ks = std::max(ks, std::max((i + 1.0) / n - f, f - double(i) / n));
  }
  CHECK(ks < crit);
}

TEST_CASE("separable kernel: lambda = 6 theta (1-theta) (1+rho) has mean gap 1/2 at rho=1") {
  ParamBox box(0.0, 1.0);
  PolyMatrix lam(1, 1, VarSet::both());
  // 6 theta (1-theta) (1+rho) = 6(theta - theta^2)(1 + rho)
  lam.add_term({1, 0}, Eigen::MatrixXd::Constant(1, 1, 6.0));
  lam.add_term({2, 0}, Eigen::MatrixXd::Constant(1, 1, -6.0));
  lam.add_term({1, 1}, Eigen::MatrixXd::Constant(1, 1, 6.0));
  lam.add_term({2, 1}, Eigen::MatrixXd::Constant(1, 1, -6.0));
  JumpKernel k = make_jump_kernel(lam, box);
  // hand integration: int 6 theta(1-theta) dtheta = 1, so lambda_bar = 1 + rho
  CHECK(k.lambda_bar.eval(EvalPoint::at_rho(0.0))(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k.lambda_bar.eval(EvalPoint::at_rho(1.0))(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  SplitMix64 rng = SplitMix64::stream(5, 0);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_jump_time(1.0, k, rng);
  CHECK(std::abs(sum / n - 0.5) <= 3.0 * 0.5 / std::sqrt(double(n)));
}

TEST_CASE("trajectories are deterministic in (seed, run) and continuous") {
  LpvDelaySystem s = synthesis_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = make_delay_law(Expr::parse("0.5*sin(r)"), 0.5);
  InitialHistory phi = InitialHistory::constant((Eigen::VectorXd(2) << -1.0, 2.0).finished());
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 2.0;
  cfg.seed = 123;
  Trajectory a = integrate(s, nullptr, d, phi, k, cfg, 4);
  Trajectory b = integrate(s, nullptr, d, phi, k, cfg, 4);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.jump_times == b.jump_times);
  Trajectory c = integrate(s, nullptr, d, phi, k, cfg, 5);
  CHECK(c.jump_times != a.jump_times);

  // continuity: adjacent samples move by O(dt) despite the jumps
  double bound = 0.0;
  for (Eigen::Index i = 1; i < a.states.rows(); ++i) {
    bound = std::max(bound, (a.states.row(i) - a.states.row(i - 1)).norm());
  }
  double state_scale = a.states.cwiseAbs().maxCoeff();
  CHECK(bound <= 50.0 * cfg.dt * std::max(1.0, state_scale));
  CHECK_FALSE(a.jump_times.empty());
  // rho is constant between jumps: the recorded path takes few distinct values
  CHECK(a.params[0] >= 0.0);
  CHECK(a.params[0] <= 1.0);
}

TEST_CASE("divergence cutoff truncates and freezes the trajectory") {
  LpvDelaySystem s = pure_delay_plant(10.0, 0.0, 0.0);  // xdot = 10 x
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  SimConfig cfg;
  cfg.dt = 0.003;
  cfg.horizon = 3.5;
  Trajectory tr = integrate(s, nullptr, d, InitialHistory::constant(Eigen::VectorXd::Ones(1)), k, cfg);
  CHECK(tr.diverged);
  CHECK(tr.divergence_time < 3.0);
  CHECK(tr.states(tr.states.rows() - 1, 0) == tr.states(tr.states.rows() - 2, 0));
}

TEST_CASE("dt guards") {
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.5);
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.1, 0.5);
  InitialHistory phi = InitialHistory::constant(Eigen::VectorXd::Ones(1));
  SimConfig cfg;
  cfg.dt = 0.2;  // > h/10
  cfg.horizon = 1.0;
  CHECK_THROWS_AS(integrate(s, nullptr, d, phi, k, cfg), std::invalid_argument);
}

TEST_CASE("zero-variance Monte Carlo reproduces the deterministic square norm") {
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.0);
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  InitialHistory phi = InitialHistory::constant(Eigen::VectorXd::Ones(1));
  SimConfig cfg;
  cfg.dt = 0.005;
  cfg.horizon = 5.0;
  cfg.runs = 30;
  MeanSquareSeries ms = mc_mean_square(s, nullptr, d, phi, k, cfg);
  CHECK(ms.msq.front() == doctest::Approx(1.0));
  // E|x(t)|^2 = exp(-2t)
  std::size_t mid = ms.times.size() / 2;
  CHECK(ms.msq[mid] == doctest::Approx(std::exp(-2.0 * ms.times[mid])).epsilon(1e-5));
  CHECK(ms.decay_flag);  // exp(-10) < 1e-4
  CHECK(ms.divergent_runs == 0);
  CHECK(ms.statistical);
}

TEST_CASE("jumping but uniformly contracting flow decays in mean square") {
  // xdot = (-1 + rho) x with rho in [0, 0.5]: worst flow rate is -0.5
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.0);
  s.A = PolyMatrix::constant(Eigen::MatrixXd::Constant(1, 1, -1.0)) +
        PolyMatrix::monomial(Eigen::MatrixXd::Identity(1, 1), 0, 1);
  s.box = ParamBox(0.0, 0.5);
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  SimConfig cfg;
  cfg.dt = 0.012;
  cfg.horizon = 12.0;
  cfg.runs = 30;
  cfg.seed = 9;
  MeanSquareSeries ms =
      mc_mean_square(s, nullptr, d, InitialHistory::constant(Eigen::VectorXd::Ones(1)), k, cfg);
  CHECK(ms.decay_flag);
}

TEST_CASE("identity map has empirical gain one") {
  // stable dynamics, C = 0, F = I: z = w exactly
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.0);
  s.nw = 1;
  s.E = PolyMatrix::constant(Eigen::MatrixXd::Constant(1, 1, 1.0));
  s.C = PolyMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
  s.F = PolyMatrix::constant(Eigen::MatrixXd::Identity(1, 1));
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  SimConfig cfg;
  cfg.dt = 0.004;
  cfg.horizon = 4.0;
  cfg.runs = 3;
  cfg.w_signal = Expr::parse("H(t)-H(t-2)");
  GainEstimate ge = empirical_l2_gain(s, nullptr, d, k, cfg);
  CHECK(ge.ratio == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("single step input cannot achieve the supremum gain") {
  // 1/(s+1) has H-infinity norm 1; a finite step keeps the ratio below it
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.0);
  s.nw = 1;
  s.E = PolyMatrix::constant(Eigen::MatrixXd::Constant(1, 1, 1.0));
  s.C = PolyMatrix::constant(Eigen::MatrixXd::Identity(1, 1));
  s.F = PolyMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  SimConfig cfg;
  cfg.dt = 0.004;
  cfg.horizon = 12.0;
  cfg.runs = 1;
  cfg.w_signal = Expr::parse("H(t)-H(t-2)");
  GainEstimate ge = empirical_l2_gain(s, nullptr, d, k, cfg);
  CHECK(ge.ratio < 1.0);
  CHECK(ge.ratio > 0.1);
}

TEST_CASE("gain estimation requires a nonzero disturbance") {
  LpvDelaySystem s = pure_delay_plant(-1.0, 0.0, 0.0);
  JumpKernel k = constant_kernel(0.0, s.box);
  DelayLaw d = constant_delay(0.0, 0.0);
  SimConfig cfg;
  cfg.dt = 0.004;
  cfg.horizon = 1.0;
  CHECK_THROWS_AS(empirical_l2_gain(s, nullptr, d, k, cfg), std::invalid_argument);
}

TEST_CASE("history buffer interpolates, extrapolates and enforces monotone time") {
  HistoryBuffer hb(1.0);
  hb.push(0.0, Eigen::VectorXd::Constant(1, 0.0));
  hb.push(1.0, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(hb.at(0.5)(0) == doctest::Approx(1.0));
  CHECK(hb.at(1.25)(0) == doctest::Approx(2.5));  // linear extrapolation
  CHECK_THROWS_AS(hb.push(0.5, Eigen::VectorXd::Constant(1, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(hb.at(-5.0), std::runtime_error);
}

TEST_CASE("CSV writers emit deterministic, well-formed files") {
  LpvDelaySystem s = synthesis_benchmark();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = make_delay_law(Expr::parse("0.5*sin(r)"), 0.5);
  InitialHistory phi = InitialHistory::constant((Eigen::VectorXd(2) << -1.0, 2.0).finished());
  SimConfig cfg;
  cfg.dt = 0.05;
  cfg.horizon = 1.0;
  Trajectory tr = integrate(s, nullptr, d, phi, k, cfg);
  write_trajectory_csv(tr, "traj_a.csv");
  write_trajectory_csv(tr, "traj_b.csv");
  std::ifstream fa("traj_a.csv"), fb("traj_b.csv");
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.rfind("t,x1,x2,rho,tau,z1,jump_flag\n", 0) == 0);
  CHECK(sa.find("\r") == std::string::npos);
  // one header plus one row per grid point
  CHECK(std::count(sa.begin(), sa.end(), '\n') == static_cast<long>(tr.times.size()) + 1);
  std::remove("traj_a.csv");
  std::remove("traj_b.csv");
}
