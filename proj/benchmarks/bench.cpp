#include <benchmark/benchmark.h>

#include "lpvjump/analysis.hpp"
#include "lpvjump/sim.hpp"

#include <random>

using namespace lpvjump;

namespace {

LpvDelaySystem benchmark_system() {
  LpvDelaySystem s;
  s.n = 2;
  s.nw = 1;
  s.nu = 0;
  s.nz = 1;
  Eigen::MatrixXd A0(2, 2), A1(2, 2), Ad0(2, 2), Ad1(2, 2);
  A0 << 0, 1, -2, 1;
  A1 << 0, 0, -1, 0;
  Ad0 << -1, 0, -1, -1;
  Ad1 << 0, 0, -1, 0;
  PolyMatrix A(2, 2, VarSet::of_rho());
  A.add_term({0, 0}, A0);
  A.add_term({0, 1}, A1);
  PolyMatrix Ad(2, 2, VarSet::of_rho());
  Ad.add_term({0, 0}, Ad0);
  Ad.add_term({0, 1}, Ad1);
  s.A = A;
  s.Ad = Ad;
  s.B = PolyMatrix::zero(2, 0);
  Eigen::MatrixXd C(1, 2);
  C << 1, 0;
  s.C = PolyMatrix::constant(C);
  s.Cd = s.C;
  s.E = PolyMatrix::constant(C.transpose());
  s.D = PolyMatrix::zero(1, 0);
  s.F = PolyMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
  s.box = ParamBox(0.0, 1.0);
  s.h = 0.5;
  return s;
}

void PolyMatrixMultiply(benchmark::State& state) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PolyMatrix a(4, 4, VarSet::both()), b(4, 4, VarSet::both());
  for (int kt = 0; kt <= 2; ++kt) {
    for (int kr = 0; kr <= 2; ++kr) {
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(4, 4, [&]() { return u(rng); });
      a.add_term({kt, kr}, m);
      b.add_term({kt, kr}, m.transpose());
    }
  }
  for (auto _ : state) {
    PolyMatrix c = a * b;
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(PolyMatrixMultiply);

void LowerFirstFamily(benchmark::State& state) {
  LpvDelaySystem s = benchmark_system();
  JumpKernel k = constant_kernel(10.0, s.box);
  AnalysisOptions opts;
  opts.grid_rho = opts.grid_theta = static_cast<int>(state.range(0));
  AnalysisProgram ap = build_thm1(s, k, 0.1, opts);
  for (auto _ : state) {
    ConicProblem cp = lower(ap.prog);
    benchmark::DoNotOptimize(cp);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(LowerFirstFamily)->Arg(15)->Arg(30)->Arg(50)->Complexity();

void SolveFirstFamily(benchmark::State& state) {
  LpvDelaySystem s = benchmark_system();
  JumpKernel k = constant_kernel(10.0, s.box);
  AnalysisOptions opts;
  opts.grid_rho = opts.grid_theta = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto res = min_gamma(build_thm1(s, k, 0.1, opts));
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(SolveFirstFamily)->Arg(9)->Arg(15)->Unit(benchmark::kMillisecond);

void SimulateSamplePath(benchmark::State& state) {
  LpvDelaySystem s = benchmark_system();
  JumpKernel k = constant_kernel(10.0, s.box);
  DelayLaw d = make_delay_law(Expr::parse("0.3*sin(r)"), 0.5);
  InitialHistory phi = InitialHistory::constant((Eigen::VectorXd(2) << 1.0, -1.0).finished());
  SimConfig cfg;
  cfg.dt = 0.005;
  cfg.horizon = 10.0;
  int run = 0;
  for (auto _ : state) {
    Trajectory tr = integrate(s, nullptr, d, phi, k, cfg, run++);
    benchmark::DoNotOptimize(tr);
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(SimulateSamplePath)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
