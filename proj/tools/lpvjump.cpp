// Command-line front end: analyze / synthesize / simulate / sweep over
// system-description files.

#include "CLI11.hpp"

#include "lpvjump/analysis.hpp"
#include "lpvjump/desc.hpp"
#include "lpvjump/io.hpp"
#include "lpvjump/sdp.hpp"
#include "lpvjump/sim.hpp"
#include "lpvjump/synthesis.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <thread>

using namespace lpvjump;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

struct CommonSolve {
  int grid = 50;
  int grid_theta = -1;  // defaults to grid
  int degree = 1;
  double margin = 1e-7;
  double pd_margin = 1e-6;
  std::string dump_conic;
  bool verbose = false;

  int theta() const { return grid_theta > 0 ? grid_theta : grid; }
};

void add_common_options(CLI::App* cmd, CommonSolve& c) {
  cmd->add_option("--deg", c.degree, "polynomial degree of the decision variables");
  cmd->add_option("--grid", c.grid, "rho grid points");
  cmd->add_option("--grid-theta", c.grid_theta, "theta grid points (default: --grid)");
  cmd->add_option("--margin", c.margin, "strictness margin");
  cmd->add_option("--pd-margin", c.pd_margin, "positive-definiteness margin");
  cmd->add_option("--dump-conic", c.dump_conic, "dump the lowered cone problem to a file");
  cmd->add_flag("--verbose", c.verbose, "solver iteration log");
}

SolveSettings make_settings(const CommonSolve& c) {
  SolveSettings st;
  st.verbose = c.verbose;
  if (!c.dump_conic.empty()) st.dump_path = c.dump_conic;
  if (const char* tol = std::getenv("LPVJUMP_SOLVER_TOL")) {
    char* end = nullptr;
    double v = std::strtod(tol, &end);
    if (end && *end == '\0' && v > 0.0) {
      st.feas_tol = v;
      st.gap_tol = v;
    } else {
      std::fprintf(stderr, "warning: ignoring malformed LPVJUMP_SOLVER_TOL\n");
    }
  }
  return st;
}

AnalysisOptions analysis_options(const CommonSolve& c) {
  AnalysisOptions o;
  o.deg_P = o.deg_Z_theta = o.deg_Z_rho = o.deg_Q = o.deg_R = o.deg_Qcal = c.degree;
  o.grid_rho = c.grid;
  o.grid_theta = c.theta();
  o.margin_strict = c.margin;
  o.margin_pd = c.pd_margin;
  return o;
}

SynthesisOptions synthesis_options(const CommonSolve& c) {
  SynthesisOptions o;
  o.deg_P = o.deg_Z_theta = o.deg_Z_rho = o.deg_Q = o.deg_R = o.deg_Qcal = o.deg_Y = c.degree;
  o.grid_rho = c.grid;
  o.grid_theta = c.theta();
  o.margin_strict = c.margin;
  o.margin_pd = c.pd_margin;
  return o;
}

int load_and_validate(const std::string& path, SystemDescription& sd) {
  try {
    sd = load_description(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  }
  ValidationReport rep = validate(sd.sys, sd.kernel, sd.delay, sd.history);
  if (!rep.ok) {
    std::fprintf(stderr, "error: description failed validation\n%s\n", rep.to_string().c_str());
    return kExitParse;
  }
  return kExitOk;
}

double default_lambda_hat(const SystemDescription& sd) {
  ValidationReport rep = validate(sd.sys, sd.kernel, sd.delay);
  return rep.lambda_bar_sup + 0.005;
}

int report_solve_failure(const SolveReport& rep) {
  if (rep.status == SolveReport::Status::Infeasible) {
    std::printf("infeasible: %s\n", rep.message.c_str());
    return kExitInfeasible;
  }
  std::printf("solver failure: %s\n", rep.message.c_str());
  return kExitSolver;
}

void print_warnings(const SolveReport& rep) {
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_analyze(const std::string& desc_path, int theorem, std::optional<double> h_opt,
                std::optional<double> lambda_hat_opt, bool lambda_hat_search,
                const CommonSolve& common, const std::string& out) {
  SystemDescription sd;
  if (int rc = load_and_validate(desc_path, sd); rc != kExitOk) return rc;
  const double h = h_opt.value_or(sd.sys.h);
  SolveSettings st = make_settings(common);
  AnalysisOptions opts = analysis_options(common);

  auto t0 = std::chrono::steady_clock::now();
  AnalysisResult res;
  if (theorem == 1) {
    res = min_gamma(build_thm1(sd.sys, sd.kernel, h, opts), st);
  } else if (lambda_hat_search) {
    double base = lambda_hat_opt.value_or(default_lambda_hat(sd));
    res = min_gamma_over_lambda_hat(sd.sys, sd.kernel, h, std::max(1e-6, 0.2 * base), 5.0 * base,
                                    opts, st);
  } else {
    double lambda_hat = lambda_hat_opt.value_or(default_lambda_hat(sd));
    if (!lambda_hat_opt) {
      std::printf("note: lambda-hat defaulted to sup lambda_bar + 0.005 = %.9g\n", lambda_hat);
    }
    res = min_gamma(build_thm2(sd.sys, sd.kernel, h, lambda_hat, opts), st);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  print_warnings(res.report);
  if (!res.certificate) return report_solve_failure(res.report);

  const AnalysisCertificate& cert = *res.certificate;
  std::printf("theorem %d  h %.9g  gamma %.9g\n", cert.theorem, cert.h, cert.gamma);
  if (theorem == 2) std::printf("lambda_hat %.9g\n", cert.lambda_hat);
  std::printf("residual train %.3e  verify %.3e\n", cert.train_residual, cert.verify_residual);
  std::printf("iterations %d  time %.2fs\n", res.report.iterations, secs);
  if (!out.empty()) {
    save_certificate(cert, out);
    std::printf("certificate written to %s\n", out.c_str());
  }
  return kExitOk;
}

int cmd_synthesize(const std::string& desc_path, int theorem, std::optional<double> h_opt,
                   std::optional<double> lambda_hat_opt, const CommonSolve& common,
                   const std::string& out, std::string cert_out) {
  SystemDescription sd;
  if (int rc = load_and_validate(desc_path, sd); rc != kExitOk) return rc;
  if (sd.sys.nu < 1) {
    std::fprintf(stderr, "error: synthesis needs a control input (nu >= 1)\n");
    return kExitParse;
  }
  const double h = h_opt.value_or(sd.sys.h);
  SolveSettings st = make_settings(common);
  SynthesisOptions opts = synthesis_options(common);

  auto t0 = std::chrono::steady_clock::now();
  SynthesisResult res;
  if (theorem == 3) {
    res = solve_synthesis(build_thm3(sd.sys, sd.kernel, h, opts), st);
  } else {
    double lambda_hat = lambda_hat_opt.value_or(default_lambda_hat(sd));
    if (!lambda_hat_opt) {
      std::printf("note: lambda-hat defaulted to sup lambda_bar + 0.005 = %.9g\n", lambda_hat);
    }
    res = solve_synthesis(build_thm4(sd.sys, sd.kernel, h, lambda_hat, opts), st);
  }
  print_warnings(res.report);
  if (!res.certificate) return report_solve_failure(res.report);

  Controller ctrl;
  try {
    ctrl = recover_controller(*res.certificate, opts.cond_cap);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  std::printf("theorem %d  h %.9g  gamma %.9g  cond(X) %.3g\n", res.certificate->theorem, h,
              res.certificate->gamma, res.certificate->cond_X);

  // independent closed-loop certification before anything is written
  LpvDelaySystem cl = close_loop(sd.sys, ctrl);
  AnalysisResult recert = min_gamma(build_thm1(cl, sd.kernel, h, analysis_options(common)), st);
  if (!recert.certificate) {
    std::fprintf(stderr, "error: closed-loop re-certification failed: %s\n",
                 recert.report.message.c_str());
    return kExitSolver;
  }
  std::printf("closed-loop analysis gamma %.9g (synthesis bound %.9g)\n",
              recert.certificate->gamma, res.certificate->gamma);

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("time %.2fs\n", secs);

  if (!out.empty()) {
    save_controller(ctrl, out);
    std::printf("controller written to %s\n", out.c_str());
    if (cert_out.empty()) cert_out = out + ".cert";
  }
  if (!cert_out.empty()) {
    save_certificate(*recert.certificate, cert_out);
    std::printf("closed-loop certificate written to %s\n", cert_out.c_str());
  }
  return kExitOk;
}

int cmd_simulate(const std::string& desc_path, const std::string& controller_path, int runs,
                 std::optional<double> dt_opt, double horizon, std::uint64_t seed,
                 const std::string& w_text, const std::string& out) {
  SystemDescription sd;
  if (int rc = load_and_validate(desc_path, sd); rc != kExitOk) return rc;

  std::optional<Controller> ctrl;
  if (!controller_path.empty()) {
    try {
      ctrl = load_controller(controller_path);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitParse;
    }
  }

  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.seed = seed;
  cfg.runs = runs;
  cfg.dt = dt_opt.value_or(sd.sys.h > 0.0 ? sd.sys.h / 20.0 : horizon / 2000.0);
  if (!w_text.empty()) {
    try {
      cfg.w_signal = Expr::parse(w_text);
    } catch (const ExprParseError& e) {
      std::fprintf(stderr, "error: --w: %s\n", e.what());
      return kExitParse;
    }
    if (cfg.w_signal.uses_r()) {
      std::fprintf(stderr, "error: --w: input signals may only use t\n");
      return kExitParse;
    }
  }

  try {
    if (runs == 1) {
      Trajectory tr =
          integrate(sd.sys, ctrl ? &*ctrl : nullptr, sd.delay, sd.history, sd.kernel, cfg, 0);
      if (!out.empty()) write_trajectory_csv(tr, out);
      std::printf("run 0: %zu samples, %zu jumps, diverged %d\n", tr.times.size(),
                  tr.jump_times.size(), tr.diverged ? 1 : 0);
      if (tr.diverged) std::printf("divergence at t %.9g\n", tr.divergence_time);
    } else {
      MeanSquareSeries ms = mc_mean_square(sd.sys, ctrl ? &*ctrl : nullptr, sd.delay, sd.history,
                                           sd.kernel, cfg);
      if (!out.empty()) write_mean_square_csv(ms, out);
      std::printf("runs %d  E|x(0)|^2 %.9g  E|x(T)|^2 %.9g  decay %d  divergent %d\n", ms.runs,
                  ms.msq.front(), ms.msq.back(), ms.decay_flag ? 1 : 0, ms.divergent_runs);
      if (!ms.statistical) std::printf("note: fewer than 30 runs; estimates are noisy\n");
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  }
  if (!out.empty()) std::printf("csv written to %s\n", out.c_str());
  return kExitOk;
}

struct SweepRow {
  double value = 0.0;
  std::vector<std::optional<double>> gammas;  // one per theorem
};

int cmd_sweep(const std::string& desc_path, const std::string& vary, double lo, double hi,
              int points, const std::vector<int>& theorems, std::optional<double> h_opt,
              double lambda_hat_delta, const CommonSolve& common, const std::string& out,
              int jobs) {
  SystemDescription sd;
  if (int rc = load_and_validate(desc_path, sd); rc != kExitOk) return rc;
  if (points < 1) {
    std::fprintf(stderr, "error: --points must be positive\n");
    return kExitParse;
  }
  for (int th : theorems) {
    if (th < 1 || th > 4) {
      std::fprintf(stderr, "error: --theorems entries must be 1..4\n");
      return kExitParse;
    }
    if (th >= 3 && sd.sys.nu < 1) {
      std::fprintf(stderr, "error: theorem %d needs a control input\n", th);
      return kExitParse;
    }
  }
  SolveSettings st = make_settings(common);

  std::vector<double> values(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    values[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }

  auto solve_point = [&](double value, int theorem) -> std::optional<double> {
    double h = h_opt.value_or(sd.sys.h);
    JumpKernel kernel = sd.kernel;
    if (vary == "h") {
      h = value;
    } else {
      kernel = constant_kernel(value, sd.sys.box);
    }
    double lambda0 =
        (vary == "lambda0") ? value : validate(sd.sys, kernel, sd.delay).lambda_bar_sup;
    double lambda_hat = lambda0 + lambda_hat_delta;
    try {
      switch (theorem) {
        case 1: {
          auto r = min_gamma(build_thm1(sd.sys, kernel, h, analysis_options(common)), st);
          return r.certificate ? std::optional<double>(r.certificate->gamma) : std::nullopt;
        }
        case 2: {
          auto r =
              min_gamma(build_thm2(sd.sys, kernel, h, lambda_hat, analysis_options(common)), st);
          return r.certificate ? std::optional<double>(r.certificate->gamma) : std::nullopt;
        }
        case 3: {
          auto r = solve_synthesis(build_thm3(sd.sys, kernel, h, synthesis_options(common)), st);
          return r.certificate ? std::optional<double>(r.certificate->gamma) : std::nullopt;
        }
        default: {
          auto r = solve_synthesis(
              build_thm4(sd.sys, kernel, h, lambda_hat, synthesis_options(common)), st);
          return r.certificate ? std::optional<double>(r.certificate->gamma) : std::nullopt;
        }
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: sweep point %.9g theorem %d: %s\n", value, theorem,
                   e.what());
      return std::nullopt;
    }
  };

  // worker pool over (point, theorem) tasks; rows are written in sweep order
  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows[i].value = values[i];
    rows[i].gammas.resize(theorems.size());
  }
  struct Task {
    std::size_t row;
    std::size_t th;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t t = 0; t < theorems.size(); ++t) tasks.push_back({i, t});
  }
  std::atomic<std::size_t> next{0};
  unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs)
                              : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(tasks.size()));
  std::vector<std::thread> pool;
  for (unsigned wi = 0; wi < workers; ++wi) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t k = next.fetch_add(1);
        if (k >= tasks.size()) return;
        const Task& task = tasks[k];
        rows[task.row].gammas[task.th] = solve_point(rows[task.row].value, theorems[task.th]);
      }
    });
  }
  for (auto& th : pool) th.join();

  std::FILE* f = out.empty() ? stdout : std::fopen(out.c_str(), "wb");
  if (!f) {
    std::fprintf(stderr, "error: cannot open %s\n", out.c_str());
    return kExitParse;
  }
  std::fprintf(f, "%s", vary.c_str());
  for (int th : theorems) std::fprintf(f, ",gamma_thm%d,feasible_thm%d", th, th);
  std::fprintf(f, "\n");
  for (const auto& row : rows) {
    std::fprintf(f, "%.9g", row.value);
    for (const auto& g : row.gammas) {
      if (g) {
        std::fprintf(f, ",%.9g,1", *g);
      } else {
        std::fprintf(f, ",nan,0");
      }
    }
    std::fprintf(f, "\n");
  }
  if (!out.empty()) {
    std::fclose(f);
    std::printf("csv written to %s\n", out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certification, synthesis and simulation for LPV time-delay systems with "
               "Poissonian parameter jumps"};
  app.require_subcommand(1);
  // --h is a domain flag (delay bound), so help is --help only
  app.set_help_flag("--help", "print help");
  // repeated options take the last occurrence so the experiment scripts'
  // defaults can be overridden by appending flags
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* analyze = app.add_subcommand("analyze", "certify mean-square stability and L2 gain");
  analyze->set_help_flag("--help", "print help");
  std::string a_desc, a_out;
  int a_theorem = 1;
  std::optional<double> a_h, a_lh;
  bool a_search = false;
  CommonSolve a_common;
  analyze->add_option("desc", a_desc, "system description file")->required();
  analyze->add_option("--theorem", a_theorem, "analysis family (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  analyze->add_option("--h", a_h, "delay bound override");
  analyze->add_option("--lambda-hat", a_lh, "lambda-hat for theorem 2");
  analyze->add_flag("--lambda-hat-search", a_search, "golden-section search over lambda-hat");
  analyze->add_option("--out", a_out, "certificate output file");
  add_common_options(analyze, a_common);

  auto* synth = app.add_subcommand("synthesize", "design a gain-scheduled state feedback");
  synth->set_help_flag("--help", "print help");
  std::string s_desc, s_out = "controller.txt", s_cert;
  int s_theorem = 3;
  std::optional<double> s_h, s_lh;
  CommonSolve s_common;
  synth->add_option("desc", s_desc, "system description file")->required();
  synth->add_option("--theorem", s_theorem, "synthesis family (3 or 4)")
      ->check(CLI::IsMember({3, 4}));
  synth->add_option("--h", s_h, "delay bound override");
  synth->add_option("--lambda-hat", s_lh, "lambda-hat for theorem 4");
  synth->add_option("--out", s_out, "controller output file");
  synth->add_option("--cert-out", s_cert, "closed-loop certificate output file");
  add_common_options(synth, s_common);

  auto* sim = app.add_subcommand("simulate", "sample paths / Monte-Carlo mean square");
  sim->set_help_flag("--help", "print help");
  std::string m_desc, m_ctrl, m_w, m_out;
  int m_runs = 1;
  std::optional<double> m_dt;
  double m_horizon = 10.0;
  std::uint64_t m_seed = 0;
  sim->add_option("desc", m_desc, "system description file")->required();
  sim->add_option("--controller", m_ctrl, "controller file from 'synthesize'");
  sim->add_option("--runs", m_runs, "number of Monte-Carlo runs");
  sim->add_option("--dt", m_dt, "integration step (default h/20)");
  sim->add_option("--horizon", m_horizon, "simulation horizon");
  sim->add_option("--seed", m_seed, "base seed; run k uses stream (seed, k)");
  sim->add_option("--w", m_w, "disturbance expression in t, e.g. 'H(t)-H(t-2)'");
  sim->add_option("--out", m_out, "CSV output file");

  auto* sweep = app.add_subcommand("sweep", "gamma against h or lambda0");
  sweep->set_help_flag("--help", "print help");
  std::string w_desc, w_vary, w_out;
  std::vector<double> w_range;
  double w_delta = 0.005;
  int w_points = 10, w_jobs = 0;
  std::vector<int> w_theorems{1, 2};
  std::optional<double> w_h;
  CommonSolve w_common;
  sweep->add_option("desc", w_desc, "system description file")->required();
  sweep->add_option("--vary", w_vary, "swept quantity")
      ->required()
      ->check(CLI::IsMember({"h", "lambda0"}));
  sweep->add_option("--range", w_range, "sweep range LO HI")->expected(2)->required();
  sweep->add_option("--points", w_points, "number of sweep points");
  sweep->add_option("--theorems", w_theorems, "theorem list, e.g. --theorems 1 2");
  sweep->add_option("--h", w_h, "fixed delay bound for lambda0 sweeps");
  sweep->add_option("--lambda-hat-delta", w_delta, "lambda-hat = lambda0 + delta");
  sweep->add_option("--out", w_out, "CSV output file");
  sweep->add_option("--jobs", w_jobs, "worker threads (default: hardware)");
  add_common_options(sweep, w_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitParse;
  }

  try {
    if (analyze->parsed()) {
      return cmd_analyze(a_desc, a_theorem, a_h, a_lh, a_search, a_common, a_out);
    }
    if (synth->parsed()) {
      return cmd_synthesize(s_desc, s_theorem, s_h, s_lh, s_common, s_out, s_cert);
    }
    if (sim->parsed()) {
      return cmd_simulate(m_desc, m_ctrl, m_runs, m_dt, m_horizon, m_seed, m_w, m_out);
    }
    if (sweep->parsed()) {
      return cmd_sweep(w_desc, w_vary, w_range[0], w_range[1], w_points, w_theorems, w_h,
                       w_delta, w_common, w_out, w_jobs);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
