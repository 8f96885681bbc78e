#pragma once

#include "lpvjump/model.hpp"
#include "lpvjump/sdp.hpp"

#include <optional>

namespace lpvjump {

struct SynthesisOptions {
  int deg_P{1};
  int deg_Z_theta{1};
  int deg_Z_rho{1};
  int deg_Q{1};     // parameter-dependent variables (second family only)
  int deg_R{1};
  int deg_Qcal{1};
  int deg_Y{1};
  int grid_rho{50};
  int grid_theta{50};
  double margin_strict{1e-7};
  double margin_pd{1e-6};
  int max_poly_degree{4};
  double cond_cap{1e8};
};

struct SynthesisProgram {
  LmiProgram prog;
  int theorem{3};  // 1/2 are used for the slack-variable analysis forms below
  double h{0.0};
  double lambda_hat{0.0};
  SynthesisOptions opts;
  ParamBox box;
};

/// Slack-variable analysis form of the first stability result (7x7 LMI with
/// full X); feasibility implies the plain form at the same gamma.
SynthesisProgram build_prop1(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                             const SynthesisOptions& opts = {});

/// Slack-variable analysis form of the second stability result.
SynthesisProgram build_prop2(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                             double lambda_hat, const SynthesisOptions& opts = {});

/// State-feedback synthesis from the first family: variables X~, P~(rho),
/// Z~(theta,rho), constant Q~, R~, gains Y(rho), Y_d(rho).
SynthesisProgram build_thm3(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                            const SynthesisOptions& opts = {});

/// State-feedback synthesis from the second family (parameter-dependent Q~,
/// R~, Qc~ with the integral constraints and epsilon scaling).
SynthesisProgram build_thm4(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                            double lambda_hat, const SynthesisOptions& opts = {});

struct SynthesisCertificate {
  int theorem{3};
  double gamma{0.0};
  double h{0.0};
  double lambda_hat{0.0};
  VariableValues values;
  int grid_rho{0};
  int grid_theta{0};
  double margin_strict{0.0};
  double margin_pd{0.0};
  double train_residual{0.0};
  double verify_residual{0.0};
  double cond_X{0.0};
};

struct SynthesisResult {
  SolveReport report;
  std::optional<SynthesisCertificate> certificate;

  bool feasible() const { return certificate.has_value(); }
};

SynthesisResult solve_synthesis(const SynthesisProgram& sp, const SolveSettings& settings = {});

/// Gain-scheduled state feedback u = K(rho) x(t) + K_d(rho) x(t - tau(rho)).
struct Controller {
  PolyMatrix K;
  PolyMatrix Kd;
  double gamma{0.0};
  double cond_X{0.0};
  int theorem{3};
  int grid_rho{0};
  int grid_theta{0};
  double margin_strict{0.0};
};

/// K = Y X~^{-1}, K_d = Y_d X~^{-1}, coefficient-wise; throws when X~ is
/// singular or its condition number exceeds cond_cap.
Controller recover_controller(const SynthesisCertificate& cert, double cond_cap = 1e8);

/// Closed loop A + B K etc. with the control channel removed (nu = 0).
LpvDelaySystem close_loop(const LpvDelaySystem& sys, const Controller& ctrl);

void save_controller(const Controller& ctrl, const std::string& path);
Controller load_controller(const std::string& path);

}  // namespace lpvjump
