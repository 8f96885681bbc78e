#pragma once

#include "lpvjump/model.hpp"
#include "lpvjump/sdp.hpp"

#include <optional>

namespace lpvjump {

struct AnalysisOptions {
  int deg_P{1};
  int deg_Z_theta{1};
  int deg_Z_rho{1};
  int deg_Q{1};     // parameter-dependent variables (second theorem only)
  int deg_R{1};
  int deg_Qcal{1};
  int grid_rho{50};
  int grid_theta{50};
  double margin_strict{1e-7};
  double margin_pd{1e-6};
  int max_poly_degree{4};
};

/// A built stability/performance program plus the metadata needed to turn a
/// solution into a certificate.
struct AnalysisProgram {
  LmiProgram prog;
  int theorem{1};
  double h{0.0};
  double lambda_hat{0.0};
  AnalysisOptions opts;
  ParamBox box;
};

/// Theorem-1 program: partially parameter-dependent functional. Variables
/// P(rho), Z(theta,rho), constant Q, R, and g = gamma^2.
AnalysisProgram build_thm1(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                           const AnalysisOptions& opts = {});

/// Theorem-2 program: fully parameter-dependent functional with the integral
/// constraints on Q and R and epsilon = h^2 + lambda_hat h^3 / 2.
AnalysisProgram build_thm2(const LpvDelaySystem& sys, const JumpKernel& kernel, double h,
                           double lambda_hat, const AnalysisOptions& opts = {});

struct AnalysisCertificate {
  int theorem{1};
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
};

struct AnalysisResult {
  SolveReport report;
  std::optional<AnalysisCertificate> certificate;

  bool feasible() const { return certificate.has_value(); }
};

/// epsilon = h^2 + lambda_hat h^3 / 2 entering the second-family programs.
inline double thm2_epsilon(double h, double lambda_hat) {
  return h * h + lambda_hat * h * h * h / 2.0;
}

/// Minimizes g = gamma^2 and packages the certificate (absent when the
/// program is infeasible).
AnalysisResult min_gamma(const AnalysisProgram& ap, const SolveSettings& settings = {});

/// Golden-section search over lambda_hat in [lo, hi] minimizing the certified
/// gamma of the second-family analysis program; infeasible points count as
/// +infinity.
AnalysisResult min_gamma_over_lambda_hat(const LpvDelaySystem& sys, const JumpKernel& kernel,
                                         double h, double lo, double hi,
                                         const AnalysisOptions& opts = {},
                                         const SolveSettings& settings = {}, int iters = 10);

void save_certificate(const AnalysisCertificate& cert, const std::string& path);
AnalysisCertificate load_certificate(const std::string& path);

}  // namespace lpvjump
