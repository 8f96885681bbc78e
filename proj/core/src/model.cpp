#include "lpvjump/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lpvjump {

JumpKernel make_jump_kernel(const PolyMatrix& lambda, const ParamBox& box) {
  if (lambda.rows() != 1 || lambda.cols() != 1) {
    throw std::invalid_argument("make_jump_kernel: lambda must be 1x1");
  }
  JumpKernel k;
  k.lambda = lambda;
  k.mu_box = box.measure();
  if (lambda.vars().contains(Var::Theta)) {
    k.lambda_bar = lambda.integrate_theta(box);
  } else {
    // constant in theta: the integral is just mu(B) * lambda(rho)
    k.lambda_bar = lambda.scaled(k.mu_box);
  }
  // grid sup over the closed box, with a safety factor for the rejection
  // sampler envelope
  const int pts = 1001;
  double sup = 0.0;
  for (int i = 0; i < pts; ++i) {
    double th = box.lo + box.measure() * i / (pts - 1);
    for (int j = 0; j < pts; ++j) {
      double rho = box.lo + box.measure() * j / (pts - 1);
      sup = std::max(sup, lambda.eval(EvalPoint::at(th, rho))(0, 0));
    }
  }
  k.lambda_max = 1.05 * sup;
  return k;
}

JumpKernel constant_kernel(double lambda0, const ParamBox& box) {
  return make_jump_kernel(PolyMatrix::scalar(lambda0), box);
}

DelayLaw make_delay_law(const Expr& expr, double h) {
  if (expr.uses_t()) {
    throw std::invalid_argument("DelayLaw: delay expressions may only use r");
  }
  return DelayLaw{expr, h};
}

DelayLaw constant_delay(double tau, double h) {
  return make_delay_law(Expr::parse(std::to_string(tau)), h);
}

InitialHistory InitialHistory::constant(const Eigen::VectorXd& x0) {
  return InitialHistory{[x0](double) { return x0; }};
}

InitialHistory InitialHistory::from_exprs(const std::vector<Expr>& components) {
  for (const auto& e : components) {
    if (e.uses_r()) {
      throw std::invalid_argument("InitialHistory: history expressions may only use t");
    }
  }
  return InitialHistory{[components](double t) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = components[i].eval_t(t);
    }
    return v;
  }};
}

void ValidationReport::add(const std::string& field, const std::string& message) {
  ok = false;
  issues.push_back({field, message});
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  if (ok) {
    os << "valid";
  } else {
    os << "invalid:";
    for (const auto& i : issues) os << "\n  [" << i.field << "] " << i.message;
  }
  return os.str();
}

namespace {

void check_shape(ValidationReport& rep, const char* name, const PolyMatrix& m,
                 Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    rep.add(name, os.str());
  }
  if (m.vars().contains(Var::Theta)) {
    rep.add(name, "system matrices may depend on rho only");
  }
}

}  // namespace

ValidationReport validate(const LpvDelaySystem& sys, const JumpKernel& kernel,
                          const DelayLaw& delay, const ValidationOptions& opts) {
  ValidationReport rep;
  const int pts = opts.grid_points;

  if (!(sys.box.lo < sys.box.hi)) rep.add("box", "requires lo < hi");
  if (sys.n <= 0) rep.add("n", "state dimension must be positive");
  if (sys.nw < 0 || sys.nu < 0 || sys.nz < 0) rep.add("dims", "negative dimension");
  if (!(sys.h >= 0.0)) rep.add("h", "delay bound must satisfy h >= 0");

  check_shape(rep, "A", sys.A, sys.n, sys.n);
  check_shape(rep, "Ad", sys.Ad, sys.n, sys.n);
  check_shape(rep, "B", sys.B, sys.n, sys.nu);
  check_shape(rep, "E", sys.E, sys.n, sys.nw);
  check_shape(rep, "C", sys.C, sys.nz, sys.n);
  check_shape(rep, "Cd", sys.Cd, sys.nz, sys.n);
  check_shape(rep, "D", sys.D, sys.nz, sys.nu);
  check_shape(rep, "F", sys.F, sys.nz, sys.nw);

  if (kernel.lambda.rows() != 1 || kernel.lambda.cols() != 1) {
    rep.add("kernel", "lambda must be scalar (1x1)");
    rep.delta = PolyMatrix::scalar(1.0);
    return rep;
  }

  const double lo = sys.box.lo, w = sys.box.measure();
  auto grid_at = [&](int i) { return lo + w * i / (pts - 1); };

  // kernel nonnegativity and envelope on the validation grid
  double kernel_min = 0.0, kernel_sup = 0.0;
  bool kernel_neg = false, envelope_bad = false;
  for (int i = 0; i < pts; ++i) {
    for (int j = 0; j < pts; ++j) {
      double v = kernel.lambda.eval(EvalPoint::at(grid_at(i), grid_at(j)))(0, 0);
      kernel_min = std::min(kernel_min, v);
      kernel_sup = std::max(kernel_sup, v);
      if (v < 0.0) kernel_neg = true;
      if (v > kernel.lambda_max) envelope_bad = true;
    }
  }
  if (kernel_neg) {
    std::ostringstream os;
    os << "lambda(theta,rho) negative on the validation grid (min " << kernel_min << ")";
    rep.add("kernel", os.str());
  }
  if (envelope_bad) rep.add("kernel.lambda_max", "envelope below a grid value of lambda");

  // lambda_bar must be the exact theta-integral of lambda
  PolyMatrix expected_bar = kernel.lambda.vars().contains(Var::Theta)
                                ? kernel.lambda.integrate_theta(sys.box)
                                : kernel.lambda.scaled(sys.box.measure());
  PolyMatrix diff = kernel.lambda_bar - expected_bar;
  diff.prune();
  if (!diff.is_zero()) rep.add("kernel.lambda_bar", "not the exact theta-integral of lambda");

  double bar_sup = 0.0, bar_min = 0.0;
  for (int j = 0; j < pts; ++j) {
    double v = kernel.lambda_bar.eval(EvalPoint::at_rho(grid_at(j)))(0, 0);
    bar_sup = std::max(bar_sup, v);
    bar_min = std::min(bar_min, v);
  }
  if (bar_min < 0.0) rep.add("kernel.lambda_bar", "negative total intensity on the grid");
  rep.lambda_bar_sup = bar_sup;

  // delay range 0 <= tau(rho) <= h
  if (std::abs(delay.h - sys.h) > 0.0 && delay.h != sys.h) {
    rep.add("delay.h", "delay law bound differs from system h");
  }
  double tau_min = 0.0, tau_max = 0.0;
  bool tau_error = false;
  for (int j = 0; j < pts; ++j) {
    double tau;
    try {
      tau = delay.eval(grid_at(j));
    } catch (const ExprEvalError&) {
      tau_error = true;
      break;
    }
    tau_min = std::min(tau_min, tau);
    tau_max = std::max(tau_max, tau);
  }
  if (tau_error) {
    rep.add("delay", "delay expression failed to evaluate on the grid");
  } else if (tau_min < 0.0 || tau_max > sys.h) {
    std::ostringstream os;
    os << "tau range [" << tau_min << ", " << tau_max << "] leaves [0, " << sys.h << "]";
    rep.add("delay", os.str());
  }

  // delta(rho) = 1 + 2 lambda_bar(rho) h
  rep.delta = PolyMatrix::scalar(1.0) + kernel.lambda_bar.scaled(2.0 * sys.h);
  return rep;
}

ValidationReport validate(const LpvDelaySystem& sys, const JumpKernel& kernel,
                          const DelayLaw& delay, const InitialHistory& history,
                          const ValidationOptions& opts) {
  ValidationReport rep = validate(sys, kernel, delay, opts);
  if (!history.phi) {
    rep.add("phi", "initial history not set");
    return rep;
  }
  if (sys.h > 0.0) {
    const int pts = opts.grid_points;
    Eigen::VectorXd prev;
    std::vector<double> steps;
    steps.reserve(static_cast<std::size_t>(pts));
    double scale = 0.0;
    bool bad = false;
    for (int i = 0; i < pts; ++i) {
      double t = -sys.h + sys.h * i / (pts - 1);
      Eigen::VectorXd v = history.phi(t);
      if (v.size() != sys.n || !v.allFinite()) {
        rep.add("phi", "history sample has wrong dimension or non-finite entries");
        bad = true;
        break;
      }
      scale = std::max(scale, v.cwiseAbs().maxCoeff());
      if (i > 0) steps.push_back((v - prev).norm());
      prev = std::move(v);
    }
    // sampled continuity: a continuous history has adjacent steps shrinking
    // with the grid, so one step dwarfing the median marks a jump
    if (!bad && !steps.empty()) {
      std::vector<double> sorted = steps;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2),
                       sorted.end());
      double median = sorted[sorted.size() / 2];
      double max_step = *std::max_element(steps.begin(), steps.end());
      if (max_step > 100.0 * median + 1e-9 * std::max(1.0, scale)) {
        rep.add("phi", "history looks discontinuous at grid resolution");
      }
    }
  } else {
    Eigen::VectorXd v = history.phi(0.0);
    if (v.size() != sys.n || !v.allFinite()) rep.add("phi", "history sample invalid at t=0");
  }
  return rep;
}

}  // namespace lpvjump
