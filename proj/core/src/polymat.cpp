#include "lpvjump/polymat.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lpvjump {

ParamBox::ParamBox(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo < hi)) {
    throw std::invalid_argument("ParamBox: requires lo < hi, got [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
  }
}

VarSet VarSet::without(Var v) const {
  VarSet s = *this;
  (v == Var::Theta ? s.theta : s.rho) = false;
  return s;
}

VarSet VarSet::with(Var v) const {
  VarSet s = *this;
  (v == Var::Theta ? s.theta : s.rho) = true;
  return s;
}

double Monomial::value(double theta_val, double rho_val) const {
  double v = 1.0;
  for (int k = 0; k < theta; ++k) v *= theta_val;
  for (int k = 0; k < rho; ++k) v *= rho_val;
  return v;
}

double EvalPoint::get(Var v) const {
  const auto& slot = (v == Var::Theta) ? theta : rho;
  if (!slot) {
    throw std::invalid_argument(std::string("EvalPoint: variable ") +
                                (v == Var::Theta ? "theta" : "rho") + " is not assigned");
  }
  return *slot;
}

PolyMatrix::PolyMatrix(Index rows, Index cols, VarSet vars)
    : rows_(rows), cols_(cols), vars_(vars) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("PolyMatrix: negative dimension");
}

PolyMatrix PolyMatrix::constant(const Eigen::MatrixXd& m) {
  PolyMatrix p(m.rows(), m.cols(), VarSet::none());
  if (m.size() > 0 && !m.isZero(0.0)) p.terms_[Monomial{}] = m;
  return p;
}

PolyMatrix PolyMatrix::scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return constant(m);
}

PolyMatrix PolyMatrix::zero(Index rows, Index cols, VarSet vars) {
  return PolyMatrix(rows, cols, vars);
}

PolyMatrix PolyMatrix::identity(Index n) {
  PolyMatrix p = constant(Eigen::MatrixXd::Identity(n, n));
  p.symmetric_ = true;
  return p;
}

PolyMatrix PolyMatrix::variable(Var v) {
  PolyMatrix p(1, 1, v == Var::Theta ? VarSet::of_theta() : VarSet::of_rho());
  Monomial m;
  (v == Var::Theta ? m.theta : m.rho) = 1;
  p.terms_[m] = Eigen::MatrixXd::Ones(1, 1);
  return p;
}

PolyMatrix PolyMatrix::monomial(const Eigen::MatrixXd& coeff, int deg_theta, int deg_rho) {
  if (deg_theta < 0 || deg_rho < 0) throw std::invalid_argument("PolyMatrix: negative degree");
  VarSet vars;
  vars.theta = deg_theta > 0;
  vars.rho = deg_rho > 0;
  PolyMatrix p(coeff.rows(), coeff.cols(), vars);
  if (!coeff.isZero(0.0)) p.terms_[Monomial{deg_theta, deg_rho}] = coeff;
  return p;
}

int PolyMatrix::degree(Var v) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.deg(v));
  return d;
}

void PolyMatrix::add_term(const Monomial& m, const Eigen::MatrixXd& coeff) {
  if (coeff.rows() != rows_ || coeff.cols() != cols_) {
    throw std::invalid_argument("PolyMatrix::add_term: coefficient shape mismatch");
  }
  if ((m.theta > 0 && !vars_.theta) || (m.rho > 0 && !vars_.rho)) {
    throw std::invalid_argument("PolyMatrix::add_term: monomial uses a variable outside vars");
  }
  if (m.theta < 0 || m.rho < 0) throw std::invalid_argument("PolyMatrix::add_term: negative exponent");
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_[m] = coeff;
  } else {
    it->second += coeff;
  }
  symmetric_ = false;
}

Eigen::MatrixXd PolyMatrix::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  if (it == terms_.end()) return Eigen::MatrixXd::Zero(rows_, cols_);
  return it->second;
}

void PolyMatrix::mark_symmetric() {
  if (rows_ != cols_) throw std::invalid_argument("PolyMatrix: symmetric flag requires square");
  for (const auto& [m, c] : terms_) {
    for (Index i = 0; i < rows_; ++i) {
      for (Index j = 0; j < i; ++j) {
        if (c(i, j) != c(j, i)) {
          throw std::invalid_argument("PolyMatrix: coefficient not bitwise symmetric");
        }
      }
    }
  }
  symmetric_ = true;
}

Eigen::MatrixXd PolyMatrix::eval(const EvalPoint& p) const {
  double tv = 0.0, rv = 0.0;
  if (vars_.theta) tv = p.get(Var::Theta);
  if (vars_.rho) rv = p.get(Var::Rho);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const auto& [m, c] : terms_) out += m.value(tv, rv) * c;
  return out;
}

PolyMatrix PolyMatrix::integrate_theta(const ParamBox& box) const {
  if (!vars_.theta) {
    throw std::invalid_argument("integrate_theta: theta is not a variable of this PolyMatrix");
  }
  PolyMatrix out(rows_, cols_, vars_.without(Var::Theta));
  for (const auto& [m, c] : terms_) {
    // exact monomial integral: (hi^{k+1} - lo^{k+1}) / (k+1)
    const int k = m.theta;
    const double w = (std::pow(box.hi, k + 1) - std::pow(box.lo, k + 1)) / (k + 1);
    Monomial n{0, m.rho};
    auto it = out.terms_.find(n);
    if (it == out.terms_.end()) {
      out.terms_[n] = w * c;
    } else {
      it->second += w * c;
    }
  }
  out.symmetric_ = symmetric_;
  out.prune();
  return out;
}

PolyMatrix PolyMatrix::substitute(Var from, Var to) const {
  if (from == to) return *this;
  if (vars_.contains(to)) {
    throw std::invalid_argument("substitute: target variable already present");
  }
  PolyMatrix out(rows_, cols_, vars_.without(from).with(to));
  if (!vars_.contains(from)) {
    out.terms_ = terms_;
    out.symmetric_ = symmetric_;
    return out;
  }
  for (const auto& [m, c] : terms_) {
    Monomial n = m;
    int d = (from == Var::Theta) ? m.theta : m.rho;
    (from == Var::Theta ? n.theta : n.rho) = 0;
    (to == Var::Theta ? n.theta : n.rho) = d;
    out.terms_[n] = c;
  }
  out.symmetric_ = symmetric_;
  return out;
}

PolyMatrix PolyMatrix::transpose() const {
  PolyMatrix out(cols_, rows_, vars_);
  for (const auto& [m, c] : terms_) out.terms_[m] = c.transpose();
  out.symmetric_ = symmetric_;
  return out;
}

PolyMatrix PolyMatrix::sym() const {
  if (rows_ != cols_) throw std::invalid_argument("sym: requires a square PolyMatrix");
  PolyMatrix out = *this + transpose();
  out.symmetric_ = true;
  return out;
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) {
    throw std::invalid_argument("PolyMatrix: dimension mismatch in +");
  }
  PolyMatrix out(rows_, cols_, vars_.united(o.vars_));
  out.terms_ = terms_;
  for (const auto& [m, c] : o.terms_) {
    auto it = out.terms_.find(m);
    if (it == out.terms_.end()) {
      out.terms_[m] = c;
    } else {
      it->second += c;
    }
  }
  out.symmetric_ = symmetric_ && o.symmetric_;
  return out;
}

PolyMatrix PolyMatrix::operator-(const PolyMatrix& o) const { return *this + (-o); }

PolyMatrix PolyMatrix::operator-() const {
  PolyMatrix out(rows_, cols_, vars_);
  for (const auto& [m, c] : terms_) out.terms_[m] = -c;
  out.symmetric_ = symmetric_;
  return out;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& o) const {
  if (cols_ != o.rows_) throw std::invalid_argument("PolyMatrix: dimension mismatch in *");
  PolyMatrix out(rows_, o.cols_, vars_.united(o.vars_));
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : o.terms_) {
      Monomial m{ma.theta + mb.theta, ma.rho + mb.rho};
      Eigen::MatrixXd prod = ca * cb;
      auto it = out.terms_.find(m);
      if (it == out.terms_.end()) {
        out.terms_[m] = std::move(prod);
      } else {
        it->second += prod;
      }
    }
  }
  out.prune();
  return out;
}

PolyMatrix PolyMatrix::scaled(double a) const {
  PolyMatrix out(rows_, cols_, vars_);
  for (const auto& [m, c] : terms_) out.terms_[m] = a * c;
  out.symmetric_ = symmetric_;
  return out;
}

void PolyMatrix::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second.isZero(0.0)) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

bool PolyMatrix::is_zero() const {
  for (const auto& [m, c] : terms_) {
    if (!c.isZero(0.0)) return false;
  }
  return true;
}

double PolyMatrix::max_abs_coeff() const {
  double v = 0.0;
  for (const auto& [m, c] : terms_) {
    if (c.size() > 0) v = std::max(v, c.cwiseAbs().maxCoeff());
  }
  return v;
}

std::string PolyMatrix::to_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_ << " poly";
  for (const auto& [m, c] : terms_) {
    os << "\n theta^" << m.theta << " rho^" << m.rho << ":\n" << c;
  }
  return os.str();
}

PolyMatrix operator*(double a, const PolyMatrix& m) { return m.scaled(a); }

PolyMatrix poly_scale(const PolyMatrix& scalar_poly, const PolyMatrix& m) {
  if (scalar_poly.rows() != 1 || scalar_poly.cols() != 1) {
    throw std::invalid_argument("poly_scale: first argument must be 1x1");
  }
  PolyMatrix out(m.rows(), m.cols(), scalar_poly.vars().united(m.vars()));
  for (const auto& [ms, cs] : scalar_poly.terms()) {
    for (const auto& [mm, cm] : m.terms()) {
      out.add_term(Monomial{ms.theta + mm.theta, ms.rho + mm.rho}, cs(0, 0) * cm);
    }
  }
  out.prune();
  return out;
}

}  // namespace lpvjump
