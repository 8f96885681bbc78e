#include "lpvjump/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lpvjump {

void AffineEntry::add_product(const PolyMatrix& left, VarAt var, const PolyMatrix& right) {
  add_product(PolyMatrix::scalar(1.0), left, var, right);
}

void AffineEntry::add_product(const PolyMatrix& coeff, const PolyMatrix& left, VarAt var,
                              const PolyMatrix& right) {
  if (coeff.rows() != 1 || coeff.cols() != 1) {
    throw std::invalid_argument("AffineEntry: coeff must be a scalar polynomial");
  }
  terms.push_back({coeff, left, var, right});
}

void AffineEntry::add_scalar(int scalar_index, const PolyMatrix& mat) {
  scalar_terms.push_back({scalar_index, mat});
}

void AffineEntry::add_integral(const PolyMatrix& coeff, const PolyMatrix& left, VarAt var,
                               const PolyMatrix& right, const ParamBox& box) {
  if (coeff.rows() != 1 || coeff.cols() != 1) {
    throw std::invalid_argument("AffineEntry: integral coeff must be a scalar polynomial");
  }
  if (left.vars().theta || right.vars().theta) {
    throw std::invalid_argument("AffineEntry: integral factors may not depend on theta");
  }
  integral_terms.push_back({coeff, left, var, right, box});
}

namespace {
// integral over theta of coeff * theta^extra_deg as a polynomial in rho
PolyMatrix theta_moment(const PolyMatrix& coeff, int extra_deg, const ParamBox& box) {
  PolyMatrix prod = poly_scale(coeff, PolyMatrix::monomial(Eigen::MatrixXd::Ones(1, 1), extra_deg, 0));
  if (!prod.vars().theta) return prod.scaled(box.measure());
  return prod.integrate_theta(box);
}
}  // namespace

AffineBlockExpr::AffineBlockExpr(std::vector<int> block_sizes) : sizes_(std::move(block_sizes)) {
  offsets_.reserve(sizes_.size());
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("AffineBlockExpr: block sizes must be positive");
    offsets_.push_back(dim_);
    dim_ += s;
  }
  const std::size_t nb = sizes_.size();
  entries_.resize(nb * (nb + 1) / 2);
}

namespace {
std::size_t upper_index(int i, int j, int nb) {
  // row-major upper triangle: row i starts after sum_{k<i} (nb-k) entries
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(nb) -
         static_cast<std::size_t>(i) * static_cast<std::size_t>(i - 1) / 2 +
         static_cast<std::size_t>(j - i);
}
}  // namespace

AffineEntry& AffineBlockExpr::entry(int i, int j) {
  if (i < 0 || j < i || j >= block_count()) {
    throw std::invalid_argument("AffineBlockExpr::entry: need 0 <= i <= j < blocks");
  }
  return entries_[upper_index(i, j, block_count())];
}

const AffineEntry& AffineBlockExpr::entry(int i, int j) const {
  if (i < 0 || j < i || j >= block_count()) {
    throw std::invalid_argument("AffineBlockExpr::entry: need 0 <= i <= j < blocks");
  }
  return entries_[upper_index(i, j, block_count())];
}

std::vector<double> grid_points(const ParamBox& box, int count) {
  if (count < 2) throw std::invalid_argument("grid_points: count must be at least 2");
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    pts[static_cast<std::size_t>(i)] = box.lo + box.measure() * i / (count - 1);
  }
  pts.front() = box.lo;
  pts.back() = box.hi;
  return pts;
}

std::vector<EvalPoint> GridSpec::points() const {
  std::vector<EvalPoint> out;
  if (theta.empty() && rho.empty()) {
    out.push_back(EvalPoint{});
    return out;
  }
  if (theta.empty()) {
    for (double r : rho) out.push_back(EvalPoint::at_rho(r));
    return out;
  }
  if (rho.empty()) {
    for (double th : theta) out.push_back(EvalPoint{th, std::nullopt});
    return out;
  }
  out.reserve(theta.size() * rho.size());
  for (double th : theta) {
    for (double r : rho) out.push_back(EvalPoint::at(th, r));
  }
  return out;
}

namespace {
std::vector<double> refine_axis(const std::vector<double>& axis, int factor) {
  if (axis.size() < 2 || factor <= 1) return axis;
  std::vector<double> out;
  out.reserve((axis.size() - 1) * static_cast<std::size_t>(factor) + 1);
  for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
    for (int k = 0; k < factor; ++k) {
      out.push_back(axis[i] + (axis[i + 1] - axis[i]) * k / factor);
    }
  }
  out.push_back(axis.back());
  return out;
}
}  // namespace

GridSpec GridSpec::refined(int factor) const {
  return GridSpec{refine_axis(theta, factor), refine_axis(rho, factor)};
}

int LmiProgram::add_mat_var(const MatVar& v) {
  if (v.rows <= 0 || v.cols <= 0) throw std::invalid_argument("MatVar: dimensions must be positive");
  if (v.symmetric && v.rows != v.cols) {
    throw std::invalid_argument("MatVar: symmetric variable must be square");
  }
  if ((v.deg_theta > 0 && !v.vars.theta) || (v.deg_rho > 0 && !v.vars.rho)) {
    throw std::invalid_argument("MatVar: degree in a variable outside its variable set");
  }
  mat_vars_.push_back(v);
  var_offset_.push_back(mat_unknowns_);
  const int per_coeff = v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
  const int monos = (v.deg_theta + 1) * (v.deg_rho + 1);
  mat_unknowns_ += per_coeff * monos;
  return static_cast<int>(mat_vars_.size()) - 1;
}

int LmiProgram::add_scalar_var(const ScalarVar& v) {
  scalar_vars_.push_back(v);
  return static_cast<int>(scalar_vars_.size()) - 1;
}

int LmiProgram::find_mat_var(const std::string& name) const {
  for (std::size_t i = 0; i < mat_vars_.size(); ++i) {
    if (mat_vars_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int LmiProgram::find_scalar_var(const std::string& name) const {
  for (std::size_t i = 0; i < scalar_vars_.size(); ++i) {
    if (scalar_vars_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void LmiProgram::add_psd_on_grid(AffineBlockExpr expr, Sense sense, GridSpec grid, double margin,
                                 std::string label) {
  if (expr.dim() <= 0) throw std::invalid_argument("add_psd_on_grid: empty block expression");
  psd_.push_back({std::move(label), std::move(expr), sense, std::move(grid), margin});
}

void LmiProgram::add_integral_zero(int mat_var_index, const ParamBox& box) {
  const MatVar& v = mat_var(mat_var_index);
  if (!v.vars.theta) {
    throw std::invalid_argument("add_integral_zero: theta is not a variable of " + v.name);
  }
  const int per = v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
  for (int kr = 0; kr <= v.deg_rho; ++kr) {
    for (int e = 0; e < per; ++e) {
      // decode entry ordinal -> (row, col)
      int row = 0, col = 0;
      if (v.symmetric) {
        int rem = e;
        for (col = 0; col < v.rows; ++col) {
          int len = v.rows - col;
          if (rem < len) {
            row = col + rem;
            break;
          }
          rem -= len;
        }
      } else {
        col = e / v.rows;
        row = e % v.rows;
      }
      EqualityConstraint eq;
      eq.label = v.name + "_int0_r" + std::to_string(kr) + "_" + std::to_string(row) + "_" +
                 std::to_string(col);
      for (int kt = 0; kt <= v.deg_theta; ++kt) {
        const double w = (std::pow(box.hi, kt + 1) - std::pow(box.lo, kt + 1)) / (kt + 1);
        const int mono_ordinal = kt * (v.deg_rho + 1) + kr;
        eq.lhs.push_back({unknown_index(mat_var_index, mono_ordinal, row, col), w});
      }
      eq.rhs = 0.0;
      eq_.push_back(std::move(eq));
    }
  }
}

void LmiProgram::add_equality(EqualityConstraint eq) { eq_.push_back(std::move(eq)); }

void LmiProgram::add_linear_lower_bound(std::vector<std::pair<int, double>> terms, double offset,
                                        std::string label) {
  (void)label;
  bounds_.push_back({std::move(terms), offset});
}

void LmiProgram::minimize_scalar(int scalar_index) {
  if (scalar_index < 0 || scalar_index >= scalar_var_count()) {
    throw std::invalid_argument("minimize_scalar: bad index");
  }
  objective_scalar_ = scalar_index;
}

int LmiProgram::unknown_count() const { return mat_unknowns_ + scalar_var_count(); }

std::vector<Monomial> LmiProgram::monomials(int mat_var_index) const {
  const MatVar& v = mat_var(mat_var_index);
  std::vector<Monomial> out;
  out.reserve(static_cast<std::size_t>((v.deg_theta + 1) * (v.deg_rho + 1)));
  for (int kt = 0; kt <= v.deg_theta; ++kt) {
    for (int kr = 0; kr <= v.deg_rho; ++kr) out.push_back(Monomial{kt, kr});
  }
  return out;
}

int LmiProgram::unknown_index(int mat_var_index, int mono_ordinal, int row, int col) const {
  const MatVar& v = mat_var(mat_var_index);
  const int per = v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
  int entry;
  if (v.symmetric) {
    if (row < col) std::swap(row, col);
    // column-major lower triangle
    entry = 0;
    for (int b = 0; b < col; ++b) entry += v.rows - b;
    entry += row - col;
  } else {
    entry = col * v.rows + row;
  }
  return var_offset_[static_cast<std::size_t>(mat_var_index)] + mono_ordinal * per + entry;
}

int LmiProgram::scalar_unknown_index(int scalar_index) const {
  return mat_unknowns_ + scalar_index;
}

namespace {

double mono_value_at(const Monomial& m, const VarAt& ref, const EvalPoint& p) {
  double v = 1.0;
  if (m.theta > 0) {
    double tv = p.get(Var::Theta);
    for (int k = 0; k < m.theta; ++k) v *= tv;
  }
  if (m.rho > 0) {
    double rv = (ref.rho_as == Var::Theta) ? p.get(Var::Theta) : p.get(Var::Rho);
    for (int k = 0; k < m.rho; ++k) v *= rv;
  }
  return v;
}

// Walks one constraint block at one grid point, producing the constant part
// and the direction matrix of every unknown that appears.
struct PointAssembly {
  Eigen::MatrixXd constant;
  std::map<int, Eigen::MatrixXd> directions;  // unknown index -> dK/du
};

PointAssembly assemble_point(const LmiProgram& prog, const AffineBlockExpr& expr,
                             const EvalPoint& p) {
  const int D = expr.dim();
  PointAssembly out;
  out.constant = Eigen::MatrixXd::Zero(D, D);

  auto place = [&](Eigen::MatrixXd& K, int bi, int bj, const Eigen::MatrixXd& V) {
    const int ro = expr.block_offset(bi), co = expr.block_offset(bj);
    K.block(ro, co, V.rows(), V.cols()) += V;
    if (bi != bj) K.block(co, ro, V.cols(), V.rows()) += V.transpose();
  };
  auto direction = [&](int unknown) -> Eigen::MatrixXd& {
    auto it = out.directions.find(unknown);
    if (it == out.directions.end()) {
      it = out.directions.emplace(unknown, Eigen::MatrixXd::Zero(D, D)).first;
    }
    return it->second;
  };

  const int nb = expr.block_count();
  for (int bi = 0; bi < nb; ++bi) {
    for (int bj = bi; bj < nb; ++bj) {
      const AffineEntry& e = expr.entry(bi, bj);
      if (e.constant.rows() > 0 && !e.constant.is_zero()) {
        place(out.constant, bi, bj, e.constant.eval(p));
      }
      for (const auto& st : e.scalar_terms) {
        Eigen::MatrixXd m = st.mat.eval(p);
        place(direction(prog.scalar_unknown_index(st.scalar_index)), bi, bj, m);
      }
      auto add_var_directions = [&](const VarAt& ref, double f, int mono_ordinal,
                                    const Eigen::MatrixXd& L, const Eigen::MatrixXd& R) {
        const MatVar& v = prog.mat_var(ref.index);
        const bool tr = ref.transposed && !v.symmetric;
        if (v.symmetric) {
          for (int col = 0; col < v.cols; ++col) {
            for (int row = col; row < v.rows; ++row) {
              Eigen::MatrixXd dir = L.col(row) * R.row(col);
              if (row != col) dir += L.col(col) * R.row(row);
              place(direction(prog.unknown_index(ref.index, mono_ordinal, row, col)), bi, bj,
                    Eigen::MatrixXd(f * dir));
            }
          }
        } else {
          for (int col = 0; col < v.cols; ++col) {
            for (int row = 0; row < v.rows; ++row) {
              Eigen::MatrixXd dir = tr ? Eigen::MatrixXd(L.col(col) * R.row(row))
                                       : Eigen::MatrixXd(L.col(row) * R.row(col));
              place(direction(prog.unknown_index(ref.index, mono_ordinal, row, col)), bi, bj,
                    Eigen::MatrixXd(f * dir));
            }
          }
        }
      };
      for (const auto& t : e.terms) {
        const double cf = t.coeff.eval(p)(0, 0);
        if (cf == 0.0) continue;
        Eigen::MatrixXd L = t.left.eval(p);
        Eigen::MatrixXd R = t.right.eval(p);
        auto monos = prog.monomials(t.var.index);
        for (std::size_t mo = 0; mo < monos.size(); ++mo) {
          const double f = cf * mono_value_at(monos[mo], t.var, p);
          if (f != 0.0) add_var_directions(t.var, f, static_cast<int>(mo), L, R);
        }
      }
      for (const auto& t : e.integral_terms) {
        Eigen::MatrixXd L = t.left.eval(p);
        Eigen::MatrixXd R = t.right.eval(p);
        auto monos = prog.monomials(t.var.index);
        for (std::size_t mo = 0; mo < monos.size(); ++mo) {
          const Monomial& m = monos[mo];
          const int a = m.theta + (t.var.rho_as == Var::Theta ? m.rho : 0);
          const int b = (t.var.rho_as == Var::Theta) ? 0 : m.rho;
          PolyMatrix w = theta_moment(t.coeff, a, t.box);
          double f = w.eval(p)(0, 0);
          for (int k = 0; k < b; ++k) f *= p.get(Var::Rho);
          if (f != 0.0) add_var_directions(t.var, f, static_cast<int>(mo), L, R);
        }
      }
    }
  }

  out.constant = 0.5 * (out.constant + out.constant.transpose()).eval();
  for (auto& [u, d] : out.directions) d = 0.5 * (d + d.transpose()).eval();
  return out;
}

}  // namespace

ConicProblem lower(const LmiProgram& prog) {
  ConicProblem cp;
  cp.num_vars = prog.unknown_count();
  cp.c = Eigen::VectorXd::Zero(cp.num_vars);
  if (prog.objective_scalar() >= 0) {
    cp.c(prog.scalar_unknown_index(prog.objective_scalar())) = 1.0;
  }

  for (const auto& c : prog.psd_constraints()) {
    const double sgn = (c.sense == Sense::GreaterEqual) ? 1.0 : -1.0;
    for (const EvalPoint& p : c.grid.points()) {
      PointAssembly pa = assemble_point(prog, c.expr, p);
      const int D = c.expr.dim();
      ConeBlock blk;
      blk.kind = ConeKind::Psd;
      blk.dim = D;
      Eigen::MatrixXd K0 = sgn * pa.constant - c.margin * Eigen::MatrixXd::Identity(D, D);
      blk.h = svec(K0);
      blk.cols.reserve(pa.directions.size());
      blk.G.resize(blk.vdim(), static_cast<Eigen::Index>(pa.directions.size()));
      Eigen::Index k = 0;
      for (const auto& [u, dir] : pa.directions) {
        blk.cols.push_back(u);
        blk.G.col(k++) = -sgn * svec(dir);
      }
      cp.blocks.push_back(std::move(blk));
    }
  }

  // scalar lower bounds
  for (int si = 0; si < prog.scalar_var_count(); ++si) {
    const auto& sv = prog.scalar_var(si);
    if (sv.lower) {
      ConeBlock blk;
      blk.kind = ConeKind::NonNeg;
      blk.dim = 1;
      blk.cols = {prog.scalar_unknown_index(si)};
      blk.G = Eigen::MatrixXd::Constant(1, 1, -1.0);
      blk.h = Eigen::VectorXd::Constant(1, -*sv.lower);
      cp.blocks.push_back(std::move(blk));
    }
  }
  for (const auto& [terms, offset] : prog.extra_bounds()) {
    ConeBlock blk;
    blk.kind = ConeKind::NonNeg;
    blk.dim = 1;
    blk.G.resize(1, static_cast<Eigen::Index>(terms.size()));
    Eigen::Index k = 0;
    for (const auto& [u, coeff] : terms) {
      blk.cols.push_back(u);
      blk.G(0, k++) = -coeff;
    }
    blk.h = Eigen::VectorXd::Constant(1, offset);
    cp.blocks.push_back(std::move(blk));
  }

  const auto& eqs = prog.equalities();
  cp.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eqs.size()), cp.num_vars);
  cp.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(eqs.size()));
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    for (const auto& [u, coeff] : eqs[i].lhs) cp.A(static_cast<Eigen::Index>(i), u) += coeff;
    cp.b(static_cast<Eigen::Index>(i)) = eqs[i].rhs;
  }
  return cp;
}

void dump_conic(const ConicProblem& prob, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("dump_conic: cannot open " + path);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "lpvjump-conic 1\n";
  os << "vars " << prob.num_vars << "\n";
  os << "equalities " << prob.A.rows() << "\n";
  os << "cones " << prob.blocks.size() << "\n";
  for (const auto& blk : prob.blocks) {
    os << (blk.kind == ConeKind::Psd ? "psd " : "nonneg ") << blk.dim << "\n";
  }
  os << "objective\n";
  for (int j = 0; j < prob.num_vars; ++j) {
    if (prob.c(j) != 0.0) os << j << " " << num(prob.c(j)) << "\n";
  }
  os << "G\n";
  int row0 = 0;
  for (const auto& blk : prob.blocks) {
    for (Eigen::Index r = 0; r < blk.G.rows(); ++r) {
      for (Eigen::Index k = 0; k < blk.G.cols(); ++k) {
        if (blk.G(r, k) != 0.0) {
          os << (row0 + r) << " " << blk.cols[static_cast<std::size_t>(k)] << " "
             << num(blk.G(r, k)) << "\n";
        }
      }
    }
    row0 += static_cast<int>(blk.G.rows());
  }
  os << "h\n";
  row0 = 0;
  for (const auto& blk : prob.blocks) {
    for (Eigen::Index r = 0; r < blk.h.size(); ++r) {
      if (blk.h(r) != 0.0) os << (row0 + r) << " " << num(blk.h(r)) << "\n";
    }
    row0 += static_cast<int>(blk.h.size());
  }
  os << "A\n";
  for (Eigen::Index i = 0; i < prob.A.rows(); ++i) {
    for (Eigen::Index j = 0; j < prob.A.cols(); ++j) {
      if (prob.A(i, j) != 0.0) os << i << " " << j << " " << num(prob.A(i, j)) << "\n";
    }
  }
  os << "b\n";
  for (Eigen::Index i = 0; i < prob.b.size(); ++i) {
    if (prob.b(i) != 0.0) os << i << " " << num(prob.b(i)) << "\n";
  }
}

Eigen::MatrixXd eval_block_expr(const LmiProgram& prog, const AffineBlockExpr& expr,
                                const EvalPoint& point, const VariableValues& values) {
  const int D = expr.dim();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(D, D);
  auto place = [&](int bi, int bj, const Eigen::MatrixXd& V) {
    K.block(expr.block_offset(bi), expr.block_offset(bj), V.rows(), V.cols()) += V;
    if (bi != bj) {
      K.block(expr.block_offset(bj), expr.block_offset(bi), V.cols(), V.rows()) += V.transpose();
    }
  };
  const int nb = expr.block_count();
  for (int bi = 0; bi < nb; ++bi) {
    for (int bj = bi; bj < nb; ++bj) {
      const AffineEntry& e = expr.entry(bi, bj);
      if (e.constant.rows() > 0 && !e.constant.is_zero()) place(bi, bj, e.constant.eval(point));
      for (const auto& st : e.scalar_terms) {
        double sval = values.scalars.at(prog.scalar_var(st.scalar_index).name);
        place(bi, bj, Eigen::MatrixXd(sval * st.mat.eval(point)));
      }
      for (const auto& t : e.terms) {
        const MatVar& v = prog.mat_var(t.var.index);
        PolyMatrix val = values.mats.at(v.name);
        if (t.var.rho_as == Var::Theta) val = val.substitute(Var::Rho, Var::Theta);
        Eigen::MatrixXd V = val.eval(point);
        if (t.var.transposed && !v.symmetric) V = V.transpose().eval();
        double cf = t.coeff.eval(point)(0, 0);
        place(bi, bj, Eigen::MatrixXd(cf * t.left.eval(point) * V * t.right.eval(point)));
      }
      for (const auto& t : e.integral_terms) {
        const MatVar& v = prog.mat_var(t.var.index);
        PolyMatrix val = values.mats.at(v.name);
        if (t.var.rho_as == Var::Theta) val = val.substitute(Var::Rho, Var::Theta);
        if (t.var.transposed && !v.symmetric) val = val.transpose();
        PolyMatrix prod = poly_scale(t.coeff, val);
        PolyMatrix integ =
            prod.vars().theta ? prod.integrate_theta(t.box) : prod.scaled(t.box.measure());
        place(bi, bj,
              Eigen::MatrixXd(t.left.eval(point) * integ.eval(point) * t.right.eval(point)));
      }
    }
  }
  return 0.5 * (K + K.transpose());
}

double constraint_residual(const LmiProgram& prog, const PsdConstraint& c, const EvalPoint& point,
                           const VariableValues& values) {
  Eigen::MatrixXd K = eval_block_expr(prog, c.expr, point, values);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K, Eigen::EigenvaluesOnly);
  if (c.sense == Sense::GreaterEqual) return c.margin - eig.eigenvalues().minCoeff();
  return eig.eigenvalues().maxCoeff() + c.margin;
}

double worst_residual(const LmiProgram& prog, const VariableValues& values, int refine_factor) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : prog.psd_constraints()) {
    GridSpec g = refine_factor > 1 ? c.grid.refined(refine_factor) : c.grid;
    for (const EvalPoint& p : g.points()) {
      worst = std::max(worst, constraint_residual(prog, c, p, values));
    }
  }
  return worst;
}

SolveReport lower_and_solve(const LmiProgram& prog, const SolveSettings& settings) {
  ConicProblem cp = lower(prog);
  if (!settings.dump_path.empty()) dump_conic(cp, settings.dump_path);

  ConicSettings cs;
  cs.feas_tol = settings.feas_tol;
  cs.gap_tol = settings.gap_tol;
  cs.max_iters = settings.max_iters;
  cs.verbose = settings.verbose;
  ConicResult cr = solve_conic(cp, cs);

  SolveReport rep;
  rep.iterations = cr.iters;
  rep.message = cr.message;
  switch (cr.status) {
    case ConicStatus::Optimal:
      rep.status = SolveReport::Status::Optimal;
      break;
    case ConicStatus::PrimalInfeasible:
      rep.status = SolveReport::Status::Infeasible;
      rep.message = "LMI program infeasible (certificate found)";
      return rep;
    case ConicStatus::DualInfeasible:
      rep.status = SolveReport::Status::NumericalFailure;
      rep.message = "objective unbounded below (dual infeasibility certificate)";
      return rep;
    case ConicStatus::NumericalFailure:
      rep.status = SolveReport::Status::NumericalFailure;
      return rep;
  }

  for (int vi = 0; vi < prog.mat_var_count(); ++vi) {
    const MatVar& v = prog.mat_var(vi);
    PolyMatrix pm(v.rows, v.cols, v.vars);
    auto monos = prog.monomials(vi);
    for (std::size_t mo = 0; mo < monos.size(); ++mo) {
      Eigen::MatrixXd cmat(v.rows, v.cols);
      if (v.symmetric) {
        for (int col = 0; col < v.cols; ++col) {
          for (int row = col; row < v.rows; ++row) {
            double u = cr.x(prog.unknown_index(vi, static_cast<int>(mo), row, col));
            cmat(row, col) = u;
            cmat(col, row) = u;
          }
        }
      } else {
        for (int col = 0; col < v.cols; ++col) {
          for (int row = 0; row < v.rows; ++row) {
            cmat(row, col) = cr.x(prog.unknown_index(vi, static_cast<int>(mo), row, col));
          }
        }
      }
      if (!cmat.isZero(0.0)) pm.add_term(monos[mo], cmat);
    }
    if (v.symmetric) pm.mark_symmetric();
    rep.values.mats.emplace(v.name, std::move(pm));
  }
  for (int si = 0; si < prog.scalar_var_count(); ++si) {
    rep.values.scalars.emplace(prog.scalar_var(si).name, cr.x(prog.scalar_unknown_index(si)));
  }
  rep.objective = cr.pobj;

  rep.train_residual = worst_residual(prog, rep.values, 1);
  rep.verify_residual = worst_residual(prog, rep.values, settings.verify_factor);
  char buf[64];
  if (rep.train_residual > 1e-7) {
    std::snprintf(buf, sizeof(buf), "%.3e", rep.train_residual);
    rep.warnings.push_back(std::string("training-grid residual above 1e-7: ") + buf);
  }
  if (rep.verify_residual > 1e-7) {
    std::snprintf(buf, sizeof(buf), "%.3e", rep.verify_residual);
    rep.warnings.push_back(std::string("constraint violated between grid points: ") + buf);
  }
  return rep;
}

}  // namespace lpvjump
