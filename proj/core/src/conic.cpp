#include "lpvjump/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace lpvjump {

int ConicProblem::cone_dim() const {
  int d = 0;
  for (const auto& blk : blocks) d += blk.vdim();
  return d;
}

int ConicProblem::cone_degree() const {
  int d = 0;
  for (const auto& blk : blocks) d += blk.dim;
  return d;
}

Eigen::VectorXd svec(const Eigen::MatrixXd& S) {
  const int d = static_cast<int>(S.rows());
  Eigen::VectorXd v(d * (d + 1) / 2);
  const double rt2 = std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < d; ++j) {
    v(k++) = S(j, j);
    for (int i = j + 1; i < d; ++i) v(k++) = rt2 * 0.5 * (S(i, j) + S(j, i));
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int dim) {
  Eigen::MatrixXd S(dim, dim);
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int j = 0; j < dim; ++j) {
    S(j, j) = v(k++);
    for (int i = j + 1; i < dim; ++i) {
      double val = v(k++) * inv_rt2;
      S(i, j) = val;
      S(j, i) = val;
    }
  }
  return S;
}

namespace {

// Nesterov-Todd scaling per block: R'ZR = Rinv S Rinv' = diag(lam).
struct Scaling {
  Eigen::MatrixXd R, Rinv;
  Eigen::VectorXd lam;
  double w{1.0};  // NonNeg scaling
};

struct Offsets {
  std::vector<int> at;
  int total{0};
};

Offsets make_offsets(const std::vector<ConeBlock>& blocks) {
  Offsets o;
  o.at.reserve(blocks.size());
  for (const auto& blk : blocks) {
    o.at.push_back(o.total);
    o.total += blk.vdim();
  }
  return o;
}

// Homogeneous self-dual embedding for the equality-free cone program
//   minimize c'x  s.t.  G x + s = h,  s in K.
class Hsde {
 public:
  Hsde(const ConicProblem& prob, const ConicSettings& cfg) : cfg_(cfg) {
    n_ = prob.num_vars;
    blocks_ = prob.blocks;
    c_ = prob.c;
    if (prob.A.rows() > 0) throw std::invalid_argument("Hsde: equalities must be eliminated");
    if (c_.size() != n_) throw std::invalid_argument("solve_conic: c has wrong size");
    for (const auto& blk : blocks_) {
      if (blk.G.rows() != blk.vdim() ||
          blk.G.cols() != static_cast<Eigen::Index>(blk.cols.size()) ||
          blk.h.size() != blk.vdim()) {
        throw std::invalid_argument("solve_conic: inconsistent cone block");
      }
      for (int cidx : blk.cols) {
        if (cidx < 0 || cidx >= n_) throw std::invalid_argument("solve_conic: column out of range");
      }
    }
    if (blocks_.empty()) throw std::invalid_argument("solve_conic: no cone constraints");
    off_ = make_offsets(blocks_);
    vd_ = off_.total;
    deg_ = prob.cone_degree() + 1;  // +1 for the (tau, kappa) pair
    equilibrate();
    hstack_.resize(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      hstack_.segment(off_.at[bi], blocks_[bi].vdim()) = blocks_[bi].h;
    }
    data_norm_ = 1.0;
    for (const auto& blk : blocks_) {
      if (blk.G.size()) data_norm_ = std::max(data_norm_, blk.G.cwiseAbs().maxCoeff());
    }
  }

  ConicResult run() {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd s = cone_identity();
    Eigen::VectorXd z = cone_identity();
    double tau = 1.0, kappa = 1.0;

    ConicResult res;

    struct Snapshot {
      Eigen::VectorXd x, z, s;
      double tau{1.0};
      double pres{0}, dres{0}, gap{0}, relgap{0}, pobj{0}, dobj{0};
      double merit{std::numeric_limits<double>::infinity()};
      int iter{0};
    } best;

    for (int iter = 0; iter <= cfg_.max_iters; ++iter) {
      Eigen::VectorXd resx = mul_Gt(z) + c_ * tau;
      Eigen::VectorXd resz = mul_G(x) + s - hstack_ * tau;
      double resg = kappa + c_.dot(x) + hstack_.dot(z);
      double mu = (s.dot(z) + tau * kappa) / deg_;

      // per-block inf-norm residuals on the de-homogenized iterate; the data
      // is block-equilibrated so these are absolute-scale residuals
      double pres = 0.0;
      for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        double hn = std::max(1.0, blocks_[bi].h.cwiseAbs().maxCoeff());
        pres = std::max(pres,
                        resz.segment(off_.at[bi], blocks_[bi].vdim()).cwiseAbs().maxCoeff() /
                            (tau * hn));
      }
      // backward-error normalization: the dual residual is measured against
      // the componentwise absolute sum of the terms it cancels
      Eigen::VectorXd dabs = Eigen::VectorXd::Zero(n_);
      for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& blk = blocks_[bi];
        Eigen::VectorXd za =
            blk.G.cwiseAbs().transpose() * z.segment(off_.at[bi], blk.vdim()).cwiseAbs();
        for (std::size_t k = 0; k < blk.cols.size(); ++k) {
          dabs(blk.cols[k]) += za(static_cast<Eigen::Index>(k));
        }
      }
      double dual_scale = std::max({1.0, c_.cwiseAbs().maxCoeff(), dabs.maxCoeff() / tau});
      double dres = resx.cwiseAbs().maxCoeff() / (tau * dual_scale);
      double pobj = c_.dot(x) / tau;
      double dobj = -hstack_.dot(z) / tau;
      double gap = s.dot(z) / (tau * tau);
      double relgap = gap / std::max(1.0, std::abs(pobj));

      if (cfg_.verbose) {
        std::printf(
            "iter %3d  pobj % .6e dobj % .6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
            iter, pobj, dobj, gap, pres, dres, tau, kappa);
      }

      double merit = std::max({pres, dres, relgap});
      if (merit < best.merit) {
        best = Snapshot{x, z, s, tau, pres, dres, gap, relgap, pobj, dobj, merit, iter};
      }

      if (pres <= cfg_.feas_tol && dres <= cfg_.feas_tol && relgap <= cfg_.gap_tol) {
        res.status = ConicStatus::Optimal;
        finalize(res, x, z, s, tau);
        res.pobj = pobj;
        res.dobj = dobj;
        res.gap = gap;
        res.pres = pres;
        res.dres = dres;
        res.iters = iter;
        return res;
      }

      // infeasibility certificates, Oettli-normalized: the ray residual is
      // measured against the componentwise magnitude of its own terms. The
      // embedding's own vote (kappa dominating tau) gates the tests so a
      // barely-feasible endgame cannot produce a spurious certificate.
      const bool embedding_infeasible = kappa > tau;
      double nu = -hstack_.dot(z);
      double habs = hstack_.cwiseAbs().dot(z.cwiseAbs());
      if (embedding_infeasible && nu > 1e-4 * std::max(1e-300, habs)) {
        double certres = mul_Gt(z).cwiseAbs().maxCoeff() / std::max(1e-300, dabs.maxCoeff());
        if (cfg_.verbose) std::printf("      pinf certres %.2e nu/habs %.2e\n", certres, nu / habs);
        if (certres <= 1e3 * cfg_.feas_tol) {
          res.status = ConicStatus::PrimalInfeasible;
          finalize(res, x, z, s, 1.0);
          res.z /= nu;
          res.iters = iter;
          res.message = "primal infeasibility certificate found";
          return res;
        }
      }
      double xi = -c_.dot(x);
      if (embedding_infeasible && xi > cfg_.feas_tol * std::max(1.0, x.norm())) {
        // componentwise magnitude of G x + s along the ray
        double pabs = 0.0;
        Eigen::VectorXd gx = mul_G(x);
        for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
          const auto& blk = blocks_[bi];
          Eigen::VectorXd xa(blk.cols.size());
          for (std::size_t k = 0; k < blk.cols.size(); ++k) {
            xa(static_cast<Eigen::Index>(k)) = x(blk.cols[k]);
          }
          pabs = std::max(pabs, (blk.G.cwiseAbs() * xa.cwiseAbs() +
                                 s.segment(off_.at[bi], blk.vdim()).cwiseAbs())
                                    .maxCoeff());
        }
        double certres = (gx + s).cwiseAbs().maxCoeff() / std::max(1.0, pabs);
        if (certres <= 1e3 * cfg_.feas_tol && xi > 1e-4 * pabs) {
          res.status = ConicStatus::DualInfeasible;
          finalize(res, x, z, s, 1.0);
          res.x /= xi;
          res.iters = iter;
          res.message = "dual infeasibility certificate found (objective unbounded)";
          return res;
        }
      }

      if (merit > 100.0 * best.merit && best.merit < 1e-4) {
        res.message = "progress reversed; returning best iterate";
        break;
      }
      if (iter == cfg_.max_iters) break;

      if (!compute_scalings(s, z)) {
        res.message = "cone iterate lost positive definiteness";
        break;
      }
      scale_columns();

      // adaptive proximal regularization ladder
      Eigen::VectorXd x1(n_), zt1(vd_);
      Eigen::VectorXd dxa(n_), dza(vd_), dsa(vd_), zta(vd_);
      Eigen::VectorXd dx(n_), dz(vd_), ds(vd_), ztc(vd_);
      double dta = 0.0, dka = 0.0, dt = 0.0, dk = 0.0;
      bool direction_ok = false;
      for (double reg = cfg_.static_reg; reg <= 1e-4; reg *= 1e3) {
        if (!factor_schur(reg)) continue;
        double acc = solve_kkt(-c_, scale_z(hstack_), x1, zt1);
        Eigen::VectorXd z1 = unscale_z(zt1);
        double den = c_.dot(x1) + hstack_.dot(z1) - kappa / tau;
        if (!(den < 0.0) || acc > 1e-4) continue;

        // affine (predictor) direction
        Eigen::VectorXd ds_rhs = scaled_lambda_sq(-1.0);
        double dk_rhs = -tau * kappa;
        acc = newton_step(1.0, resx, resz, resg, ds_rhs, dk_rhs, x1, z1, den, tau, kappa, dxa,
                          dza, zta, dsa, dta, dka);
        if (acc > 1e-4) continue;
        double alpha_aff = std::min(1.0, max_step(s, z, tau, kappa, dsa, dza, dta, dka));
        double mu_aff = ((s + alpha_aff * dsa).dot(z + alpha_aff * dza) +
                         (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)) /
                        deg_;
        double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

        // combined direction with the Mehrotra correction in scaled space
        ds_rhs = scaled_lambda_sq(-1.0);
        add_identity(ds_rhs, sigma * mu);
        subtract_scaled_correction(ds_rhs, dsa, zta);
        dk_rhs = sigma * mu - tau * kappa - dta * dka;
        acc = newton_step(1.0 - sigma, resx, resz, resg, ds_rhs, dk_rhs, x1, z1, den, tau, kappa,
                          dx, dz, ztc, ds, dt, dk);
        if (acc > 1e-4) continue;
        direction_ok = true;
        break;
      }
      if (!direction_ok) {
        res.message = "KKT system solved too inaccurately; returning best iterate";
        break;
      }

      double alpha = cfg_.step_frac * max_step(s, z, tau, kappa, ds, dz, dt, dk);
      alpha = std::min(alpha, 1.0);
      if (alpha < 1e-8) {
        res.message = "step length collapsed; returning best iterate";
        break;
      }

      x += alpha * dx;
      z += alpha * dz;
      s += alpha * ds;
      tau += alpha * dt;
      kappa += alpha * dk;
    }

    // breakdown or iteration cap: accept the best iterate at a mildly relaxed
    // tolerance, otherwise report the failure honestly
    if (best.merit < std::numeric_limits<double>::infinity()) {
      const bool acceptable = best.pres <= 300.0 * cfg_.feas_tol &&
                              best.dres <= 300.0 * cfg_.feas_tol &&
                              best.relgap <= 300.0 * cfg_.gap_tol;
      finalize(res, best.x, best.z, best.s, best.tau);
      res.pobj = best.pobj;
      res.dobj = best.dobj;
      res.gap = best.gap;
      res.pres = best.pres;
      res.dres = best.dres;
      res.iters = best.iter;
      if (acceptable) {
        res.status = ConicStatus::Optimal;
        res.message += (res.message.empty() ? "" : "; ");
        res.message += "accepted at relaxed tolerance";
        return res;
      }
    } else {
      finalize(res, x, z, s, std::max(tau, 1e-300));
    }
    res.status = ConicStatus::NumericalFailure;
    if (res.message.empty()) res.message = "iteration limit reached without certificate";
    return res;
  }

 private:
  ConicSettings cfg_;
  int n_{0}, vd_{0};
  double deg_{1};
  double data_norm_{1.0};
  std::vector<ConeBlock> blocks_;
  Eigen::VectorXd c_;
  Offsets off_;
  Eigen::VectorXd hstack_;
  Eigen::VectorXd col_scale_;
  std::vector<double> block_scale_;
  std::vector<Scaling> scal_;
  std::vector<Eigen::MatrixXd> gs_;  // W^{-T}-scaled G per block, per iteration
  Eigen::LDLT<Eigen::MatrixXd> ldlt_M_;
  Eigen::MatrixXd M_;
  Eigen::VectorXd jacobi_;
  double reg_{0.0};

  void equilibrate() {
    block_scale_.assign(blocks_.size(), 1.0);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      auto& blk = blocks_[bi];
      double m = blk.h.size() ? blk.h.cwiseAbs().maxCoeff() : 0.0;
      if (blk.G.size()) m = std::max(m, blk.G.cwiseAbs().maxCoeff());
      double sc = (m > 1e-12) ? 1.0 / m : 1.0;
      block_scale_[bi] = sc;
      blk.G *= sc;
      blk.h *= sc;
    }
    col_scale_ = Eigen::VectorXd::Ones(n_);
    Eigen::VectorXd colmax = Eigen::VectorXd::Zero(n_);
    for (const auto& blk : blocks_) {
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        colmax(blk.cols[k]) = std::max(
            colmax(blk.cols[k]), blk.G.col(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff());
      }
    }
    for (int j = 0; j < n_; ++j) {
      if (colmax(j) > 1e-12) col_scale_(j) = 1.0 / colmax(j);
    }
    for (auto& blk : blocks_) {
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        blk.G.col(static_cast<Eigen::Index>(k)) *= col_scale_(blk.cols[k]);
      }
    }
    c_ = col_scale_.asDiagonal() * c_;
  }

  void finalize(ConicResult& res, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                const Eigen::VectorXd& s, double tau) const {
    res.x = col_scale_.asDiagonal() * x / tau;
    res.y.resize(0);
    res.z.resize(vd_);
    res.s.resize(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      int o = off_.at[bi], d = blocks_[bi].vdim();
      res.z.segment(o, d) = z.segment(o, d) * block_scale_[bi] / tau;
      res.s.segment(o, d) = s.segment(o, d) / block_scale_[bi] / tau;
    }
  }

  Eigen::VectorXd cone_identity() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        e(off_.at[bi]) = 1.0;
      } else {
        int k = off_.at[bi];
        for (int j = 0; j < blk.dim; ++j) {
          e(k) = 1.0;
          k += blk.dim - j;
        }
      }
    }
    return e;
  }

  Eigen::VectorXd mul_G(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      Eigen::VectorXd xa(blk.cols.size());
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        xa(static_cast<Eigen::Index>(k)) = x(blk.cols[k]);
      }
      out.segment(off_.at[bi], blk.vdim()) = blk.G * xa;
    }
    return out;
  }

  Eigen::VectorXd mul_Gt(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      Eigen::VectorXd za = blk.G.transpose() * z.segment(off_.at[bi], blk.vdim());
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        out(blk.cols[k]) += za(static_cast<Eigen::Index>(k));
      }
    }
    return out;
  }

  bool compute_scalings(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    scal_.assign(blocks_.size(), Scaling{});
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        double sv = s(off_.at[bi]), zv = z(off_.at[bi]);
        if (!(sv > 0.0 && zv > 0.0)) return false;
        sc.w = std::sqrt(sv / zv);
        sc.lam = Eigen::VectorXd::Constant(1, std::sqrt(sv * zv));
      } else {
        Eigen::MatrixXd S = smat(s.segment(off_.at[bi], blk.vdim()), blk.dim);
        Eigen::MatrixXd Z = smat(z.segment(off_.at[bi], blk.vdim()), blk.dim);
        Eigen::LLT<Eigen::MatrixXd> ls(S), lz(Z);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
        Eigen::MatrixXd Ls = ls.matrixL();
        Eigen::MatrixXd Lz = lz.matrixL();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Ls,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::VectorXd sig = svd.singularValues();
        if (sig.minCoeff() <= 0.0) return false;
        Eigen::VectorXd isqrt = sig.cwiseSqrt().cwiseInverse();
        sc.R = Ls * svd.matrixV() * isqrt.asDiagonal();
        sc.Rinv = isqrt.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
        sc.lam = sig;
      }
    }
    return true;
  }

  // z-scalings: zt = W z = svec(R' Z R); the inverse maps back
  Eigen::VectorXd scale_z(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        out(off_.at[bi]) = v(off_.at[bi]) / sc.w;
      } else {
        out.segment(off_.at[bi], blk.vdim()) = svec(
            sc.Rinv * smat(v.segment(off_.at[bi], blk.vdim()), blk.dim) * sc.Rinv.transpose());
      }
    }
    return out;
  }

  Eigen::VectorXd unscale_z(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        out(off_.at[bi]) = v(off_.at[bi]) / sc.w;
      } else {
        out.segment(off_.at[bi], blk.vdim()) =
            svec(sc.Rinv.transpose() *
                 smat(v.segment(off_.at[bi], blk.vdim()), blk.dim) * sc.Rinv);
      }
    }
    return out;
  }

  void scale_columns() {
    gs_.assign(blocks_.size(), Eigen::MatrixXd());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      Eigen::MatrixXd& g = gs_[bi];
      g.resize(blk.vdim(), static_cast<Eigen::Index>(blk.cols.size()));
      if (blk.kind == ConeKind::NonNeg) {
        g = blk.G / sc.w;
      } else {
        for (Eigen::Index k = 0; k < blk.G.cols(); ++k) {
          g.col(k) =
              svec(sc.Rinv * smat(blk.G.col(k), blk.dim) * sc.Rinv.transpose());
        }
      }
    }
  }

  bool factor_schur(double reg) {
    M_ = Eigen::MatrixXd::Zero(n_, n_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      Eigen::MatrixXd Mloc = gs_[bi].transpose() * gs_[bi];
      const int na = static_cast<int>(blk.cols.size());
      for (int r = 0; r < na; ++r) {
        for (int cidx = 0; cidx < na; ++cidx) M_(blk.cols[r], blk.cols[cidx]) += Mloc(r, cidx);
      }
    }
    reg_ = reg * std::max(1.0, M_.diagonal().maxCoeff());
    Eigen::MatrixXd Mr = M_ + reg_ * Eigen::MatrixXd::Identity(n_, n_);
    jacobi_ = Mr.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Mr = jacobi_.asDiagonal() * Mr * jacobi_.asDiagonal();
    ldlt_M_.compute(Mr);
    return ldlt_M_.info() == Eigen::Success && ldlt_M_.isPositive();
  }

  Eigen::VectorXd solve_M(const Eigen::VectorXd& rhs) const {
    return jacobi_.asDiagonal() *
           Eigen::VectorXd(ldlt_M_.solve(Eigen::VectorXd(jacobi_.asDiagonal() * rhs)));
  }

  Eigen::VectorXd mul_Gs(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      Eigen::VectorXd xa(blk.cols.size());
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        xa(static_cast<Eigen::Index>(k)) = x(blk.cols[k]);
      }
      out.segment(off_.at[bi], blk.vdim()) = gs_[bi] * xa;
    }
    return out;
  }

  Eigen::VectorXd mul_Gst(const Eigen::VectorXd& zt) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      Eigen::VectorXd za = gs_[bi].transpose() * zt.segment(off_.at[bi], blk.vdim());
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        out(blk.cols[k]) += za(static_cast<Eigen::Index>(k));
      }
    }
    return out;
  }

  // Solves [reg I, Gs'; Gs, -I] [ux; zt] = [bx; bzt] (the W-scaled reduced
  // KKT system) with iterative refinement; returns the relative residual.
  double solve_kkt(const Eigen::VectorXd& bx, const Eigen::VectorXd& bzt, Eigen::VectorXd& ux,
                   Eigen::VectorXd& zt) const {
    auto once = [&](const Eigen::VectorXd& fx, const Eigen::VectorXd& fzt, Eigen::VectorXd& ox,
                    Eigen::VectorXd& ozt) {
      ox = solve_M(fx + mul_Gst(fzt));
      ozt = mul_Gs(ox) - fzt;
    };
    once(bx, bzt, ux, zt);
    const double scale = std::max({1.0, bx.cwiseAbs().maxCoeff(), bzt.cwiseAbs().maxCoeff()});
    double rn = std::numeric_limits<double>::infinity();
    double prev = rn, best = rn;
    Eigen::VectorXd bestx = ux, bestz = zt;
    for (int pass = 0; pass < 8; ++pass) {
      Eigen::VectorXd rx = bx - (mul_Gst(zt) + reg_ * ux);
      Eigen::VectorXd rz = bzt - (mul_Gs(ux) - zt);
      rn = std::max(rx.cwiseAbs().maxCoeff(), rz.cwiseAbs().maxCoeff());
      if (rn < best) {
        best = rn;
        bestx = ux;
        bestz = zt;
      }
      if (rn <= 1e-14 * scale || rn >= 0.5 * prev) break;
      prev = rn;
      Eigen::VectorXd cx(n_), cz(vd_);
      once(rx, rz, cx, cz);
      ux += cx;
      zt += cz;
    }
    if (best < rn) {
      ux = bestx;
      zt = bestz;
      rn = best;
    }
    return rn / scale;
  }

  // Full HSDE Newton direction; returns the inner solve accuracy.
  double newton_step(double res_scale, const Eigen::VectorXd& resx, const Eigen::VectorXd& resz,
                     double resg, const Eigen::VectorXd& ds_rhs, double dk_rhs,
                     const Eigen::VectorXd& x1, const Eigen::VectorXd& z1, double den, double tau,
                     double kappa, Eigen::VectorXd& dx, Eigen::VectorXd& dz, Eigen::VectorXd& zt,
                     Eigen::VectorXd& ds, double& dt, double& dk) const {
    Eigen::VectorXd bx = -res_scale * resx;
    Eigen::VectorXd bz = -res_scale * resz;
    // lambda \ ds_rhs in scaled space
    Eigen::VectorXd lds(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      Eigen::VectorXd seg = ds_rhs.segment(off_.at[bi], blk.vdim());
      if (blk.kind == ConeKind::NonNeg) {
        lds(off_.at[bi]) = seg(0) / sc.lam(0);
      } else {
        Eigen::MatrixXd V = smat(seg, blk.dim);
        Eigen::MatrixXd U(blk.dim, blk.dim);
        for (int i = 0; i < blk.dim; ++i) {
          for (int j = 0; j < blk.dim; ++j) U(i, j) = 2.0 * V(i, j) / (sc.lam(i) + sc.lam(j));
        }
        lds.segment(off_.at[bi], blk.vdim()) = svec(U);
      }
    }
    // scaled rhs for the z-row: W^{-T}(bz) - lambda \ ds_rhs
    Eigen::VectorXd bzt = scale_z(bz) - lds;

    Eigen::VectorXd x2(n_), zt2(vd_);
    double acc = solve_kkt(bx, bzt, x2, zt2);
    Eigen::VectorXd z2 = unscale_z(zt2);

    double rhs4 = -res_scale * resg - dk_rhs / tau;
    dt = (rhs4 - (c_.dot(x2) + hstack_.dot(z2))) / den;
    dx = x2 + dt * x1;
    // zt1 reconstructed from z1 to avoid storing it
    dz = z2 + dt * z1;
    zt = scale_w(dz);
    dk = (dk_rhs - kappa * dt) / tau;
    // ds = W'(lambda \ ds_rhs - W dz)
    ds = apply_wt(lds - zt);
    return acc;
  }

  // W z = svec(R' Z R)
  Eigen::VectorXd scale_w(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        out(off_.at[bi]) = v(off_.at[bi]) * sc.w;
      } else {
        out.segment(off_.at[bi], blk.vdim()) = svec(
            sc.R.transpose() * smat(v.segment(off_.at[bi], blk.vdim()), blk.dim) * sc.R);
      }
    }
    return out;
  }

  // W' u = svec(R U R')
  Eigen::VectorXd apply_wt(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        out(off_.at[bi]) = v(off_.at[bi]) * sc.w;
      } else {
        out.segment(off_.at[bi], blk.vdim()) =
            svec(sc.R * smat(v.segment(off_.at[bi], blk.vdim()), blk.dim) * sc.R.transpose());
      }
    }
    return out;
  }

  Eigen::VectorXd scaled_lambda_sq(double factor) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(vd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        out(off_.at[bi]) = factor * sc.lam(0) * sc.lam(0);
      } else {
        int k = off_.at[bi];
        for (int j = 0; j < blk.dim; ++j) {
          out(k) = factor * sc.lam(j) * sc.lam(j);
          k += blk.dim - j;
        }
      }
    }
    return out;
  }

  void add_identity(Eigen::VectorXd& v, double a) const {
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        v(off_.at[bi]) += a;
      } else {
        int k = off_.at[bi];
        for (int j = 0; j < blk.dim; ++j) {
          v(k) += a;
          k += blk.dim - j;
        }
      }
    }
  }

  // v -= (W^{-T} ds_aff) o (W dz_aff); dz_aff is already provided in scaled
  // form (zt_aff)
  void subtract_scaled_correction(Eigen::VectorXd& v, const Eigen::VectorXd& ds_aff,
                                  const Eigen::VectorXd& zt_aff) const {
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& sc = scal_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        double us = ds_aff(off_.at[bi]) / sc.w;
        v(off_.at[bi]) -= us * zt_aff(off_.at[bi]);
      } else {
        Eigen::MatrixXd Us = sc.Rinv * smat(ds_aff.segment(off_.at[bi], blk.vdim()), blk.dim) *
                             sc.Rinv.transpose();
        Eigen::MatrixXd Uz = smat(zt_aff.segment(off_.at[bi], blk.vdim()), blk.dim);
        Eigen::MatrixXd prod = 0.5 * (Us * Uz + Uz * Us);
        v.segment(off_.at[bi], blk.vdim()) -= svec(prod);
      }
    }
  }

  double max_step(const Eigen::VectorXd& s, const Eigen::VectorXd& z, double tau, double kappa,
                  const Eigen::VectorXd& ds, const Eigen::VectorXd& dz, double dt,
                  double dk) const {
    double amax = std::numeric_limits<double>::infinity();
    auto cap = [&](double v, double dv) {
      if (dv < 0.0) amax = std::min(amax, -v / dv);
    };
    cap(tau, dt);
    cap(kappa, dk);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      if (blk.kind == ConeKind::NonNeg) {
        cap(s(off_.at[bi]), ds(off_.at[bi]));
        cap(z(off_.at[bi]), dz(off_.at[bi]));
      } else {
        amax = std::min(amax, psd_step(s.segment(off_.at[bi], blk.vdim()),
                                       ds.segment(off_.at[bi], blk.vdim()), blk.dim));
        amax = std::min(amax, psd_step(z.segment(off_.at[bi], blk.vdim()),
                                       dz.segment(off_.at[bi], blk.vdim()), blk.dim));
      }
    }
    return amax;
  }

  static double psd_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, int dim) {
    Eigen::MatrixXd S = smat(v, dim);
    Eigen::MatrixXd D = smat(dv, dim);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return 0.0;
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(D);
    T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (T + T.transpose()),
                                                       Eigen::EigenvaluesOnly);
    double lmin = eig.eigenvalues().minCoeff();
    if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
  }
};

}  // namespace

// Equalities are eliminated up front: with A x = b solved by x = x0 + N v
// (N an orthonormal null-space basis of A), the cone problem in v has no
// equality block, which keeps the interior-point linear algebra to a single
// Schur layer. The Householder basis leaves variables untouched by any
// equality on their own axes, so per-block column sparsity survives.
ConicResult solve_conic(const ConicProblem& prob, const ConicSettings& settings) {
  if (prob.A.rows() == 0) {
    Hsde solver(prob, settings);
    return solver.run();
  }

  const int n = prob.num_vars;
  const Eigen::MatrixXd At = prob.A.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  qr.setThreshold(1e-12);
  const int rank = static_cast<int>(qr.rank());

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  if (prob.b.size() > 0 && !prob.b.isZero(0.0)) {
    x0 = prob.A.completeOrthogonalDecomposition().solve(prob.b);
    if ((prob.A * x0 - prob.b).norm() > 1e-9 * std::max(1.0, prob.b.norm())) {
      ConicResult res;
      res.status = ConicStatus::PrimalInfeasible;
      res.message = "equality constraints are inconsistent";
      res.x = x0;
      return res;
    }
  }

  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::MatrixXd N = Q.rightCols(n - rank);
  if (N.cols() == 0) {
    ConicResult res;
    res.x = x0;
    res.status = ConicStatus::Optimal;
    res.pobj = res.dobj = prob.c.dot(x0);
    res.message = "all variables fixed by equalities";
    return res;
  }

  ConicProblem red;
  red.num_vars = static_cast<int>(N.cols());
  red.c = N.transpose() * prob.c;
  red.A.resize(0, red.num_vars);
  red.b.resize(0);
  for (const auto& blk : prob.blocks) {
    Eigen::MatrixXd Nsub(blk.cols.size(), N.cols());
    Eigen::VectorXd x0sub(blk.cols.size());
    for (std::size_t k = 0; k < blk.cols.size(); ++k) {
      Nsub.row(static_cast<Eigen::Index>(k)) = N.row(blk.cols[k]);
      x0sub(static_cast<Eigen::Index>(k)) = x0(blk.cols[k]);
    }
    Eigen::MatrixXd Gfull = blk.G * Nsub;
    ConeBlock nb;
    nb.kind = blk.kind;
    nb.dim = blk.dim;
    nb.h = blk.h - blk.G * x0sub;
    for (int j = 0; j < Gfull.cols(); ++j) {
      if (!Gfull.col(j).isZero(0.0)) nb.cols.push_back(j);
    }
    nb.G.resize(Gfull.rows(), static_cast<Eigen::Index>(nb.cols.size()));
    for (std::size_t k = 0; k < nb.cols.size(); ++k) {
      nb.G.col(static_cast<Eigen::Index>(k)) = Gfull.col(nb.cols[k]);
    }
    red.blocks.push_back(std::move(nb));
  }

  Hsde solver(red, settings);
  ConicResult rr = solver.run();

  ConicResult res = rr;
  res.x = x0 + N * rr.x;
  Eigen::VectorXd gtz = Eigen::VectorXd::Zero(n);
  {
    int off = 0;
    for (const auto& blk : prob.blocks) {
      Eigen::VectorXd za = blk.G.transpose() * rr.z.segment(off, blk.vdim());
      for (std::size_t k = 0; k < blk.cols.size(); ++k) {
        gtz(blk.cols[k]) += za(static_cast<Eigen::Index>(k));
      }
      off += blk.vdim();
    }
  }
  if (rr.status == ConicStatus::PrimalInfeasible) {
    res.y = qr.solve(-gtz);
  } else {
    res.y = qr.solve(-(prob.c + gtz));
  }
  if (rr.status == ConicStatus::Optimal) {
    res.pobj = prob.c.dot(res.x);
    res.dobj = rr.dobj + prob.c.dot(x0);
  }
  return res;
}

}  // namespace lpvjump
