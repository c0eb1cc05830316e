#include "detbound/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace detbound {

namespace {

RMat sym(const RMat& m) { return (m + m.transpose()) / 2; }

double inner(const RMat& a, const RMat& b) { return a.cwiseProduct(b).sum(); }

// Largest step a with M + a D still PSD (infinite if unbounded).
double max_step(const RMat& m, const RMat& d) {
  Eigen::LLT<RMat> llt(m);
  if (llt.info() != Eigen::Success) return 0;
  RMat li_d = llt.matrixL().solve(d);
  RMat t = llt.matrixL().solve(li_d.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(sym(t), Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff();
  return lo < 0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

double scalar_step(double v, double dv) {
  return dv < 0 ? -v / dv : std::numeric_limits<double>::infinity();
}

// Homogeneous self-dual embedding of
//   primal  min <C,X>  s.t. <A_i,X> = b_i, X psd
//   dual    max b.y    s.t. sum y_i A_i + S = C, S psd
// with C = F0, A_i = -F_i, b = -c, so that S = F(y).
class HsdSolver {
 public:
  HsdSolver(const SdpProblem& p, const SdpOptions& o) : prob_(p), opts_(o) {
    k_ = p.variables();
    nb_ = p.blocks.size();
    b_ = -p.c;
    for (const auto& blk : p.blocks) total_dim_ += int(blk.F0.rows());
  }

  SdpSolution run() {
    std::vector<RMat> X(nb_), S(nb_);
    for (std::size_t q = 0; q < nb_; ++q) {
      const auto n = prob_.blocks[q].F0.rows();
      X[q] = RMat::Identity(n, n);
      S[q] = RMat::Identity(n, n);
    }
    RVec y = RVec::Zero(k_);
    double tau = 1, kappa = 1;
    double normC = 0;
    for (const auto& blk : prob_.blocks) normC += blk.F0.squaredNorm();
    normC = std::sqrt(normC);
    const double normB = b_.norm();

    SdpSolution sol;
    int it = 0;
    for (; it <= opts_.max_iter; ++it) {
      // Residuals.
      RVec rp = apply_A(X) - b_ * tau;
      std::vector<RMat> rd(nb_);
      double rd_norm = 0, cx = 0;
      for (std::size_t q = 0; q < nb_; ++q) {
        rd[q] = adjoint_A(y, q) + S[q] - C(q) * tau;
        rd_norm += rd[q].squaredNorm();
        cx += inner(C(q), X[q]);
      }
      rd_norm = std::sqrt(rd_norm);
      double by = b_.dot(y);
      double rg = cx - by + kappa;
      double xs = 0;
      for (std::size_t q = 0; q < nb_; ++q) xs += inner(X[q], S[q]);
      double mu = (xs + tau * kappa) / (total_dim_ + 1);

      sol.primal_infeasibility = rp.norm() / tau / (1 + normB);
      sol.dual_infeasibility = rd_norm / tau / (1 + normC);
      sol.duality_gap = std::abs(cx - by) / tau / (1 + std::abs(by) / tau);
      sol.iterations = it;
      if (sol.primal_infeasibility <= opts_.tol && sol.dual_infeasibility <= opts_.tol &&
          sol.duality_gap <= opts_.tol) {
        sol.status = SdpStatus::optimal;
        break;
      }
      if (tau < 1e-10 * std::max(1.0, kappa) && mu < 1e-12) {
        sol.status = SdpStatus::infeasible;
        break;
      }
      if (it == opts_.max_iter) break;

      // Scaling quantities.
      std::vector<RMat> sinv(nb_);
      bool factored = true;
      for (std::size_t q = 0; q < nb_ && factored; ++q) {
        Eigen::LLT<RMat> llt(S[q]);
        factored = llt.info() == Eigen::Success;
        sinv[q] = llt.solve(RMat::Identity(S[q].rows(), S[q].cols()));
      }
      if (!factored) {
        sol.status = SdpStatus::stalled;
        break;
      }
      // T[i][q] = X A_i S^-1
      std::vector<std::vector<RMat>> T(k_, std::vector<RMat>(nb_));
      for (int i = 0; i < k_; ++i)
        for (std::size_t q = 0; q < nb_; ++q) T[i][q] = X[q] * A(i, q) * sinv[q];
      RMat M = RMat::Zero(k_, k_);
      RVec g = RVec::Zero(k_);
      for (int i = 0; i < k_; ++i) {
        for (std::size_t q = 0; q < nb_; ++q) g(i) += inner(C(q), T[i][q].transpose());
        for (int j = i; j < k_; ++j) {
          double s = 0;
          for (std::size_t q = 0; q < nb_; ++q) s += inner(A(i, q), T[j][q].transpose());
          M(i, j) = M(j, i) = s;
        }
      }
      // Jacobi-scaled Schur system, solved through its spectrum so that near-singular
      // directions at a degenerate optimum are dropped rather than amplified.
      RVec dscale = M.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      Eigen::SelfAdjointEigenSolver<RMat> schur(RMat(dscale.asDiagonal() * M * dscale.asDiagonal()));
      const double schur_cut = 1e-14 * schur.eigenvalues().cwiseAbs().maxCoeff();
      RVec schur_inv = schur.eigenvalues().unaryExpr([&](double e) { return e > schur_cut ? 1.0 / e : 0.0; });
      auto schur_solve = [&](const RVec& rhs) -> RVec {
        const RMat& U = schur.eigenvectors();
        RVec t = U.transpose() * (dscale.asDiagonal() * rhs);
        return dscale.asDiagonal() * (U * schur_inv.cwiseProduct(t));
      };

      // The tau equation's pivot is -(<C,XCS^-1> - g'M^-1 g + b'M^-1 b + kappa/tau). The first
      // difference is formed from the projected residual of C so it cannot cancel to zero.
      const RVec zg = schur_solve(g), zb = schur_solve(b_);
      const RVec v = zg + zb, gm = g - b_;
      double proj = 0;
      for (std::size_t q = 0; q < nb_; ++q) {
        RMat cr = C(q) - adjoint_A(zg, q);
        proj += inner(cr, (X[q] * cr * sinv[q]).transpose());
      }
      const double den = -(std::max(proj, 0.0) + std::max(b_.dot(zb), 0.0) + kappa / tau);

      auto direction = [&](double sigma, const std::vector<RMat>* dXa, const std::vector<RMat>* dSa,
                           double corr_tau, std::vector<RMat>& dX, RVec& dy, std::vector<RMat>& dS,
                           double& dtau, double& dkappa) {
        const double eta = 1 - sigma;
        std::vector<RMat> rc(nb_), w(nb_);
        RVec r1 = -eta * rp;
        double r2 = -eta * rg - (sigma * mu - tau * kappa - corr_tau) / tau;
        for (std::size_t q = 0; q < nb_; ++q) {
          rc[q] = sigma * mu * sinv[q] - X[q];
          if (dXa) rc[q] -= sym((*dXa)[q] * (*dSa)[q] * sinv[q]);
          w[q] = rc[q] + eta * sym(X[q] * rd[q] * sinv[q]);
          for (int i = 0; i < k_; ++i) r1(i) -= inner(A(i, q), w[q]);
          r2 -= inner(C(q), w[q]);
        }
        RVec u = schur_solve(r1);
        dtau = (r2 - gm.dot(u)) / den;
        dy = u + dtau * v;
        dX.resize(nb_);
        dS.resize(nb_);
        for (std::size_t q = 0; q < nb_; ++q) {
          dS[q] = -eta * rd[q] - adjoint_A(dy, q) + C(q) * dtau;
          dX[q] = rc[q] - sym(X[q] * dS[q] * sinv[q]);
        }
        dkappa = (sigma * mu - tau * kappa - corr_tau - kappa * dtau) / tau;
      };

      auto step_bound = [&](const std::vector<RMat>& dX, const std::vector<RMat>& dS, double dtau,
                            double dkappa) {
        double a = std::min(scalar_step(tau, dtau), scalar_step(kappa, dkappa));
        for (std::size_t q = 0; q < nb_; ++q) {
          a = std::min(a, max_step(X[q], dX[q]));
          a = std::min(a, max_step(S[q], dS[q]));
        }
        return a;
      };

      // Predictor.
      std::vector<RMat> dXa, dSa;
      RVec dya;
      double dta = 0, dka = 0;
      direction(0.0, nullptr, nullptr, 0.0, dXa, dya, dSa, dta, dka);
      double aa = std::min(1.0, step_bound(dXa, dSa, dta, dka));
      double mua = 0;
      for (std::size_t q = 0; q < nb_; ++q) mua += inner(X[q] + aa * dXa[q], S[q] + aa * dSa[q]);
      mua = (mua + (tau + aa * dta) * (kappa + aa * dka)) / (total_dim_ + 1);
      double sigma = std::clamp(std::pow(mua / mu, 3), 0.0, 1.0);

      // Corrector.
      std::vector<RMat> dX, dS;
      RVec dy;
      double dt = 0, dk = 0;
      direction(sigma, &dXa, &dSa, dta * dka, dX, dy, dS, dt, dk);
      double a = std::min(1.0, 0.95 * step_bound(dX, dS, dt, dk));
      if (!(a > 1e-12) || !std::isfinite(dt) || !dy.allFinite()) {
        sol.status = SdpStatus::stalled;
        break;
      }
      for (std::size_t q = 0; q < nb_; ++q) {
        X[q] = sym(X[q] + a * dX[q]);
        S[q] = sym(S[q] + a * dS[q]);
      }
      y += a * dy;
      tau += a * dt;
      kappa += a * dk;
    }

    sol.x = y / tau;
    sol.objective = prob_.c.dot(sol.x);
    sol.dual.resize(nb_);
    sol.min_block_eigenvalue = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < nb_; ++q) {
      sol.dual[q] = X[q] / tau;
      RMat f = prob_.blocks[q].F0;
      for (int i = 0; i < k_; ++i) f += sol.x(i) * prob_.blocks[q].F[i];
      Eigen::SelfAdjointEigenSolver<RMat> es(sym(f), Eigen::EigenvaluesOnly);
      sol.min_block_eigenvalue = std::min(sol.min_block_eigenvalue, es.eigenvalues().minCoeff());
    }
    return sol;
  }

 private:
  const RMat& C(std::size_t q) const { return prob_.blocks[q].F0; }
  RMat A(int i, std::size_t q) const { return -prob_.blocks[q].F[i]; }

  RVec apply_A(const std::vector<RMat>& X) const {
    RVec out = RVec::Zero(k_);
    for (int i = 0; i < k_; ++i)
      for (std::size_t q = 0; q < nb_; ++q) out(i) -= inner(prob_.blocks[q].F[i], X[q]);
    return out;
  }

  RMat adjoint_A(const RVec& y, std::size_t q) const {
    RMat out = RMat::Zero(C(q).rows(), C(q).cols());
    for (int i = 0; i < k_; ++i)
      if (y(i) != 0) out -= y(i) * prob_.blocks[q].F[i];
    return out;
  }

  const SdpProblem& prob_;
  SdpOptions opts_;
  int k_ = 0;
  std::size_t nb_ = 0;
  int total_dim_ = 0;
  RVec b_;
};

}  // namespace

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal:
      return "optimal";
    case SdpStatus::max_iter:
      return "max_iter";
    case SdpStatus::infeasible:
      return "infeasible";
    case SdpStatus::stalled:
      return "stalled";
  }
  return "unknown";
}

bool usable(const SdpSolution& s, double loose) {
  if (s.status == SdpStatus::optimal) return true;
  return s.status == SdpStatus::stalled && s.duality_gap <= loose && s.primal_infeasibility <= 100 * loose &&
         s.dual_infeasibility <= loose;
}

void SdpProblem::validate() const {
  if (c.size() == 0) throw SdpError("SDP has no variables");
  if (blocks.empty()) throw SdpError("SDP has no constraint blocks");
  for (std::size_t q = 0; q < blocks.size(); ++q) {
    const auto& blk = blocks[q];
    const auto n = blk.F0.rows();
    if (n == 0 || blk.F0.cols() != n) throw SdpError("SDP block " + std::to_string(q) + " is not square");
    if (int(blk.F.size()) != variables()) {
      throw SdpError("SDP block " + std::to_string(q) + " has " + std::to_string(blk.F.size()) +
                     " coefficient matrices for " + std::to_string(variables()) + " variables");
    }
    auto check = [&](const RMat& m) {
      if (m.rows() != n || m.cols() != n) throw SdpError("SDP block " + std::to_string(q) + " size mismatch");
      if (max_abs(RMat(m - m.transpose())) > 1e-12 * (1 + max_abs(m))) {
        throw SdpError("SDP block " + std::to_string(q) + " has a non-symmetric coefficient");
      }
    };
    check(blk.F0);
    for (const auto& f : blk.F) check(f);
  }
}

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts) {
  problem.validate();
  return HsdSolver(problem, opts).run();
}

SdpBlock embed_hermitian_block(const Mat& F0, const std::vector<Mat>& F) {
  SdpBlock blk;
  blk.F0 = real_embed(F0);
  blk.F.reserve(F.size());
  for (const auto& f : F) blk.F.push_back(real_embed(f));
  return blk;
}

std::vector<Mat> skew_hermitian_basis(int d) {
  std::vector<Mat> out;
  for (int a = 0; a < d; ++a) {
    Mat e = Mat::Zero(d, d);
    e(a, a) = cplx(0, 1);
    out.push_back(e);
  }
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      Mat re = Mat::Zero(d, d), im = Mat::Zero(d, d);
      re(a, b) = 1;
      re(b, a) = -1;
      im(a, b) = cplx(0, 1);
      im(b, a) = cplx(0, 1);
      out.push_back(re);
      out.push_back(im);
    }
  }
  return out;
}

std::vector<Mat> traceless_hermitian_basis(int d) {
  std::vector<Mat> out;
  for (int a = 0; a + 1 < d; ++a) {
    Mat e = Mat::Zero(d, d);
    e(a, a) = 1;
    e(d - 1, d - 1) = -1;
    out.push_back(e);
  }
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      Mat re = Mat::Zero(d, d), im = Mat::Zero(d, d);
      re(a, b) = re(b, a) = 1;
      im(a, b) = cplx(0, -1);
      im(b, a) = cplx(0, 1);
      out.push_back(re);
      out.push_back(im);
    }
  }
  return out;
}

}  // namespace detbound
