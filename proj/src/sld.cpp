#include "detbound/sld.hpp"

namespace detbound {

namespace {

// Orthonormal basis of the numerical kernel of pi (2 lambda <= cutoff).
Mat kernel_basis(const HermitianEig<double>& e) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (2 * e.values(i) <= kSpectralCutoff) idx.push_back(i);
  Mat k(e.vectors.rows(), Eigen::Index(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) k.col(Eigen::Index(c)) = e.vectors.col(idx[c]);
  return k;
}

void check_solvable(const Mat& kernel, const Mat& dpi) {
  if (kernel.cols() == 0) return;
  double block = max_abs(Mat(kernel.adjoint() * dpi * kernel));
  if (block > 1e-8) {
    throw SldError("SLD equation unsolvable: derivative has kernel-kernel block of norm " +
                   std::to_string(block));
  }
}

void check_inputs(const Mat& pi, const Mat& dpi) {
  if (pi.rows() != dpi.rows() || pi.cols() != dpi.cols()) {
    throw DimensionError("SLD solver: element and derivative sizes differ");
  }
  require_hermitian(dpi, "SLD derivative");
}

}  // namespace

Mat sld_eig(const Mat& pi, const Mat& dpi) {
  check_inputs(pi, dpi);
  auto e = hermitian_eig(pi);
  if (e.values.minCoeff() < -1e-9) throw NotPsdError("sld_eig: POVM element is not PSD");
  check_solvable(kernel_basis(e), dpi);
  Mat d = e.vectors.adjoint() * hermitian_part(dpi) * e.vectors;
  const auto n = pi.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      double s = e.values(a) + e.values(b);
      d(a, b) = s > kSpectralCutoff ? 2.0 * d(a, b) / s : cplx(0);
    }
  }
  return hermitian_part(e.vectors * d * e.vectors.adjoint());
}

Mat sld_vec(const Mat& pi, const Mat& dpi) {
  check_inputs(pi, dpi);
  auto e = hermitian_eig(pi);
  if (e.values.minCoeff() < -1e-9) throw NotPsdError("sld_vec: POVM element is not PSD");
  check_solvable(kernel_basis(e), dpi);
  const auto n = pi.rows();
  Mat id = identity(n);
  Mat lyap = kron(Mat(pi.conjugate()), id) + kron(id, pi);
  Vec l = 2.0 * psd_pinv(lyap, kSpectralCutoff) * vec(hermitian_part(dpi));
  return hermitian_part(unvec(l, n));
}

double sld_residual(const Mat& L, const Mat& pi, const Mat& dpi) {
  auto e = hermitian_eig(pi);
  Mat k = kernel_basis(e);
  Mat r = L * pi + pi * L - 2.0 * dpi;
  if (k.cols() > 0) {
    Mat pk = k * k.adjoint();
    r -= pk * r * pk;
  }
  return max_abs(r);
}

SldSet compute_slds(const Povm& povm, const DerivativeSet& derivs, SldMethod method) {
  SldSet out;
  out.slds.resize(derivs.size());
  for (std::size_t k = 0; k < derivs.size(); ++k) {
    if (derivs[k].size() != povm.size()) {
      throw DimensionError("compute_slds: derivative count does not match outcome count");
    }
    for (std::size_t j = 0; j < povm.size(); ++j) {
      out.slds[k].push_back(method == SldMethod::eigen ? sld_eig(povm[j], derivs[k][j])
                                                       : sld_vec(povm[j], derivs[k][j]));
    }
  }
  return out;
}

Mat q_operator(const std::vector<Mat>& slds, const Povm& povm) {
  if (slds.size() != povm.size()) throw DimensionError("q_operator: SLD count mismatch");
  const auto d = povm.front().rows();
  Mat q = Mat::Zero(d, d);
  for (std::size_t j = 0; j < povm.size(); ++j) q += slds[j] * povm[j] * slds[j];
  return hermitian_part(q);
}

Mat a_operator(const std::vector<Mat>& slds, const Povm& povm) {
  if (slds.size() != povm.size()) throw DimensionError("a_operator: SLD count mismatch");
  const auto d = povm.front().rows();
  Mat a = Mat::Zero(d, d);
  for (std::size_t j = 0; j < povm.size(); ++j) a += slds[j] * povm[j];
  return a;
}

Mat nsld_from_skew(const Mat& L, const Mat& pi, const Mat& skew) {
  double defect = max_abs(Mat(skew + skew.adjoint()));
  if (defect > 1e-10) {
    throw SldError("nsld_from_skew: offset is not skew-Hermitian (defect " + std::to_string(defect) + ")");
  }
  return L + psd_pinv(pi, kSpectralCutoff) * skew;
}

double nsld_residual(const Mat& Lp, const Mat& pi, const Mat& dpi) {
  return max_abs(Mat(Lp.adjoint() * pi + pi * Lp - 2.0 * dpi));
}

}  // namespace detbound
