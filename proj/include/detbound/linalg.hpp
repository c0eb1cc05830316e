#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace detbound {

template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using cplx = std::complex<double>;
using Mat = CMatrix<double>;
using Vec = CVector<double>;
using RMat = RMatrix<double>;
using RVec = RVector<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotHermitianError : public Error {
 public:
  using Error::Error;
};

class NotPsdError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
typename Derived::RealScalar max_abs(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0;
  return a.cwiseAbs().maxCoeff();
}

template <typename Derived>
typename Derived::RealScalar hermiticity_defect(const Eigen::MatrixBase<Derived>& a) {
  return max_abs(a - a.adjoint());
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) return false;
  using Real = typename Derived::RealScalar;
  return hermiticity_defect(a) <= Real(1e-12) * (Real(1) + max_abs(a));
}

template <typename Derived>
void require_hermitian(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!is_hermitian(a)) {
    throw NotHermitianError(std::string(what) + ": matrix is not Hermitian (defect " +
                            std::to_string(double(a.rows() == a.cols() ? hermiticity_defect(a) : -1)) +
                            ")");
  }
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& a) {
  return ((a + a.adjoint()) / typename Derived::RealScalar(2)).eval();
}

template <typename Real>
struct HermitianEig {
  RVector<Real> values;    // ascending
  CMatrix<Real> vectors;   // columns
};

// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
template <typename Derived>
HermitianEig<typename Derived::RealScalar> hermitian_eig(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  require_hermitian(a, "hermitian_eig");
  CMatrix<Real> h = hermitian_part(a);
  Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(h);
  if (es.info() != Eigen::Success) {
    throw Error("hermitian_eig: eigen-solver did not converge within its iteration budget (" +
                std::to_string(Eigen::SelfAdjointEigenSolver<CMatrix<Real>>::m_maxIterations) +
                " sweeps per dimension)");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

template <typename Real>
CMatrix<Real> from_eig(const RVector<Real>& w, const CMatrix<Real>& v) {
  return v * w.template cast<std::complex<Real>>().asDiagonal() * v.adjoint();
}

// Positive square root; eigenvalues above -1e-10 (relative) are clamped to zero.
template <typename Derived>
CMatrix<typename Derived::RealScalar> psd_sqrt(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  auto e = hermitian_eig(a);
  Real scale = std::max<Real>(Real(1), max_abs(a));
  RVector<Real> w = e.values;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < -Real(1e-10) * scale) {
      throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(double(w(i))) + " is negative");
    }
    w(i) = std::sqrt(std::max(w(i), Real(0)));
  }
  return from_eig<Real>(w, e.vectors);
}

// Moore-Penrose inverse of a Hermitian matrix. rank_tol <= 0 selects
// 1e-10 times the largest eigenvalue magnitude.
template <typename Derived>
CMatrix<typename Derived::RealScalar> psd_pinv(const Eigen::MatrixBase<Derived>& a,
                                               typename Derived::RealScalar rank_tol = 0) {
  using Real = typename Derived::RealScalar;
  auto e = hermitian_eig(a);
  Real top = e.values.size() ? e.values.cwiseAbs().maxCoeff() : Real(0);
  Real tol = rank_tol > 0 ? rank_tol : Real(1e-10) * top;
  RVector<Real> w = e.values;
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::abs(w(i)) <= tol ? Real(0) : Real(1) / w(i);
  return from_eig<Real>(w, e.vectors);
}

template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                                         a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Column-stacking vectorisation.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vec(const Eigen::MatrixBase<Derived>& a) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> m = a;
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>(m.data(), m.size());
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> unvec(
    const Eigen::MatrixBase<Derived>& v, Eigen::Index rows) {
  if (rows <= 0 || v.size() % rows != 0) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) + " is not a multiple of " +
                         std::to_string(rows));
  }
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> c = v;
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>>(
      c.data(), rows, v.size() / rows);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> unvec(
    const Eigen::MatrixBase<Derived>& v) {
  auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
  if (n * n != v.size()) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) + " is not a perfect square");
  }
  return unvec(v, n);
}

// ((Re A, -Im A), (Im A, Re A))
template <typename Derived>
RMatrix<typename Derived::RealScalar> real_embed(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  const Eigen::Index n = a.rows(), k = a.cols();
  RMatrix<Real> out(2 * n, 2 * k);
  out.topLeftCorner(n, k) = a.real();
  out.topRightCorner(n, k) = -a.imag();
  out.bottomLeftCorner(n, k) = a.imag();
  out.bottomRightCorner(n, k) = a.real();
  return out;
}

template <typename Real = double>
CMatrix<Real> identity(Eigen::Index d) {
  return CMatrix<Real>::Identity(d, d);
}

template <typename Derived>
typename Derived::RealScalar max_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  return hermitian_eig(a).values.maxCoeff();
}

template <typename Derived>
typename Derived::RealScalar min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  return hermitian_eig(a).values.minCoeff();
}

namespace pauli {
Mat x();
Mat y();
Mat z();
}  // namespace pauli

}  // namespace detbound
