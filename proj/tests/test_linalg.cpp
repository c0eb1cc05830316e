#include "detbound/linalg.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace detbound;
using namespace testing_util;

TEST_SUITE("linalg") {
  TEST_CASE("hermitian_eig on fixed inputs") {
    auto e = hermitian_eig(identity(2));
    CHECK(e.values(0) == doctest::Approx(1));
    CHECK(e.values(1) == doctest::Approx(1));
    CHECK(max_abs(e.vectors * e.vectors.adjoint() - identity(2)) < 1e-12);

    e = hermitian_eig(pauli::z());
    CHECK(e.values(0) == doctest::Approx(-1));
    CHECK(e.values(1) == doctest::Approx(1));

    e = hermitian_eig(diag2(0.8, 0.2));
    CHECK(e.values(0) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(e.values(1) == doctest::Approx(0.8).epsilon(1e-14));
  }

  TEST_CASE("hermitian_eig rejects non-Hermitian input") {
    Mat a = Mat::Zero(2, 2);
    a(0, 1) = 1;
    CHECK_THROWS_AS(hermitian_eig(a), NotHermitianError);
  }

  TEST_CASE("psd_sqrt examples") {
    CHECK(max_abs(psd_sqrt(diag2(4, 9)) - diag2(2, 3)) < 1e-12);
    CHECK(max_abs(psd_sqrt(identity(3)) - identity(3)) < 1e-12);
    Mat p = Mat::Constant(2, 2, 0.5);
    CHECK(max_abs(psd_sqrt(p) - p) < 1e-12);
    CHECK_THROWS_AS(psd_sqrt(diag2(1, -0.1)), NotPsdError);
  }

  TEST_CASE("psd_pinv examples") {
    CHECK(max_abs(psd_pinv(diag2(2, 0)) - diag2(0.5, 0)) < 1e-12);
    CHECK(max_abs(psd_pinv(identity(2)) - identity(2)) < 1e-12);
    CHECK(max_abs(psd_pinv(diag2(0.2, 0.8)) - diag2(5, 1.25)) < 1e-12);
  }

  TEST_CASE("kron examples") {
    CHECK(max_abs(kron(identity(2), identity(2)) - identity(4)) == 0);
    Mat expect = Mat::Zero(4, 4);
    expect.diagonal() << 3, 4, 6, 8;
    CHECK(max_abs(kron(diag2(1, 2), diag2(3, 4)) - expect) == 0);
    expect.diagonal() << 1, -1, -1, 1;
    CHECK(max_abs(kron(pauli::z(), pauli::z()) - expect) == 0);
  }

  TEST_CASE("vec and unvec use column stacking") {
    Mat a(2, 2);
    a << 1, 2, 3, 4;
    Vec v = vec(a);
    CHECK(v(0) == cplx(1));
    CHECK(v(1) == cplx(3));
    CHECK(v(2) == cplx(2));
    CHECK(v(3) == cplx(4));
    Vec id = vec(identity(2));
    CHECK(id(0) == cplx(1));
    CHECK(id(1) == cplx(0));
    CHECK(id(2) == cplx(0));
    CHECK(id(3) == cplx(1));
    std::mt19937_64 rng(3);
    Mat x = random_hermitian(3, rng) + cplx(0, 1) * random_hermitian(3, rng);
    CHECK(max_abs(unvec(vec(x)) - x) == 0);
    CHECK_THROWS_AS(unvec(Vec::Zero(5)), DimensionError);
  }

  TEST_CASE("vec identity for a matrix product") {
    // vec(A X B) = (B^T kron A) vec(X), the identity the vectorised SLD solver relies on.
    std::mt19937_64 rng(5);
    Mat a = random_hermitian(3, rng), b = random_hermitian(3, rng), x = random_hermitian(3, rng);
    Vec lhs = vec(Mat(a * x * b));
    Vec rhs = kron(b.transpose(), a) * vec(x);
    CHECK(max_abs(lhs - rhs) < 1e-12);
  }

  TEST_CASE("real_embed examples") {
    RMat y = real_embed(pauli::y());
    RMat expect(4, 4);
    expect << 0, 0, 0, 1, 0, 0, -1, 0, 0, -1, 0, 0, 1, 0, 0, 0;
    CHECK((y - expect).cwiseAbs().maxCoeff() == 0);
    Eigen::SelfAdjointEigenSolver<RMat> es(y);
    RVec ev(4);
    ev << -1, -1, 1, 1;
    CHECK((es.eigenvalues() - ev).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((real_embed(identity(2)) - RMat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0);
    RMat d = real_embed(diag2(0.2, 0.8));
    RVec dd(4);
    dd << 0.2, 0.8, 0.2, 0.8;
    CHECK((d.diagonal() - dd).cwiseAbs().maxCoeff() == 0);
  }

  TEST_CASE("random Hermitian reconstruction and embedding spectra") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 8);
    for (int t = 0; t < 1000; ++t) {
      const int d = dim(rng);
      Mat a = random_hermitian(d, rng);
      auto e = hermitian_eig(a);
      const double scale = 1 + max_abs(a);
      CHECK(max_abs(a - from_eig<double>(e.values, e.vectors)) <= 1e-10 * scale);
      CHECK(max_abs(e.vectors.adjoint() * e.vectors - identity(d)) <= 1e-10);
      Eigen::SelfAdjointEigenSolver<RMat> es(real_embed(a));
      for (int i = 0; i < d; ++i) {
        CHECK(std::abs(es.eigenvalues()(2 * i) - e.values(i)) <= 1e-10 * scale);
        CHECK(std::abs(es.eigenvalues()(2 * i + 1) - e.values(i)) <= 1e-10 * scale);
      }
    }
  }

  TEST_CASE("psd functions on random PSD matrices") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 200; ++t) {
      const int d = 2 + t % 5;
      Mat b = random_hermitian(d, rng);
      Mat a = b * b;
      if (t % 3 == 0) {
        // rank deficient
        auto e = hermitian_eig(a);
        e.values(0) = 0;
        a = from_eig<double>(e.values, e.vectors);
      }
      Mat s = psd_sqrt(a);
      CHECK(max_abs(s * s - a) <= 1e-8 * (1 + max_abs(a)));
      CHECK(min_eigenvalue(s) >= -1e-10);
      Mat p = psd_pinv(a);
      CHECK(max_abs(a * p * a - a) <= 1e-8 * (1 + max_abs(a)));
      CHECK(max_abs(p * a * p - p) <= 1e-8 * (1 + max_abs(p)));
    }
  }

  TEST_CASE("templated kernels accept long double") {
    CMatrix<long double> a = CMatrix<long double>::Identity(2, 2) * 4.0L;
    auto s = psd_sqrt(a);
    CHECK(double(std::abs(s(0, 0) - 2.0L)) < 1e-15);
  }
}
