#include "detbound/sld.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace detbound;
using namespace testing_util;

namespace {

const double kPi = std::acos(-1.0);

}  // namespace

TEST_SUITE("sld") {
  TEST_CASE("bitflip SLD is diagonal") {
    Mat expect = diag2(-1.25, 5);
    Mat le = sld_eig(diag2(0.8, 0.2), diag2(-1, 1));
    Mat lv = sld_vec(diag2(0.8, 0.2), diag2(-1, 1));
    CHECK(max_abs(le - expect) < 1e-12);
    CHECK(max_abs(lv - le) <= 1e-10);
  }

  TEST_CASE("trivial SLD") {
    CHECK(max_abs(sld_eig(identity(2), Mat::Zero(2, 2))) == 0);
    CHECK(max_abs(sld_vec(identity(2), Mat::Zero(2, 2))) == 0);
  }

  TEST_CASE("random qubit residual") {
    auto m = random_model(2, 2, 7);
    Povm p = m.povm(vec1(0));
    auto d = m.derivatives(vec1(0))[0];
    for (std::size_t j = 0; j < p.size(); ++j) {
      Mat l = sld_eig(p[j], d[j]);
      CHECK(sld_residual(l, p[j], d[j]) <= 1e-10);
      CHECK(max_abs(Mat(l * p[j] + p[j] * l - 2.0 * d[j])) <= 1e-10);
    }
  }

  TEST_CASE("dephased model: solvers agree and the SLDs do not commute with Z") {
    auto m = build_named_model("dephased_pvm", {{"theta", kPi / 8}});
    Povm p = m.povm(vec1(0.2));
    auto d = m.derivatives(vec1(0.2))[0];
    for (std::size_t j = 0; j < 2; ++j) {
      Mat le = sld_eig(p[j], d[j]), lv = sld_vec(p[j], d[j]);
      CHECK(max_abs(le - lv) <= 1e-10);
      CHECK(std::abs(le(0, 1)) > 1e-3);
    }
    SldSet s = compute_slds(p, m.derivatives(vec1(0.2)));
    Mat c = s.param(0)[0] * s.param(0)[1] - s.param(0)[1] * s.param(0)[0];
    CHECK(max_abs(c) <= 1e-10);
  }

  TEST_CASE("Q operator examples") {
    auto b = build_named_model("bitflip_z");
    Povm p = b.povm(vec1(0.2));
    SldSet s = compute_slds(p, b.derivatives(vec1(0.2)));
    CHECK(max_abs(q_operator(s, p) - 6.25 * identity(2)) <= 1e-12);

    auto dp = build_named_model("dephased_pvm", {{"theta", kPi / 8}});
    Povm pd = dp.povm(vec1(0.2));
    SldSet sd = compute_slds(pd, dp.derivatives(vec1(0.2)));
    const double expect = std::pow(std::sin(kPi / 8), 2) / 0.16;
    CHECK(max_abs(q_operator(sd, pd) - expect * identity(2)) <= 1e-12);

    std::vector<Mat> zero(2, Mat::Zero(2, 2));
    SldSet sz = compute_slds(p, {zero});
    CHECK(max_abs(q_operator(sz, p)) == 0);
  }

  TEST_CASE("kernel-kernel derivative block is rejected") {
    CHECK_THROWS_AS(sld_eig(diag2(1, 0), diag2(0, 1)), SldError);
    CHECK_THROWS_AS(sld_vec(diag2(1, 0), diag2(0, 1)), SldError);
    Mat off = Mat::Zero(2, 2);
    off(0, 1) = off(1, 0) = 0.3;
    Mat l = sld_eig(diag2(1, 0), off);
    CHECK(sld_residual(l, diag2(1, 0), off) <= 1e-12);
  }

  TEST_CASE("non-Hermitian SLD from a skew offset") {
    Mat pi = diag2(0.8, 0.2), dpi = diag2(-1, 1);
    Mat l = sld_eig(pi, dpi);
    CHECK(max_abs(nsld_from_skew(l, pi, Mat::Zero(2, 2)) - l) == 0);
    Mat s = cplx(0, 0.1) * diag2(1, -1);
    Mat lp = nsld_from_skew(l, pi, s);
    CHECK(nsld_residual(lp, pi, dpi) <= 1e-10);
    CHECK(max_abs(lp - l) > 1e-3);
    CHECK_THROWS_AS(nsld_from_skew(l, pi, diag2(1, 0)), SldError);
  }

  TEST_CASE("skew offset built from a commutator keeps the constraint") {
    // S = pi L - dpi is skew-Hermitian whenever L solves the Lyapunov equation.
    auto m = build_named_model("dephased_pvm", {{"theta", kPi / 8}});
    Povm p = m.povm(vec1(0.2));
    auto d = m.derivatives(vec1(0.2))[0];
    for (std::size_t j = 0; j < 2; ++j) {
      Mat l = sld_eig(p[j], d[j]);
      Mat s = p[j] * l - d[j];
      CHECK(max_abs(Mat(s + s.adjoint())) <= 1e-12);
      CHECK(nsld_residual(nsld_from_skew(l, p[j], s), p[j], d[j]) <= 1e-10);
    }
  }

  TEST_CASE("cross-solver agreement on named and random models") {
    std::vector<DetectorModel> models;
    for (const auto& n : named_models()) models.push_back(build_named_model(n));
    for (const auto& m : models) {
      RVec t(m.params);
      for (int k = 0; k < m.params; ++k) t(k) = 0.3 * m.domain[std::size_t(k)].first + 0.7 * m.domain[std::size_t(k)].second - 0.1;
      Povm p = m.povm(t);
      DerivativeSet d = m.derivatives(t);
      SldSet a = compute_slds(p, d, SldMethod::eigen), b = compute_slds(p, d, SldMethod::vectorised);
      for (int k = 0; k < m.params; ++k)
        for (std::size_t j = 0; j < p.size(); ++j) CHECK(max_abs(a.param(k)[j] - b.param(k)[j]) <= 1e-9);
      for (int k = 0; k < m.params; ++k) CHECK(min_eigenvalue(q_operator(a, p, k)) >= -1e-9);
    }
    for (int i = 0; i < 500; ++i) {
      auto m = random_model(2 + i % 3, 2 + i % 2, derive_seed(500, std::uint64_t(i)));
      Povm p = m.povm(vec1(0));
      auto d = m.derivatives(vec1(0));
      SldSet a = compute_slds(p, d, SldMethod::eigen), b = compute_slds(p, d, SldMethod::vectorised);
      double worst = 0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        worst = std::max(worst, max_abs(a.param(0)[j] - b.param(0)[j]) / (1 + max_abs(a.param(0)[j])));
        CHECK(sld_residual(a.param(0)[j], p[j], d[0][j]) <= 1e-8);
      }
      CHECK(worst <= 1e-9);
      CHECK(min_eigenvalue(q_operator(a, p)) >= -1e-9);
    }
  }

  TEST_CASE("diagonal models have commuting SLDs") {
    auto m = build_named_model("onoff_diagonal", {{"d", 4}});
    RVec t(4);
    t << 0.1, 0.35, 0.6, 0.85;
    Povm p = m.povm(t);
    SldSet s = compute_slds(p, m.derivatives(t));
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l)
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t j = 0; j < 2; ++j) {
            Mat c = s.param(k)[i] * s.param(l)[j] - s.param(l)[j] * s.param(k)[i];
            CHECK(max_abs(c) <= 1e-10);
          }
  }

  TEST_CASE("A operator vanishes on diagonal models") {
    auto b = build_named_model("bitflip_z");
    Povm p = b.povm(vec1(0.3));
    SldSet s = compute_slds(p, b.derivatives(vec1(0.3)));
    CHECK(max_abs(a_operator(s.param(0), p)) <= 1e-12);
  }
}
