#include "detbound/fisher.hpp"
#include "detbound/montecarlo.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace detbound;
using namespace testing_util;

namespace {

const double kPi = std::acos(-1.0);

ExperimentConfig replica(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.model = build_named_model("dephased_pvm", {{"theta", kPi / 8}, {"phi", 0}});
  cfg.theta_true = 0.2;
  cfg.probes = probe_grid(0.2, 1.0, 33);
  cfg.shots = 100000;
  cfg.resamples = 50;
  cfg.seed = seed;
  return cfg;
}

struct Point {
  RVec p, dp;
};

Point point(const DetectorModel& m, double t, const Mat& rho) {
  Povm povm = m.povm(vec1(t));
  auto d = m.derivatives(vec1(t))[0];
  Point out{probabilities(rho, povm), RVec(povm.size())};
  for (std::size_t j = 0; j < povm.size(); ++j) out.dp(Eigen::Index(j)) = (rho * d[j]).trace().real();
  return out;
}

}  // namespace

TEST_SUITE("montecarlo") {
  TEST_CASE("estimator for the bitflip frequency") {
    auto b = build_named_model("bitflip_z");
    Point pt = point(b, 0.2, probe_from_bloch(0, 0));
    RVec xi = build_unbiased_estimator(pt.p, pt.dp, 0.2);
    CHECK(std::abs(xi(0)) <= 1e-12);
    CHECK(std::abs(xi(1) - 1) <= 1e-12);
    CHECK(estimator_variance(pt.p, xi, 0.2) == doctest::Approx(0.16).epsilon(1e-12));
  }

  TEST_CASE("estimator variance saturates the classical bound") {
    auto d = build_named_model("dephased_pvm", {{"theta", kPi / 8}});
    const double opt = std::atan(std::tan(kPi / 8) / 0.6);
    for (double a : {opt, 0.30, 0.9}) {
      Mat rho = probe_from_bloch(a, 0);
      Point pt = point(d, 0.2, rho);
      RVec xi = build_unbiased_estimator(pt.p, pt.dp, 0.2);
      CHECK(pt.p.dot(xi) == doctest::Approx(0.2).epsilon(1e-12));
      CHECK(pt.dp.dot(xi) == doctest::Approx(1).epsilon(1e-12));
      const double f = cfi(rho, d.povm(vec1(0.2)), d.derivatives(vec1(0.2))[0]);
      CHECK(std::abs(estimator_variance(pt.p, xi, 0.2) - 1 / f) <= 1e-9);
    }
    Point pt = point(d, 0.2, probe_from_bloch(opt, 0));
    CHECK(estimator_variance(pt.p, build_unbiased_estimator(pt.p, pt.dp, 0.2), 0.2) == doctest::Approx(1.0926).epsilon(1e-4));
  }

  TEST_CASE("no-information probe is rejected") {
    auto b = build_named_model("bitflip_z");
    Point pt = point(b, 0.2, probe_from_bloch(kPi / 2, 0));
    CHECK_THROWS_AS(build_unbiased_estimator(pt.p, pt.dp, 0.2), EstimatorError);
    ExperimentConfig cfg;
    cfg.model = b;
    cfg.theta_true = 0.2;
    cfg.probes = {{kPi / 2, 0}, {0, 0}};
    cfg.shots = 1000;
    MseSweep s = simulate_sweep(cfg);
    CHECK_FALSE(s.rows[0].ok);
    CHECK(std::isnan(s.rows[0].mse_scaled));
    CHECK(s.rows[1].ok);
  }

  TEST_CASE("bootstrap conventions") {
    RVec xi = vec2(0.5, -1.0);
    auto r = bootstrap_mse({0, 40}, xi, 0.2, 50, 3);
    CHECK(r.mse == doctest::Approx(1.44).epsilon(1e-12));
    CHECK(r.std <= 1e-12);
    auto one = bootstrap_mse({30, 70}, xi, 0.2, 1, 3);
    CHECK(one.std == 0);
    CHECK(one.mse == doctest::Approx(0.3 * 0.09 + 0.7 * 1.44).epsilon(1e-12));
    auto a = bootstrap_mse({30, 70}, xi, 0.2, 20, 9), b = bootstrap_mse({30, 70}, xi, 0.2, 20, 9);
    CHECK(a.std == b.std);
  }

  TEST_CASE("sampling is deterministic and sums to the shot count") {
    RVec p(3);
    p << 0.2, 0.5, 0.3;
    auto a = sample_counts(p, 12345, 8), b = sample_counts(p, 12345, 8);
    CHECK(a == b);
    CHECK(a[0] + a[1] + a[2] == 12345);
    CHECK_THROWS_AS(sample_counts(p, 0, 1), EstimatorError);
  }

  TEST_CASE("large-sample scaled MSE approaches the classical bound") {
    ExperimentConfig cfg = replica(5);
    cfg.probes = {{0.45, 0}};
    cfg.shots = 10000000;
    cfg.resamples = 1;
    MseRow r = simulate_sweep(cfg).rows[0];
    CHECK(std::abs(r.mse_scaled - r.ccrb) <= 0.01 * r.ccrb);
  }

  TEST_CASE("replica sweep statistics") {
    const ExperimentConfig cfg = replica(12345);
    MseSweep s = simulate_sweep(cfg);
    REQUIRE(s.rows.size() == 33);
    const double qcrb = 1 / (std::pow(std::sin(kPi / 8), 2) / 0.16);
    for (const auto& r : s.rows) {
      CHECK(r.ok);
      CHECK(r.mse_scaled >= 0);
      CHECK(r.ccrb >= r.qcrb_spectral - 1e-9);
      CHECK(r.qcrb_spectral == doctest::Approx(qcrb).epsilon(1e-10));
      CHECK(r.mse_scaled >= qcrb - 5 * r.mse_std);
      CHECK(std::abs(r.bias) <= 5 * std::sqrt(r.ccrb / double(cfg.shots)));
    }
  }

  TEST_CASE("bootstrap spread against the asymptotic prediction") {
    const ExperimentConfig cfg = replica(12345);
    MseSweep s = simulate_sweep(cfg);
    const double opt = std::atan(std::tan(kPi / 8) / 0.6);
    std::size_t best = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i)
      if (std::abs(s.rows[i].probe_theta - opt) < std::abs(s.rows[best].probe_theta - opt)) best = i;
    const MseRow& r = s.rows[best];
    const double gaussian = std::sqrt(2.0 / double(cfg.shots)) * r.mse_scaled;
    CHECK(r.mse_std <= 3 * gaussian);
    CHECK(r.mse_std >= gaussian / 3);
    // Exact delta-method spread of the mean squared error for the two-outcome estimator.
    Mat rho = probe_from_bloch(r.probe_theta, 0);
    Point pt = point(cfg.model, cfg.theta_true, rho);
    RVec xi = build_unbiased_estimator(pt.p, pt.dp, cfg.theta_true);
    RVec e2 = (xi.array() - cfg.theta_true).square();
    const double mean = pt.p.dot(e2);
    const double exact = std::sqrt((pt.p.dot(e2.cwiseProduct(e2)) - mean * mean) / double(cfg.shots));
    CHECK(r.mse_std == doctest::Approx(exact).epsilon(0.35));
  }

  TEST_CASE("sweeps are bitwise reproducible and independent of thread count") {
    ExperimentConfig cfg = replica(77);
    cfg.shots = 20000;
    MseSweep a = simulate_sweep(cfg);
    cfg.jobs = 3;
    MseSweep b = simulate_sweep(cfg);
    std::ostringstream sa, sb;
    write_sweep_csv(sa, a, "");
    write_sweep_csv(sb, b, "");
    CHECK(sa.str() == sb.str());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].mse_scaled == b.rows[i].mse_scaled);
      CHECK(a.rows[i].mse_std == b.rows[i].mse_std);
      CHECK(a.rows[i].bias == b.rows[i].bias);
    }
    cfg.seed = 78;
    CHECK(simulate_sweep(cfg).rows[0].mse_scaled != a.rows[0].mse_scaled);
  }

  TEST_CASE("CSV layout") {
    MseSweep s;
    s.rows.push_back(MseRow{0.5, 0, 1.25, 0.01, 1.2, 1.09, 0.001, true, ""});
    std::ostringstream os;
    write_sweep_csv(os, s, "detbound test");
    CHECK(os.str() == "# detbound test\nprobe_theta,probe_phi,mse_scaled,mse_std,ccrb,qcrb_spectral,bias\n"
                      "0.5,0,1.25,0.01,1.2,1.09,0.001\n");
  }

  TEST_CASE("probe grid") {
    auto g = probe_grid(0.2, 1.0, 33);
    REQUIRE(g.size() == 33);
    CHECK(g.front().theta == doctest::Approx(0.2));
    CHECK(g.back().theta == doctest::Approx(1.0));
    CHECK(g[1].theta - g[0].theta == doctest::Approx(0.025));
    CHECK(probe_grid(0.3, 0.9, 1).size() == 1);
    CHECK(probe_grid(0.3, 0.9, 0).empty());
  }

  TEST_CASE("invalid configurations") {
    ExperimentConfig cfg = replica(1);
    cfg.theta_true = 0.7;
    CHECK_THROWS(simulate_sweep(cfg));
    cfg = replica(1);
    cfg.shots = 0;
    CHECK_THROWS_AS(simulate_sweep(cfg), EstimatorError);
    cfg = replica(1);
    cfg.model = build_named_model("onoff_diagonal", {{"d", 2}});
    CHECK_THROWS_AS(simulate_sweep(cfg), EstimatorError);
  }
}
