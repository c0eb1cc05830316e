#include "detbound/montecarlo.hpp"

#include "detbound/fisher.hpp"
#include "detbound/parallel.hpp"
#include "detbound/sld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <ostream>
#include <random>

namespace detbound {

RVec build_unbiased_estimator(const RVec& p, const RVec& dp, double theta_star) {
  if (p.size() != dp.size() || p.size() == 0) throw DimensionError("build_unbiased_estimator: size mismatch");
  if (dp.cwiseAbs().maxCoeff() <= kZeroDerivative) {
    throw EstimatorError("build_unbiased_estimator: all outcome derivatives vanish");
  }
  // Stationarity gives xi_j = a + b dp_j / p_j; the constraints fix (a, b).
  const Eigen::Index m = p.size();
  RVec r = RVec::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (p(j) <= kZeroProbability) {
      if (std::abs(dp(j)) > kZeroDerivative) {
        throw DivergentInformation("build_unbiased_estimator: zero-probability outcome carries a derivative");
      }
      continue;
    }
    r(j) = dp(j) / p(j);
  }
  Eigen::Matrix2d sys;
  sys << p.sum(), dp.sum(), dp.sum(), dp.dot(r);
  Eigen::Vector2d rhs(theta_star, 1.0);
  if (std::abs(sys.determinant()) <= 1e-14 * std::max(1.0, sys.cwiseAbs().maxCoeff())) {
    throw EstimatorError("build_unbiased_estimator: unbiasedness conditions are not jointly solvable");
  }
  Eigen::Vector2d ab = sys.partialPivLu().solve(rhs);
  return RVec::Constant(m, ab(0)) + ab(1) * r;
}

RVec build_unbiased_estimator(const Mat& rho, const Povm& povm, const std::vector<Mat>& dpi, double theta_star) {
  RVec p = probabilities(rho, povm);
  RVec dp(p.size());
  for (std::size_t j = 0; j < dpi.size(); ++j) dp(Eigen::Index(j)) = (rho * dpi[j]).trace().real();
  return build_unbiased_estimator(p, dp, theta_star);
}

double estimator_variance(const RVec& p, const RVec& xi, double theta_star) {
  return p.dot(xi.cwiseProduct(xi)) - theta_star * theta_star;
}

namespace {

double per_shot_mse(const std::vector<long long>& counts, const RVec& xi, double theta_star) {
  long long n = 0;
  for (long long c : counts) n += c;
  if (n <= 0) throw EstimatorError("per_shot_mse: no outcomes recorded");
  double s = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    double e = xi(Eigen::Index(j)) - theta_star;
    s += double(counts[j]) / double(n) * e * e;
  }
  return s;
}

std::vector<long long> multinomial(const RVec& p, long long shots, std::mt19937_64& rng) {
  std::vector<long long> counts(std::size_t(p.size()), 0);
  long long left = shots;
  double mass = 1.0;
  for (Eigen::Index j = 0; j + 1 < p.size() && left > 0; ++j) {
    double q = mass > 0 ? std::clamp(std::max(p(j), 0.0) / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long long> draw(left, q);
    long long c = draw(rng);
    counts[std::size_t(j)] = c;
    left -= c;
    mass -= std::max(p(j), 0.0);
  }
  if (p.size() > 0) counts.back() += left;
  return counts;
}

}  // namespace

std::vector<long long> sample_counts(const RVec& p, long long shots, std::uint64_t seed) {
  if (shots < 1) throw EstimatorError("sample_counts: shot count must be positive");
  std::mt19937_64 rng(seed);
  return multinomial(p / p.sum(), shots, rng);
}

BootstrapResult bootstrap_mse(const std::vector<long long>& counts, const RVec& xi, double theta_star, int R,
                              std::uint64_t seed) {
  if (Eigen::Index(counts.size()) != xi.size()) throw DimensionError("bootstrap_mse: size mismatch");
  BootstrapResult out;
  out.mse = per_shot_mse(counts, xi, theta_star);
  if (R <= 1) return out;
  long long n = 0;
  for (long long c : counts) n += c;
  RVec freq(xi.size());
  for (std::size_t j = 0; j < counts.size(); ++j) freq(Eigen::Index(j)) = double(counts[j]) / double(n);
  std::mt19937_64 rng(seed);
  std::vector<double> stats;
  stats.reserve(std::size_t(R));
  for (int r = 0; r < R; ++r) stats.push_back(per_shot_mse(multinomial(freq, n, rng), xi, theta_star));
  double mean = 0;
  for (double s : stats) mean += s;
  mean /= R;
  double var = 0;
  for (double s : stats) var += (s - mean) * (s - mean);
  out.std = std::sqrt(var / (R - 1));
  return out;
}

MseSweep simulate_sweep(const ExperimentConfig& cfg) {
  const DetectorModel& model = cfg.model;
  if (model.params != 1) throw EstimatorError("simulate_sweep: only single-parameter models are supported");
  if (cfg.shots < 1) throw EstimatorError("simulate_sweep: shot count must be positive");
  RVec theta(1);
  theta << cfg.theta_true;
  model.require_in_domain(theta);
  const Povm povm = model.povm(theta);
  const std::vector<Mat> dpi = model.derivatives(theta).at(0);
  const bool qubit = model.dim == 2;

  std::vector<Mat> slds;
  for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));
  const double qcrb = 1.0 / spectral_dqfi(slds, povm).value;

  MseSweep sweep;
  sweep.rows.resize(cfg.probes.size());
  parallel_for(cfg.probes.size(), cfg.jobs, [&](std::size_t i) {
    MseRow& row = sweep.rows[i];
    row.probe_theta = cfg.probes[i].theta;
    row.probe_phi = cfg.probes[i].phi;
    row.qcrb_spectral = qcrb;
    try {
      if (!qubit) throw EstimatorError("simulate_sweep: Bloch-angle probes need a qubit model");
      Mat rho = probe_from_bloch(row.probe_theta, row.probe_phi);
      RVec xi = build_unbiased_estimator(rho, povm, dpi, cfg.theta_true);
      row.ccrb = 1.0 / cfi(rho, povm, dpi);
      const std::uint64_t stream = derive_seed(cfg.seed, i);
      std::vector<long long> counts = sample_counts(probabilities(rho, povm), cfg.shots, derive_seed(stream, 0));
      double est = 0;
      for (std::size_t j = 0; j < counts.size(); ++j) est += xi(Eigen::Index(j)) * double(counts[j]);
      est /= double(cfg.shots);
      BootstrapResult b = bootstrap_mse(counts, xi, cfg.theta_true, cfg.resamples, derive_seed(stream, 1));
      row.mse_scaled = b.mse;
      row.mse_std = b.std;
      row.bias = est - cfg.theta_true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.mse_scaled = row.mse_std = row.ccrb = row.bias = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return sweep;
}

void write_sweep_csv(std::ostream& os, const MseSweep& sweep, const std::string& manifest) {
  if (!manifest.empty()) os << "# " << manifest << "\n";
  os << "probe_theta,probe_phi,mse_scaled,mse_std,ccrb,qcrb_spectral,bias\n";
  auto old = os.precision(9);
  for (const auto& r : sweep.rows) {
    os << r.probe_theta << ',' << r.probe_phi << ',' << r.mse_scaled << ',' << r.mse_std << ',' << r.ccrb << ','
       << r.qcrb_spectral << ',' << r.bias << "\n";
  }
  os.precision(old);
}

std::vector<ProbeSpec> probe_grid(double lo, double hi, int count, double phi) {
  std::vector<ProbeSpec> out;
  if (count <= 0) return out;
  if (count == 1) return {ProbeSpec{lo, phi}};
  for (int i = 0; i < count; ++i) out.push_back({lo + (hi - lo) * i / (count - 1), phi});
  return out;
}

}  // namespace detbound
