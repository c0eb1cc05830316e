#pragma once

#include "detbound/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace detbound {

class EstimatorError : public Error {
 public:
  using Error::Error;
};

// Minimum-variance linear estimator theta_hat = sum_j xi_j f_j with
// sum_j p_j xi_j = theta_star and sum_j dp_j xi_j = 1.
RVec build_unbiased_estimator(const RVec& p, const RVec& dp, double theta_star);
RVec build_unbiased_estimator(const Mat& rho, const Povm& povm, const std::vector<Mat>& dpi, double theta_star);

double estimator_variance(const RVec& p, const RVec& xi, double theta_star);

struct BootstrapResult {
  double mse = 0;  // per-shot mean squared error, i.e. N times the MSE of the estimate
  double std = 0;
};

// Per-shot squared error of the counts and its bootstrap spread over R multinomial resamples.
BootstrapResult bootstrap_mse(const std::vector<long long>& counts, const RVec& xi, double theta_star, int R,
                              std::uint64_t seed);

std::vector<long long> sample_counts(const RVec& p, long long shots, std::uint64_t seed);

struct ProbeSpec {
  double theta = 0;
  double phi = 0;
};

struct ExperimentConfig {
  DetectorModel model;
  double theta_true = 0;
  std::vector<ProbeSpec> probes;
  long long shots = 100000;
  int resamples = 50;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct MseRow {
  double probe_theta = 0;
  double probe_phi = 0;
  double mse_scaled = 0;
  double mse_std = 0;
  double ccrb = 0;
  double qcrb_spectral = 0;
  double bias = 0;
  bool ok = true;
  std::string error;
};

struct MseSweep {
  std::vector<MseRow> rows;
};

MseSweep simulate_sweep(const ExperimentConfig& cfg);

void write_sweep_csv(std::ostream& os, const MseSweep& sweep, const std::string& manifest);

// Evenly spaced probe polar angles in [lo, hi], azimuth phi.
std::vector<ProbeSpec> probe_grid(double lo, double hi, int count, double phi = 0);

}  // namespace detbound
