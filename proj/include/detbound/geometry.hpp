#pragma once

#include "detbound/models.hpp"

#include <vector>

namespace detbound {

double operator_fidelity(const Mat& a, const Mat& b);

// 2d - 2 sum_j F(pi_j, pi'_j)
double bures_total_distance(const Povm& p1, const Povm& p2);

struct BuresConvergence {
  double j_trace = 0;
  std::vector<double> deltas;
  std::vector<double> ratios;  // 4 D_total / delta^2
  std::vector<double> errors;  // |ratio - J_Tr|
  bool converged = false;
};

BuresConvergence bures_qfi_check(const DetectorModel& model, const RVec& theta, const std::vector<double>& deltas,
                                 int k = 0);

struct ConvexityReport {
  bool ok = false;
  std::vector<double> lambdas;
  std::vector<double> mixed;     // J_Tr of the mixture
  std::vector<double> combined;  // lambda J_Tr(P1) + (1 - lambda) J_Tr(P2)
  double worst_margin = 0;
};

ConvexityReport convexity_check(const Povm& p1, const std::vector<Mat>& d1, const Povm& p2,
                                const std::vector<Mat>& d2, const std::vector<double>& lambdas = {});

double trace_dqfi_of(const Povm& povm, const std::vector<Mat>& dpi);

// Applies a channel in the Heisenberg picture to every element and derivative.
std::pair<Povm, std::vector<Mat>> apply_channel(const std::vector<Mat>& kraus, const Povm& povm,
                                                const std::vector<Mat>& dpi);

}  // namespace detbound
