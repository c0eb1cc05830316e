#pragma once

#include "detbound/models.hpp"
#include "detbound/sld.hpp"

namespace detbound {

// Q^(n) = sum_i Q at copy i + sum_{i != j} A at copy i times A^dag at copy j, A = sum_j L_j pi_j.
Mat q_ncopy(const std::vector<Mat>& slds, const Povm& povm, int n);

struct NcopyDqfi {
  double spectral = 0;
  double trace = 0;
};

NcopyDqfi dqfi_ncopy(const Mat& q_n);

struct SandwichReport {
  bool ok = false;
  bool sandwich_ok = false;
  bool ordering_ok = false;
  double lower_margin = 0;  // J^(n) - n J
  double upper_margin = 0;  // n J + n(n-1) a_norm - J^(n)
};

// a_norm is the top eigenvalue of A^dag A for the single-copy A.
SandwichReport sandwich_check(double j1, double jn, int n, double a_norm, double jtr_n, double d);

double a_norm(const std::vector<Mat>& slds, const Povm& povm);

}  // namespace detbound
