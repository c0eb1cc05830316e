#pragma once

#include "detbound/models.hpp"

#include <vector>

namespace detbound {

class SldError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSpectralCutoff = 1e-10;

enum class SldMethod { eigen, vectorised };

// slds[k][j] solves L pi_j + pi_j L = 2 d_k pi_j.
struct SldSet {
  std::vector<std::vector<Mat>> slds;

  const std::vector<Mat>& param(int k) const { return slds.at(k); }
  int params() const { return int(slds.size()); }
};

Mat sld_eig(const Mat& pi, const Mat& dpi);
Mat sld_vec(const Mat& pi, const Mat& dpi);

// Max-abs of L pi + pi L - 2 dpi restricted to the support of pi.
double sld_residual(const Mat& L, const Mat& pi, const Mat& dpi);

SldSet compute_slds(const Povm& povm, const DerivativeSet& derivs, SldMethod method = SldMethod::eigen);

Mat q_operator(const std::vector<Mat>& slds, const Povm& povm);
inline Mat q_operator(const SldSet& set, const Povm& povm, int k = 0) {
  return q_operator(set.param(k), povm);
}

// A = sum_j L_j pi_j
Mat a_operator(const std::vector<Mat>& slds, const Povm& povm);

// L' = L + pinv(pi) S for skew-Hermitian S.
Mat nsld_from_skew(const Mat& L, const Mat& pi, const Mat& skew);

// Max-abs of L'^dag pi + pi L' - 2 dpi.
double nsld_residual(const Mat& Lp, const Mat& pi, const Mat& dpi);

}  // namespace detbound
