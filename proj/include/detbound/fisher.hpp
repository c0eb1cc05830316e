#pragma once

#include "detbound/models.hpp"
#include "detbound/sld.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace detbound {

// An outcome with vanishing probability but nonzero derivative.
class DivergentInformation : public Error {
 public:
  using Error::Error;
};

inline constexpr double kZeroProbability = 1e-12;
inline constexpr double kZeroDerivative = 1e-9;

using Ensemble = std::vector<std::pair<double, Mat>>;

RVec probabilities(const Mat& rho, const Povm& povm);
double cfi(const Mat& rho, const Povm& povm, const std::vector<Mat>& dpi);
RMat cfi_matrix(const Mat& rho, const Povm& povm, const DerivativeSet& derivs);
RMat cfi_matrix(const Ensemble& ensemble, const Povm& povm, const DerivativeSet& derivs);

struct CfiMaxOptions {
  int restarts = 64;
  int grid = 181;
  std::uint64_t seed = 20240611;
  double grad_tol = 1e-8;
  int max_iter = 4000;
};

struct CfiMaxResult {
  double value = 0;
  Vec probe;
  bool converged = false;
};

// Maximum CFI over pure probes for one parameter.
CfiMaxResult cfi_max_probe(const Povm& povm, const std::vector<Mat>& dpi, const CfiMaxOptions& opts = {});
CfiMaxResult cfi_max_probe(const DetectorModel& model, const RVec& theta, int k = 0,
                           const CfiMaxOptions& opts = {});

// Local ascent of the CFI from a given pure state.
CfiMaxResult cfi_ascent(const Povm& povm, const std::vector<Mat>& dpi, Vec psi, double grad_tol = 1e-8,
                        int max_iter = 4000);

double trace_dqfi(const std::vector<Mat>& slds, const Povm& povm);

struct SpectralDqfi {
  double value = 0;
  Vec probe;
  bool degenerate = false;
  double gap = 0;
};

SpectralDqfi spectral_dqfi(const std::vector<Mat>& slds, const Povm& povm);

struct AttainabilityReport {
  bool common_eigvec_found = false;
  bool attainable = false;
  Vec candidate;
  bool real_traces = false;
  double real_traces_residual = 0;
  bool common_eigvec = false;
  double common_eigvec_residual = 0;
  bool top_q = false;
  double top_q_residual = 0;
  double commutator_norm = 0;
};

AttainabilityReport attainability_check(const std::vector<Mat>& slds, const Povm& povm, const Mat& q);

struct OrderingReport {
  bool ok = false;
  double lower_margin = 0;   // J_par - J_Tr / d
  double middle_margin = 0;  // J_Tr - J_par
  double upper_margin = 0;   // d J_par - J_Tr
};

OrderingReport ordering_check(double j_trace, double j_spectral, double d);

RMat dqfi_matrix_trace(const SldSet& slds, const Povm& povm);

// W empty means identity.
double trace_qcrb(const RMat& jt, const RMat& W = RMat());
double gill_massar_qcrb(const RMat& jt);

struct SequentialBound {
  double sequential = 0;
  RVec weights;
  double total_qfi = 0;
};

SequentialBound sequential_bound(const RVec& single_dqfis);

double state_qfi(const Mat& rho, const Mat& drho);

bool is_diagonal_model(const Povm& povm, const DerivativeSet& derivs, double tol = 1e-12);

}  // namespace detbound
