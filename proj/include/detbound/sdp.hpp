#pragma once

#include "detbound/fisher.hpp"
#include "detbound/models.hpp"
#include "detbound/sld.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace detbound {

class SdpError : public Error {
 public:
  using Error::Error;
};

// F0 + sum_i x_i F_i must be PSD. F.size() equals the number of variables.
struct SdpBlock {
  RMat F0;
  std::vector<RMat> F;
};

// minimise c.x subject to every block being PSD.
struct SdpProblem {
  RVec c;
  std::vector<SdpBlock> blocks;

  int variables() const { return int(c.size()); }
  void validate() const;
};

// stalled: no further progress was possible before reaching the tolerance.
enum class SdpStatus { optimal, max_iter, infeasible, stalled };

std::string to_string(SdpStatus s);

struct SdpSolution {
  RVec x;
  double objective = 0;
  double duality_gap = 0;
  double primal_infeasibility = 0;
  double dual_infeasibility = 0;
  double min_block_eigenvalue = 0;
  SdpStatus status = SdpStatus::max_iter;
  int iterations = 0;
  std::vector<RMat> dual;  // multiplier per block
};

struct SdpOptions {
  int max_iter = 100;
  double tol = 1e-8;
};

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts = {});

// Optimal, or stalled with gap and slack residual below `loose` and multiplier residual below 100 loose.
bool usable(const SdpSolution& s, double loose = 1e-6);

// Block of a complex Hermitian LMI mapped through real_embed.
SdpBlock embed_hermitian_block(const Mat& F0, const std::vector<Mat>& F);

// Basis of skew-Hermitian d x d matrices (d^2 elements).
std::vector<Mat> skew_hermitian_basis(int d);
// Basis of traceless Hermitian d x d matrices (d^2 - 1 elements).
std::vector<Mat> traceless_hermitian_basis(int d);

struct ExtendedDqfi {
  double value = 0;
  std::vector<Mat> skew;
  SdpSolution solution;
};

ExtendedDqfi extended_dqfi(const Povm& povm, const std::vector<Mat>& dpi, const SdpOptions& opts = {1000, 1e-9});

// Spectral norm of sum_j (dpi_j - S_j) pinv(pi_j) (dpi_j + S_j) for given offsets.
double extended_objective(const Povm& povm, const std::vector<Mat>& dpi, const std::vector<Mat>& skew);

struct SpectralQcrb {
  double value = 0;
  Mat rho;
  RMat v;
  SdpSolution solution;
};

// Q~(rho)_{kl} as Hermitian operators M_{kl} with Q~(rho)_{kl} = Tr(M_{kl} rho).
std::vector<std::vector<Mat>> qtilde_operators(const SldSet& slds, const Povm& povm);

SpectralQcrb spectral_qcrb_sdp(const Povm& povm, const DerivativeSet& derivs, const RMat& W = RMat(),
                               const SdpOptions& opts = {200, 1e-9});

struct CcrbStarOptions {
  int restarts = 12;
  int outer_iter = 200;
  std::uint64_t seed = 97;
  bool allow_closed_form = true;
};

struct CcrbStar {
  double value = 0;
  Ensemble ensemble;
  bool closed_form = false;
};

CcrbStar ccrb_star(const Povm& povm, const DerivativeSet& derivs, int ensemble_size, const RMat& W = RMat(),
                   const CcrbStarOptions& opts = {});

// Tr(W F^-1) for a weighted set of per-state CFI matrices; +inf if singular.
double weighted_ccrb(const std::vector<RMat>& fisher, const RVec& weights, const RMat& W);
// Minimise Tr(W F(q)^-1) over the probability simplex.
RVec optimise_weights(const std::vector<RMat>& fisher, const RMat& W, RVec start, double tol = 1e-10);

}  // namespace detbound
