#pragma once

#include "detbound/linalg.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace detbound {

using Povm = std::vector<Mat>;
// derivatives[k][j] = d pi_j / d theta_k
using DerivativeSet = std::vector<std::vector<Mat>>;
using Fixed = std::map<std::string, double>;

class ModelError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kDomainGuard = 1e-6;
inline constexpr int kMaxDim = 64;

struct DetectorModel {
  std::string name;
  int dim = 0;
  int outcomes = 0;
  int params = 0;
  std::vector<std::pair<double, double>> domain;
  std::function<Povm(const RVec&)> evaluator;
  // Empty means central finite differences of the evaluator.
  std::function<DerivativeSet(const RVec&)> derivative_evaluator;

  Povm povm(const RVec& theta) const;
  DerivativeSet derivatives(const RVec& theta) const;
  DerivativeSet finite_difference(const RVec& theta) const;
  bool in_domain(const RVec& theta) const;
  void require_in_domain(const RVec& theta) const;
};

// Throws ModelError on PSD or completeness violations.
void validate_povm(const Povm& povm, double tol = 1e-9);
void validate_derivatives(const DerivativeSet& derivs, double tol = 1e-8);

DetectorModel build_named_model(const std::string& name, const Fixed& fixed = {});
std::vector<std::string> named_models();

Povm effective_povm(const std::vector<Mat>& kraus, const Povm& ideal);

DetectorModel tensor_power_model(const DetectorModel& base, int n);

// Single-parameter local model pi_j(t) = pi_j + t * dpi_j around t = 0.
DetectorModel random_model(int d, int m, std::uint64_t seed);

Mat probe_from_bloch(double theta, double phi);
Mat pure_state(const Vec& psi);
// Rank-1 projectors onto |theta,phi>_+ and |theta,phi>_-.
Povm qubit_pvm(double theta, double phi);

namespace kraus {
std::vector<Mat> dephasing(double p);
std::vector<Mat> depolarizing(double p);
std::vector<Mat> amplitude_damping(double p);
std::vector<Mat> bit_flip(double p);
std::vector<Mat> bit_phase_flip(double p);
}  // namespace kraus

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace detbound
